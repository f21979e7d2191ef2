#pragma once

#include "offpolicy/collision.hpp"
#include "offpolicy/types.hpp"

#include <cstdint>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace offpolicy {

enum class FeatureKind { Tabular, RandomBinary };

inline std::string_view feature_kind_name(FeatureKind kind)
{
    return kind == FeatureKind::Tabular ? "tabular" : "random_binary";
}

inline FeatureKind parse_feature_kind(std::string_view name)
{
    if (name == "tabular")
        return FeatureKind::Tabular;
    if (name == "random_binary")
        return FeatureKind::RandomBinary;
    throw std::invalid_argument("unknown feature kind '" + std::string(name) + "'");
}

// Immutable state -> feature vector table. Column 0 is the terminal state and
// is identically zero, so bootstrapped terms vanish at episode end.
template <class Scalar>
class FeatureMap {
public:
    using Table = Matrix<Scalar>;
    using ConstColumn = typename Table::ConstColXpr;

    static constexpr int kMaxAttempts = 1000;

    static FeatureMap tabular()
    {
        Table t = Table::Zero(kNumStates, kNumStates + 1);
        for (int s = 1; s <= kNumStates; ++s)
            t(s - 1, s) = 1;
        return FeatureMap(FeatureKind::Tabular, 1, 0, std::move(t));
    }

    // Each state gets `ones_per_state` distinct active indices; resampled until
    // all eight vectors are distinct.
    static FeatureMap random_binary(int dim, int ones_per_state, std::uint64_t seed)
    {
        if (dim < 1)
            throw std::invalid_argument("feature dimension must be positive");
        if (ones_per_state < 1 || ones_per_state > dim)
            throw std::invalid_argument("ones_per_state must lie in 1..dim");

        std::mt19937_64 rng(seed);
        std::vector<int> slots(dim);
        for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
            Table t = Table::Zero(dim, kNumStates + 1);
            for (int s = 1; s <= kNumStates; ++s) {
                std::iota(slots.begin(), slots.end(), 0);
                // partial Fisher-Yates
                for (int k = 0; k < ones_per_state; ++k) {
                    const auto span = static_cast<std::uint64_t>(dim - k);
                    const int j = k + static_cast<int>(rng() % span);
                    std::swap(slots[k], slots[j]);
                    t(slots[k], s) = 1;
                }
            }
            if (columns_distinct(t))
                return FeatureMap(FeatureKind::RandomBinary, ones_per_state, seed, std::move(t));
        }
        throw std::runtime_error("could not draw " + std::to_string(kNumStates) +
                                 " distinct binary feature vectors with dim=" + std::to_string(dim) +
                                 ", ones_per_state=" + std::to_string(ones_per_state));
    }

    static FeatureMap build(FeatureKind kind, int dim, int ones_per_state, std::uint64_t seed)
    {
        if (kind == FeatureKind::Tabular) {
            if (dim != kNumStates)
                throw std::invalid_argument("tabular features require dim = 8");
            return tabular();
        }
        return random_binary(dim, ones_per_state, seed);
    }

    FeatureKind kind() const { return kind_; }
    int dim() const { return static_cast<int>(table_.rows()); }
    int ones_per_state() const { return ones_per_state_; }
    std::uint64_t seed() const { return seed_; }

    ConstColumn phi(State s) const { return table_.col(s.index()); }

    // dim x 8 matrix whose columns are x(1)..x(8).
    auto state_features() const { return table_.rightCols(kNumStates); }

private:
    FeatureMap(FeatureKind kind, int ones, std::uint64_t seed, Table table)
        : kind_(kind), ones_per_state_(ones), seed_(seed), table_(std::move(table))
    {}

    static bool columns_distinct(const Table& t)
    {
        for (int a = 1; a <= kNumStates; ++a)
            for (int b = a + 1; b <= kNumStates; ++b)
                if (t.col(a) == t.col(b))
                    return false;
        return true;
    }

    FeatureKind kind_;
    int ones_per_state_;
    std::uint64_t seed_;
    Table table_;
};

} // namespace offpolicy
