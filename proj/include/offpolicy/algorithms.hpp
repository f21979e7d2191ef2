#pragma once

#include "offpolicy/collision.hpp"
#include "offpolicy/features.hpp"
#include "offpolicy/types.hpp"

#include <algorithm>
#include <array>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace offpolicy {

enum class Algorithm {
    TD,
    GTD,
    GTD2,
    ProximalGTD2,
    HTD,
    ETD,
    ETDBeta,
    Vtrace,
    TreeBackup,
    ABTD,
};

inline constexpr std::array<Algorithm, 10> kAlgorithms{
    Algorithm::TD,     Algorithm::GTD,     Algorithm::GTD2,   Algorithm::ProximalGTD2,
    Algorithm::HTD,    Algorithm::ETD,     Algorithm::ETDBeta, Algorithm::Vtrace,
    Algorithm::TreeBackup, Algorithm::ABTD,
};

inline constexpr std::array<std::string_view, 10> kAlgorithmIds{
    "td", "gtd", "gtd2", "pgtd2", "htd", "etd", "etdb", "vtrace", "tb", "abtd",
};

inline std::string_view algorithm_id(Algorithm a) { return kAlgorithmIds[static_cast<int>(a)]; }

inline std::optional<Algorithm> parse_algorithm(std::string_view id)
{
    for (std::size_t i = 0; i < kAlgorithmIds.size(); ++i)
        if (kAlgorithmIds[i] == id)
            return kAlgorithms[i];
    return std::nullopt;
}

// Gradient-TD family: carries secondary weights with step size eta * alpha.
inline constexpr bool uses_secondary_weights(Algorithm a)
{
    return a == Algorithm::GTD || a == Algorithm::GTD2 || a == Algorithm::ProximalGTD2 ||
           a == Algorithm::HTD;
}

inline constexpr bool uses_beta(Algorithm a) { return a == Algorithm::ETDBeta; }

// Where the importance ratio is applied in the TD error.
//   FullCorrection: rho * (R + gamma V' - V)
//   TargetOnly:     rho * (R + gamma V') - V
enum class Variant { FullCorrection, TargetOnly };

inline constexpr std::array<Variant, 2> kVariants{Variant::FullCorrection, Variant::TargetOnly};

inline std::string_view variant_id(Variant v)
{
    return v == Variant::FullCorrection ? "full" : "target";
}

inline std::optional<Variant> parse_variant(std::string_view id)
{
    if (id == "full")
        return Variant::FullCorrection;
    if (id == "target")
        return Variant::TargetOnly;
    return std::nullopt;
}

template <class Scalar>
struct Hyperparams {
    Scalar alpha = Scalar(1) / 64;
    Scalar eta = 1;  // secondary step size is eta * alpha
    Scalar beta = 0; // ETD(lambda, beta) followon decay
    Scalar lambda = 0;
    Scalar zeta = 0;
    Scalar cbar = 1; // Vtrace clip
    Scalar gamma = Scalar(0.9);

    Scalar secondary_step() const { return eta * alpha; }

    void validate() const
    {
        if (!(alpha > 0))
            throw std::invalid_argument("alpha must be positive");
        if (!(eta > 0))
            throw std::invalid_argument("eta must be positive");
        if (!(beta >= 0 && beta <= 1))
            throw std::invalid_argument("beta must lie in [0, 1]");
        if (lambda != 0)
            throw std::invalid_argument("only lambda = 0 (one-step updates) is supported");
        if (!(zeta >= 0 && zeta <= 1))
            throw std::invalid_argument("zeta must lie in [0, 1]");
        if (!(cbar >= 0))
            throw std::invalid_argument("cbar must be non-negative");
        if (!(gamma >= 0 && gamma < 1))
            throw std::invalid_argument("gamma must lie in [0, 1)");
    }
};

template <class Scalar>
struct AgentState {
    Algorithm algorithm;
    Variant variant;
    Hyperparams<Scalar> params;
    Vector<Scalar> w;
    Vector<Scalar> v; // zero and untouched outside the gradient-TD family
    // Followon of the last step; 0 before the first step of an episode so the
    // recursion yields F = 1 there.
    Scalar followon = 0;
    Scalar rho_prev = 1;
};

template <class Scalar>
AgentState<Scalar> make_agent(Algorithm algorithm, Variant variant, const Hyperparams<Scalar>& params,
                              int dim)
{
    params.validate();
    if (dim < 1)
        throw std::invalid_argument("feature dimension must be positive");
    return {algorithm, variant, params, Vector<Scalar>::Zero(dim), Vector<Scalar>::Zero(dim)};
}

// rho * (R + gamma V') - V
template <class Derived>
typename Derived::Scalar delta_partial(const Eigen::MatrixBase<Derived>& w,
                                       const Transition<typename Derived::Scalar>& t,
                                       const FeatureMap<typename Derived::Scalar>& map,
                                       typename Derived::Scalar gamma)
{
    const auto value = w.dot(map.phi(t.state));
    const auto next_value = w.dot(map.phi(t.next_state));
    return t.rho * (t.reward + gamma * next_value) - value;
}

// rho * (R + gamma V' - V)
template <class Derived>
typename Derived::Scalar delta_full(const Eigen::MatrixBase<Derived>& w,
                                    const Transition<typename Derived::Scalar>& t,
                                    const FeatureMap<typename Derived::Scalar>& map,
                                    typename Derived::Scalar gamma)
{
    const auto value = w.dot(map.phi(t.state));
    const auto next_value = w.dot(map.phi(t.next_state));
    return t.rho * (t.reward + gamma * next_value - value);
}

template <class Derived>
typename Derived::Scalar delta(Variant variant, const Eigen::MatrixBase<Derived>& w,
                               const Transition<typename Derived::Scalar>& t,
                               const FeatureMap<typename Derived::Scalar>& map,
                               typename Derived::Scalar gamma)
{
    return variant == Variant::FullCorrection ? delta_full(w, t, map, gamma)
                                              : delta_partial(w, t, map, gamma);
}

// One lambda = 0 learning step. Reads nothing beyond the current transition.
//
// TargetOnly rules come from the FullCorrection ones by dropping rho wherever
// it scales a quantity of S_t alone (the control-variate term rho * V and its
// gradient-correction counterparts).
template <class Scalar>
void update_in_place(AgentState<Scalar>& agent, const Transition<Scalar>& t,
                     const FeatureMap<Scalar>& map)
{
    if (agent.w.size() != map.dim() || agent.v.size() != map.dim())
        throw std::invalid_argument("agent dimension does not match feature map");

    const auto& p = agent.params;
    const bool full = agent.variant == Variant::FullCorrection;
    const auto x = map.phi(t.state);
    const auto x_next = map.phi(t.next_state);
    const Scalar alpha = p.alpha;
    const Scalar gamma = p.gamma;
    const Scalar rho = t.rho;

    const Scalar value = agent.w.dot(x);
    const Scalar target = t.reward + gamma * agent.w.dot(x_next);
    const Scalar td_error = full ? rho * (target - value) : rho * target - value;

    switch (agent.algorithm) {
    case Algorithm::TD:
    // Tree Backup(lambda) for state values uses the trace
    //   z_t = rho_t (gamma lambda b(A_{t-1}|S_{t-1}) z_{t-1} + x_t),  w += alpha delta_t z_t,
    // and ABTD(zeta) the trace
    //   z_t = rho_t (gamma nu_{t-1} b(A_{t-1}|S_{t-1}) z_{t-1} + x_t),
    // where zeta only enters through nu. With one-step updates both traces are
    // rho_t x_t, so the rule coincides with off-policy TD(0).
    case Algorithm::TreeBackup:
    case Algorithm::ABTD:
        agent.w.noalias() += (alpha * td_error) * x;
        break;

    case Algorithm::GTD: { // TDC
        const Scalar xv = x.dot(agent.v);
        const Scalar correction = full ? gamma * rho * xv : gamma * xv;
        agent.w.noalias() += alpha * (td_error * x - correction * x_next);
        agent.v.noalias() += (p.secondary_step() * (td_error - xv)) * x;
        break;
    }

    case Algorithm::GTD2:
    case Algorithm::ProximalGTD2: {
        Scalar xv = x.dot(agent.v);
        if (agent.algorithm == Algorithm::ProximalGTD2) {
            // extragradient ordering: secondary step first, then reuse it
            agent.v.noalias() += (p.secondary_step() * (td_error - xv)) * x;
            xv = x.dot(agent.v);
        }
        if (full)
            agent.w.noalias() += (alpha * rho * xv) * (x - gamma * x_next);
        else
            agent.w.noalias() += (alpha * xv) * (x - (gamma * rho) * x_next);
        if (agent.algorithm == Algorithm::GTD2)
            agent.v.noalias() += (p.secondary_step() * (td_error - xv)) * x;
        break;
    }

    case Algorithm::HTD: {
        const Scalar xv = x.dot(agent.v);
        if (full)
            agent.w.noalias() += alpha * (td_error * x + ((rho - 1) * xv) * (x - gamma * x_next));
        else
            agent.w.noalias() += (alpha * td_error) * x;
        agent.v.noalias() += p.secondary_step() * (td_error * x - xv * (x - gamma * x_next));
        break;
    }

    case Algorithm::ETD:
    case Algorithm::ETDBeta: {
        const Scalar decay = agent.algorithm == Algorithm::ETD ? gamma : p.beta;
        const Scalar followon = decay * agent.rho_prev * agent.followon + 1;
        agent.w.noalias() += (alpha * followon * td_error) * x;
        agent.followon = followon;
        agent.rho_prev = rho;
        break;
    }

    case Algorithm::Vtrace: {
        const Scalar clipped = std::min(rho, p.cbar);
        const Scalar error = full ? clipped * (target - value) : clipped * target - value;
        agent.w.noalias() += (alpha * error) * x;
        break;
    }
    }

    if (t.done) {
        agent.followon = 0;
        agent.rho_prev = 1;
    }
}

template <class Scalar>
AgentState<Scalar> update(AgentState<Scalar> agent, const Transition<Scalar>& t,
                          const FeatureMap<Scalar>& map)
{
    update_in_place(agent, t, map);
    return agent;
}

template <class Scalar>
Scalar predict(const AgentState<Scalar>& agent, const FeatureMap<Scalar>& map, State s)
{
    return agent.w.dot(map.phi(s));
}

template <class Scalar>
struct SampleStats {
    Scalar mean = 0;
    Scalar variance = 0; // unbiased (n - 1) estimator
};

// Per-state sample mean and variance of the chosen TD error, with actions drawn
// from the behavior policy. Index 0 of the result is state 1.
template <class Scalar, class URBG>
std::array<SampleStats<Scalar>, kNumStates>
variance_probe(const CollisionTask<Scalar>& task, Variant variant, const Vector<Scalar>& w,
               const FeatureMap<Scalar>& map, Scalar gamma, int num_samples, URBG& rng)
{
    if (num_samples < 2)
        throw std::invalid_argument("variance_probe needs at least two samples");
    if (w.size() != map.dim())
        throw std::invalid_argument("weight dimension does not match feature map");

    std::array<SampleStats<Scalar>, kNumStates> out{};
    for (int i = 1; i <= kNumStates; ++i) {
        const State s = State::at(i);
        Scalar mean = 0;
        Scalar m2 = 0;
        for (int n = 1; n <= num_samples; ++n) {
            const auto t = task.transition(s, task.sample_behavior_action(s, rng));
            const Scalar d = delta(variant, w, t, map, gamma);
            const Scalar diff = d - mean;
            mean += diff / n;
            m2 += diff * (d - mean);
        }
        out[i - 1] = {mean, m2 / (num_samples - 1)};
    }
    return out;
}

} // namespace offpolicy
