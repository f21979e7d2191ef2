#include "offpolicy/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <random>
#include <stdexcept>
#include <thread>
#include <tuple>

namespace offpolicy {

std::vector<double> default_alpha_grid()
{
    std::vector<double> grid;
    for (int x = 0; x <= 18; ++x)
        grid.push_back(std::ldexp(1.0, -x));
    return grid;
}

std::vector<double> default_eta_grid()
{
    std::vector<double> grid;
    for (int x = -6; x <= 8; ++x)
        grid.push_back(std::ldexp(1.0, x));
    return grid;
}

std::vector<double> default_beta_grid() { return {0.0, 0.2, 0.4, 0.6, 0.8, 1.0}; }

std::vector<AlgorithmVariant> all_algorithm_variants()
{
    std::vector<AlgorithmVariant> out;
    for (Algorithm a : kAlgorithms)
        for (Variant v : kVariants)
            out.push_back({a, v});
    return out;
}

void SweepConfig::validate() const
{
    if (algorithms.empty())
        throw std::invalid_argument("no algorithms selected");
    if (alpha_grid.empty() || eta_grid.empty() || beta_grid.empty())
        throw std::invalid_argument("parameter grids must be non-empty");
    for (double a : alpha_grid)
        if (!(a > 0))
            throw std::invalid_argument("alpha grid values must be positive");
    for (double e : eta_grid)
        if (!(e > 0))
            throw std::invalid_argument("eta grid values must be positive");
    for (double b : beta_grid)
        if (!(b >= 0 && b <= 1))
            throw std::invalid_argument("beta grid values must lie in [0, 1]");
    if (num_steps < 1)
        throw std::invalid_argument("num_steps must be positive");
    if (num_runs < 1)
        throw std::invalid_argument("num_runs must be positive");
    if (record_every < 1)
        throw std::invalid_argument("record_every must be positive");
    if (!(gamma >= 0 && gamma < 1))
        throw std::invalid_argument("gamma must lie in [0, 1)");
    if (!(cbar >= 0))
        throw std::invalid_argument("cbar must be non-negative");
    if (!(zeta >= 0 && zeta <= 1))
        throw std::invalid_argument("zeta must lie in [0, 1]");
}

bool canonical_less(const Instance& a, const Instance& b)
{
    auto key = [](const Instance& i) {
        return std::make_tuple(static_cast<int>(i.algorithm), static_cast<int>(i.variant),
                               i.alpha_index, i.eta_index, i.beta_index);
    };
    return key(a) < key(b);
}

Instance make_instance(const SweepConfig& config, Algorithm algorithm, Variant variant,
                       int alpha_index, int eta_index, int beta_index)
{
    auto in_range = [](int i, const std::vector<double>& grid) {
        return i >= 0 && static_cast<std::size_t>(i) < grid.size();
    };
    if (!in_range(alpha_index, config.alpha_grid))
        throw std::out_of_range("alpha index outside grid");
    if (uses_secondary_weights(algorithm) != (eta_index >= 0))
        throw std::invalid_argument("eta index must be given exactly for gradient-TD algorithms");
    if (uses_beta(algorithm) != (beta_index >= 0))
        throw std::invalid_argument("beta index must be given exactly for etdb");
    if (eta_index >= 0 && !in_range(eta_index, config.eta_grid))
        throw std::out_of_range("eta index outside grid");
    if (beta_index >= 0 && !in_range(beta_index, config.beta_grid))
        throw std::out_of_range("beta index outside grid");

    Instance inst{algorithm, variant, alpha_index, eta_index, beta_index, {}};
    inst.params.alpha = config.alpha_grid[alpha_index];
    inst.params.eta = eta_index >= 0 ? config.eta_grid[eta_index] : 1.0;
    inst.params.beta = beta_index >= 0 ? config.beta_grid[beta_index] : 0.0;
    inst.params.lambda = 0;
    inst.params.zeta = config.zeta;
    inst.params.cbar = config.cbar;
    inst.params.gamma = config.gamma;
    inst.params.validate();
    return inst;
}

std::vector<Instance> enumerate_instances(const SweepConfig& config)
{
    std::vector<Instance> out;
    const int n_alpha = static_cast<int>(config.alpha_grid.size());
    for (const auto& [algorithm, variant] : config.algorithms) {
        const int n_eta = uses_secondary_weights(algorithm) ? static_cast<int>(config.eta_grid.size()) : 0;
        const int n_beta = uses_beta(algorithm) ? static_cast<int>(config.beta_grid.size()) : 0;
        for (int a = 0; a < n_alpha; ++a)
            for (int e = n_eta ? 0 : -1; e < n_eta; ++e)
                for (int b = n_beta ? 0 : -1; b < n_beta; ++b)
                    out.push_back(make_instance(config, algorithm, variant, a, e, b));
    }
    std::sort(out.begin(), out.end(), canonical_less);
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

// splitmix64 finaliser
std::uint64_t mix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

namespace {

std::uint64_t combine(std::uint64_t h, std::int64_t value)
{
    return mix64(h ^ mix64(static_cast<std::uint64_t>(value)));
}

} // namespace

RunSeeds derive_seed(std::uint64_t base_seed, Algorithm algorithm, Variant variant,
                     int alpha_index, int eta_index, int beta_index, int run)
{
    const std::uint64_t root = mix64(base_seed);
    RunSeeds seeds{};
    seeds.environment = combine(combine(root, 0x656e76), run); // "env"
    std::uint64_t h = combine(root, 0x696e7374);                // "inst"
    for (std::int64_t v : {static_cast<std::int64_t>(algorithm), static_cast<std::int64_t>(variant),
                           std::int64_t{alpha_index}, std::int64_t{eta_index},
                           std::int64_t{beta_index}, std::int64_t{run}})
        h = combine(h, v);
    seeds.instance = h;
    return seeds;
}

RunSeeds derive_seed(std::uint64_t base_seed, const Instance& i, int run)
{
    return derive_seed(base_seed, i.algorithm, i.variant, i.alpha_index, i.eta_index, i.beta_index,
                       run);
}

ExperimentContext make_context(const SweepConfig& config)
{
    config.validate();
    CollisionTask<double> task(Policy<double>::target(), Policy<double>::behavior(),
                               config.start_distribution);
    auto features = FeatureMap<double>::build(config.features.kind, config.features.dim,
                                              config.features.ones_per_state, config.features.seed);
    auto truth = make_ground_truth(task, config.gamma, config.weighting);
    return {std::move(task), std::move(features), std::move(truth)};
}

RunRecord run_single(const ExperimentContext& context, const SweepConfig& config,
                     const Instance& instance, int run)
{
    const RunSeeds seeds = derive_seed(config.base_seed, instance, run);
    RunRecord record{instance, run, seeds.environment, {}, false};
    record.errors.reserve(config.points_per_run());

    const auto& map = context.features;
    auto agent = make_agent(instance.algorithm, instance.variant, instance.params, map.dim());
    ExperienceStream<double, std::mt19937_64> stream(context.task, std::mt19937_64(seeds.environment));

    Vector<double, kNumStates> values;
    record.errors.push_back(rmsve(agent.w, map, context.truth));
    for (int t = 1; t <= config.num_steps; ++t) {
        if (!record.diverged)
            update_in_place(agent, stream.next(), map);
        if (t % config.record_every != 0)
            continue;
        if (!record.diverged) {
            values.noalias() = map.state_features().transpose() * agent.w;
            if (!agent.w.allFinite() || !agent.v.allFinite() || !values.allFinite() ||
                values.cwiseAbs().maxCoeff() > kDivergenceThreshold)
                record.diverged = true;
        }
        record.errors.push_back(record.diverged ? record.errors.back()
                                                : rmsve(agent.w, map, context.truth));
    }
    return record;
}

std::vector<RunRecord> run_sweep(const SweepConfig& config, int parallelism,
                                 const ProgressCallback& progress)
{
    const ExperimentContext context = make_context(config);
    const std::vector<Instance> instances = enumerate_instances(config);
    const std::size_t total = instances.size() * static_cast<std::size_t>(config.num_runs);

    std::vector<RunRecord> records(total);
    std::atomic<std::size_t> next{0};
    std::atomic<std::size_t> finished{0};
    std::mutex error_mutex;
    std::exception_ptr error;
    std::mutex progress_mutex;

    auto worker = [&] {
        for (std::size_t job = next++; job < total; job = next++) {
            try {
                const auto& inst = instances[job / config.num_runs];
                records[job] = run_single(context, config, inst, static_cast<int>(job % config.num_runs));
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error)
                    error = std::current_exception();
                next = total;
                return;
            }
            const std::size_t done = ++finished;
            if (progress) {
                std::lock_guard lock(progress_mutex);
                progress(done, total);
            }
        }
    };

    if (parallelism <= 0)
        parallelism = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    if (parallelism == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (int i = 0; i < parallelism; ++i)
            pool.emplace_back(worker);
    }
    if (error)
        std::rethrow_exception(error);
    return records;
}

CurveSummary aggregate(std::span<const RunRecord> records)
{
    if (records.size() < 2)
        throw std::invalid_argument("aggregate needs at least two runs");
    const std::size_t points = records.front().errors.size();
    if (points == 0)
        throw std::invalid_argument("empty error series");

    const auto runs = static_cast<Eigen::Index>(records.size());
    Matrix<double> table(runs, static_cast<Eigen::Index>(points));
    for (Eigen::Index r = 0; r < runs; ++r) {
        const auto& errors = records[r].errors;
        if (errors.size() != points)
            throw std::invalid_argument("error series have mismatched lengths");
        table.row(r) = Eigen::Map<const Vector<double>>(errors.data(), errors.size()).transpose();
    }

    // Shift by the first run before the two-pass variance so identical runs
    // give exactly zero spread.
    const Eigen::RowVectorXd origin = table.row(0);
    const Matrix<double> shifted = table.rowwise() - origin;
    const Eigen::RowVectorXd shift_mean = shifted.colwise().mean();
    const Eigen::RowVectorXd mean = origin + shift_mean;
    const Eigen::RowVectorXd centered_sq = (shifted.rowwise() - shift_mean).array().square().colwise().sum();
    const Eigen::RowVectorXd se =
        (centered_sq.array() / static_cast<double>(runs - 1)).sqrt() / std::sqrt(static_cast<double>(runs));

    CurveSummary out;
    out.mean.assign(mean.data(), mean.data() + mean.size());
    out.standard_error.assign(se.data(), se.data() + se.size());
    out.auc = mean.mean();
    return out;
}

std::vector<InstanceSummary> summarize(std::span<const RunRecord> records)
{
    std::vector<std::size_t> order(records.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (canonical_less(records[a].instance, records[b].instance))
            return true;
        if (canonical_less(records[b].instance, records[a].instance))
            return false;
        return records[a].run < records[b].run;
    });

    std::vector<InstanceSummary> out;
    std::vector<RunRecord> group;
    auto flush = [&] {
        if (group.empty())
            return;
        InstanceSummary s{group.front().instance, aggregate(group), static_cast<int>(group.size()),
                          false};
        s.diverged = std::any_of(group.begin(), group.end(), [](const RunRecord& r) { return r.diverged; });
        out.push_back(std::move(s));
        group.clear();
    };
    for (std::size_t idx : order) {
        if (!group.empty() && !(group.front().instance == records[idx].instance))
            flush();
        group.push_back(records[idx]);
    }
    flush();
    return out;
}

InstanceSummary select_best(std::span<const InstanceSummary> summaries)
{
    if (summaries.empty())
        throw std::invalid_argument("select_best needs at least one instance");
    const auto& first = summaries.front().instance;
    for (const auto& s : summaries)
        if (s.instance.algorithm != first.algorithm || s.instance.variant != first.variant)
            throw std::invalid_argument("select_best expects a single algorithm/variant");

    const bool any_stable =
        std::any_of(summaries.begin(), summaries.end(), [](const auto& s) { return !s.diverged; });
    auto better = [](const InstanceSummary& a, const InstanceSummary& b) {
        return std::make_tuple(a.curve.auc, a.instance.params.alpha, a.instance.params.eta,
                               a.instance.params.beta) <
               std::make_tuple(b.curve.auc, b.instance.params.alpha, b.instance.params.eta,
                               b.instance.params.beta);
    };

    const InstanceSummary* best = nullptr;
    for (const auto& s : summaries) {
        if (any_stable && s.diverged)
            continue;
        if (!best || better(s, *best))
            best = &s;
    }
    return *best;
}

std::vector<SensitivityPoint> sensitivity_slice(std::span<const InstanceSummary> summaries,
                                                const Instance& best)
{
    std::vector<SensitivityPoint> out;
    for (const auto& s : summaries) {
        const auto& i = s.instance;
        if (i.algorithm != best.algorithm || i.variant != best.variant ||
            i.eta_index != best.eta_index || i.beta_index != best.beta_index)
            continue;
        out.push_back({i, i.params.alpha, s.curve.auc, s.curve.mean.back(), s.diverged});
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        return a.instance.alpha_index < b.instance.alpha_index;
    });
    return out;
}

} // namespace offpolicy
