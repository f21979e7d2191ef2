#pragma once

#include "offpolicy/algorithms.hpp"
#include "offpolicy/collision.hpp"
#include "offpolicy/features.hpp"
#include "offpolicy/oracle.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace offpolicy {

struct FeatureSpec {
    FeatureKind kind = FeatureKind::RandomBinary;
    int dim = 6;
    int ones_per_state = 3;
    std::uint64_t seed = 42;
};

struct AlgorithmVariant {
    Algorithm algorithm;
    Variant variant;
    friend bool operator==(const AlgorithmVariant&, const AlgorithmVariant&) = default;
};

std::vector<double> default_alpha_grid(); // 2^-x, x = 0..18
std::vector<double> default_eta_grid();   // 2^x, x = -6..8
std::vector<double> default_beta_grid();  // 0, 0.2, ..., 1
std::vector<AlgorithmVariant> all_algorithm_variants();

struct SweepConfig {
    std::vector<AlgorithmVariant> algorithms = all_algorithm_variants();
    std::vector<double> alpha_grid = default_alpha_grid();
    std::vector<double> eta_grid = default_eta_grid();
    std::vector<double> beta_grid = default_beta_grid();
    int num_steps = 20000;
    int num_runs = 50;
    double gamma = 0.9;
    FeatureSpec features;
    int record_every = 100;
    std::uint64_t base_seed = 0;
    ErrorWeighting weighting = ErrorWeighting::BehaviorVisits;
    double cbar = 1;
    double zeta = 0;
    std::array<double, kNumStartStates> start_distribution{0.25, 0.25, 0.25, 0.25};

    void validate() const;
    int points_per_run() const { return num_steps / record_every + 1; }
};

// One point of the parameter grid. Indices are -1 where the grid does not apply.
struct Instance {
    Algorithm algorithm;
    Variant variant;
    int alpha_index = 0;
    int eta_index = -1;
    int beta_index = -1;
    Hyperparams<double> params;

    // Grid coordinates only; params are a function of them and the config.
    friend bool operator==(const Instance& a, const Instance& b)
    {
        return a.algorithm == b.algorithm && a.variant == b.variant &&
               a.alpha_index == b.alpha_index && a.eta_index == b.eta_index &&
               a.beta_index == b.beta_index;
    }
};

// Canonical order: roster order of algorithms, full before target, then grid
// indices (alpha, eta, beta) in ascending order.
bool canonical_less(const Instance& a, const Instance& b);

Instance make_instance(const SweepConfig& config, Algorithm algorithm, Variant variant,
                       int alpha_index, int eta_index = -1, int beta_index = -1);
std::vector<Instance> enumerate_instances(const SweepConfig& config);

struct RunSeeds {
    std::uint64_t environment; // depends on (base_seed, run) only
    std::uint64_t instance;    // depends on every coordinate
};

std::uint64_t mix64(std::uint64_t x);
RunSeeds derive_seed(std::uint64_t base_seed, Algorithm algorithm, Variant variant,
                     int alpha_index, int eta_index, int beta_index, int run);
RunSeeds derive_seed(std::uint64_t base_seed, const Instance& instance, int run);

struct RunRecord {
    Instance instance;
    int run = 0;
    std::uint64_t seed = 0; // environment stream seed
    std::vector<double> errors;
    bool diverged = false;
};

// Task, representation and ground truth shared read-only by every run of a sweep.
struct ExperimentContext {
    CollisionTask<double> task;
    FeatureMap<double> features;
    GroundTruth<double> truth;
};

ExperimentContext make_context(const SweepConfig& config);

inline constexpr double kDivergenceThreshold = 1e6;

RunRecord run_single(const ExperimentContext& context, const SweepConfig& config,
                     const Instance& instance, int run);

using ProgressCallback = std::function<void(std::size_t done, std::size_t total)>;

// Every (instance, run) pair of the grid, in canonical order regardless of
// the number of worker threads.
std::vector<RunRecord> run_sweep(const SweepConfig& config, int parallelism,
                                 const ProgressCallback& progress = {});

struct CurveSummary {
    std::vector<double> mean;
    std::vector<double> standard_error;
    double auc = 0;
};

CurveSummary aggregate(std::span<const RunRecord> records);

struct InstanceSummary {
    Instance instance;
    CurveSummary curve;
    int num_runs = 0;
    bool diverged = false; // any run diverged
};

// Groups records by instance (canonical order) and aggregates each group.
std::vector<InstanceSummary> summarize(std::span<const RunRecord> records);

// Smallest AUC among non-diverged instances (all instances if every one
// diverged); ties go to smaller alpha, then eta, then beta.
InstanceSummary select_best(std::span<const InstanceSummary> summaries);

struct SensitivityPoint {
    Instance instance;
    double alpha = 0;
    double auc = 0;
    double final_error = 0;
    bool diverged = false;
};

// The best instance's eta/beta held fixed, alpha varied over the grid.
std::vector<SensitivityPoint> sensitivity_slice(std::span<const InstanceSummary> summaries,
                                                const Instance& best);

} // namespace offpolicy
