#pragma once

#include "offpolicy/harness.hpp"

#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace offpolicy {

inline constexpr std::string_view kResultsHeader =
    "algorithm,variant,alpha,eta,beta,run,step,error,diverged";
inline constexpr std::string_view kBestCurvesHeader =
    "algorithm,variant,alpha,eta,beta,step,mean,stderr,auc";
inline constexpr std::string_view kSensitivityHeader =
    "algorithm,variant,alpha,eta,beta,auc,final_error,diverged";

std::string_view code_version();

// Shortest decimal text that parses back to the same double.
std::string format_double(double value);

// Parses "td", "td:full" or "td:target"; a bare id selects both variants.
std::vector<AlgorithmVariant> parse_algorithm_list(std::string_view spec);

// JSON config mirroring SweepConfig. Missing keys keep their defaults;
// unknown keys throw std::invalid_argument naming the key.
SweepConfig parse_config(std::string_view json_text);
SweepConfig load_config(const std::string& path);
std::string config_to_json(const SweepConfig& config);

// Metric label written to metadata, e.g. "rmsve_behavior_visits".
std::string metric_name(ErrorWeighting weighting);

// Rows are emitted in canonical instance order, then run, then step.
void write_results_csv(std::ostream& out, std::span<const RunRecord> records,
                       const SweepConfig& config);
std::vector<RunRecord> read_results_csv(std::istream& in, const SweepConfig& config);

std::string metadata_json(const SweepConfig& config, const ExperimentContext& context);
SweepConfig config_from_metadata(std::string_view metadata_text);

void write_best_curves_csv(std::ostream& out, std::span<const InstanceSummary> best,
                           const SweepConfig& config);
void write_sensitivity_csv(std::ostream& out, std::span<const SensitivityPoint> points);

} // namespace offpolicy
