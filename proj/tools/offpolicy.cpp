// Command-line front end for the off-policy TD experiment harness.
//
//   offpolicy check  [--seed N]
//   offpolicy run    --algorithm td --variant full --alpha 0.01 [...]
//   offpolicy sweep  [--config cfg.json] --out results/ [--threads N]
//   offpolicy curves --input results/ [--out curves/]
//
// Exit codes: 0 success, 1 failed check, 2 invalid arguments or config, 3 I/O failure.

#include "offpolicy/checks.hpp"
#include "offpolicy/harness.hpp"
#include "offpolicy/io.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>

namespace fs = std::filesystem;
using namespace offpolicy;

namespace {

constexpr int kExitCheckFailed = 1;
constexpr int kExitInvalid = 2;
constexpr int kExitIo = 3;

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::ofstream open_output(const fs::path& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("cannot write " + path.string());
    return out;
}

std::string read_file(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot read " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct CommonOptions {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<int> steps;
    std::optional<int> record_every;
    std::optional<double> gamma;

    SweepConfig resolve() const
    {
        SweepConfig c = config_path.empty() ? SweepConfig{} : load_config(config_path);
        if (seed)
            c.base_seed = *seed;
        if (steps)
            c.num_steps = *steps;
        if (record_every)
            c.record_every = *record_every;
        if (gamma)
            c.gamma = *gamma;
        c.validate();
        return c;
    }

    void attach(CLI::App* app)
    {
        app->add_option("--config", config_path, "JSON sweep configuration")->check(CLI::ExistingFile);
        app->add_option("--seed", seed, "Base seed (overrides config)");
        app->add_option("--steps", steps, "Environment steps per run");
        app->add_option("--record-every", record_every, "Steps between recorded error points");
        app->add_option("--gamma", gamma, "Discount factor");
    }
};

int cmd_check(std::uint64_t seed)
{
    bool ok = true;
    for (const auto& r : run_checks(seed)) {
        std::cout << (r.passed ? "PASS " : "FAIL ") << r.name;
        if (!r.detail.empty())
            std::cout << "  [" << r.detail << "]";
        std::cout << '\n';
        ok = ok && r.passed;
    }
    return ok ? 0 : kExitCheckFailed;
}

struct RunOptions {
    std::string algorithm;
    std::string variant = "full";
    double alpha = 1.0 / 64;
    double eta = 1;
    double beta = 0;
    std::optional<double> cbar;
    int run = 0;
    std::string out;
};

int cmd_run(const CommonOptions& common, const RunOptions& o)
{
    SweepConfig config = common.resolve();
    const auto algorithm = parse_algorithm(o.algorithm);
    if (!algorithm)
        throw std::invalid_argument("unknown algorithm '" + o.algorithm + "'");
    const auto variant = parse_variant(o.variant);
    if (!variant)
        throw std::invalid_argument("unknown variant '" + o.variant + "'");
    config.alpha_grid = {o.alpha};
    config.eta_grid = {o.eta};
    config.beta_grid = {o.beta};
    if (o.cbar)
        config.cbar = *o.cbar;
    config.algorithms = {{*algorithm, *variant}};
    config.validate();

    const auto instance = make_instance(config, *algorithm, *variant, 0,
                                        uses_secondary_weights(*algorithm) ? 0 : -1,
                                        uses_beta(*algorithm) ? 0 : -1);
    const auto context = make_context(config);
    const std::vector<RunRecord> records{run_single(context, config, instance, o.run)};

    if (o.out.empty()) {
        write_results_csv(std::cout, records, config);
    } else {
        auto out = open_output(o.out);
        write_results_csv(out, records, config);
    }
    std::cerr << "final error " << records.front().errors.back()
              << (records.front().diverged ? " (diverged)" : "") << '\n';
    return 0;
}

int cmd_sweep(const CommonOptions& common, const std::string& out_dir, int threads,
              const std::string& algorithms, std::optional<int> runs, bool quiet)
{
    SweepConfig config = common.resolve();
    if (!algorithms.empty())
        config.algorithms = parse_algorithm_list(algorithms);
    if (runs)
        config.num_runs = *runs;
    config.validate();

    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec)
        throw IoError("cannot create " + out_dir + ": " + ec.message());

    std::size_t last_percent = 101;
    ProgressCallback progress;
    if (!quiet)
        progress = [&](std::size_t done, std::size_t total) {
            const std::size_t percent = done * 100 / total;
            if (percent != last_percent) {
                last_percent = percent;
                std::cerr << "\r" << done << "/" << total << " runs (" << percent << "%)" << std::flush;
            }
        };
    const auto records = run_sweep(config, threads, progress);
    if (!quiet)
        std::cerr << '\n';

    const auto context = make_context(config);
    {
        auto out = open_output(fs::path(out_dir) / "results.csv");
        write_results_csv(out, records, config);
        if (!out)
            throw IoError("write failed for results.csv");
    }
    {
        auto out = open_output(fs::path(out_dir) / "metadata.json");
        out << metadata_json(config, context) << '\n';
    }
    std::cerr << "wrote " << records.size() << " runs to " << out_dir << '\n';
    return 0;
}

int cmd_curves(const std::string& input_dir, std::string out_dir)
{
    if (out_dir.empty())
        out_dir = input_dir;
    const SweepConfig config = config_from_metadata(read_file(fs::path(input_dir) / "metadata.json"));
    std::ifstream in(fs::path(input_dir) / "results.csv", std::ios::binary);
    if (!in)
        throw IoError("cannot read " + (fs::path(input_dir) / "results.csv").string());
    const auto records = read_results_csv(in, config);
    const auto summaries = summarize(records);

    std::map<std::pair<int, int>, std::vector<InstanceSummary>> groups;
    for (const auto& s : summaries)
        groups[{static_cast<int>(s.instance.algorithm), static_cast<int>(s.instance.variant)}].push_back(s);

    std::vector<InstanceSummary> best;
    std::vector<SensitivityPoint> slices;
    for (const auto& [key, group] : groups) {
        best.push_back(select_best(group));
        const auto slice = sensitivity_slice(group, best.back().instance);
        slices.insert(slices.end(), slice.begin(), slice.end());
        const auto& b = best.back();
        std::cout << algorithm_id(b.instance.algorithm) << ' ' << variant_id(b.instance.variant)
                  << " alpha=" << format_double(b.instance.params.alpha);
        if (b.instance.eta_index >= 0)
            std::cout << " eta=" << format_double(b.instance.params.eta);
        if (b.instance.beta_index >= 0)
            std::cout << " beta=" << format_double(b.instance.params.beta);
        std::cout << " auc=" << b.curve.auc << (b.diverged ? " (all instances diverged)" : "") << '\n';
    }

    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec)
        throw IoError("cannot create " + out_dir + ": " + ec.message());
    {
        auto out = open_output(fs::path(out_dir) / "best_curves.csv");
        write_best_curves_csv(out, best, config);
    }
    {
        auto out = open_output(fs::path(out_dir) / "sensitivity.csv");
        write_sensitivity_csv(out, slices);
    }
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Off-policy TD prediction on the Collision task: full-TD-error vs target-only "
                 "importance-ratio correction.\nExit codes: 0 ok, 1 check failed, 2 invalid "
                 "arguments/config, 3 I/O error."};
    app.require_subcommand(1);

    std::uint64_t check_seed = 0;
    auto* check = app.add_subcommand("check", "Run the oracle and invariant suite (exit 0/1)");
    check->add_option("--seed", check_seed, "Seed for the Monte-Carlo checks");

    CommonOptions run_common;
    RunOptions run_opts;
    auto* run = app.add_subcommand("run", "Run one algorithm instance and print its error series as CSV");
    run_common.attach(run);
    run->add_option("--algorithm", run_opts.algorithm, "td|gtd|gtd2|pgtd2|htd|etd|etdb|vtrace|tb|abtd")
        ->required();
    run->add_option("--variant", run_opts.variant, "full|target")->capture_default_str();
    run->add_option("--alpha", run_opts.alpha, "Primary step size")->capture_default_str();
    run->add_option("--eta", run_opts.eta, "Secondary step-size multiple")->capture_default_str();
    run->add_option("--beta", run_opts.beta, "ETD(lambda,beta) followon decay")->capture_default_str();
    run->add_option("--cbar", run_opts.cbar, "Vtrace clip");
    run->add_option("--run", run_opts.run, "Run index (selects the environment stream)")
        ->capture_default_str();
    run->add_option("--out", run_opts.out, "Output CSV (default stdout)");

    CommonOptions sweep_common;
    std::string sweep_out;
    std::string sweep_algorithms;
    std::optional<int> sweep_runs;
    int threads = 0;
    bool quiet = false;
    auto* sweep = app.add_subcommand("sweep", "Run the full parameter grid");
    sweep_common.attach(sweep);
    sweep->add_option("--out", sweep_out, "Output directory for results.csv and metadata.json")
        ->required();
    sweep->add_option("--algorithms", sweep_algorithms, "Comma list, e.g. td,gtd:full (overrides config)");
    sweep->add_option("--runs", sweep_runs, "Independent runs per instance");
    sweep->add_option("--threads", threads, "Worker threads (0 = hardware concurrency)")
        ->capture_default_str();
    sweep->add_flag("--quiet", quiet, "No progress output");

    std::string curves_in;
    std::string curves_out;
    auto* curves = app.add_subcommand("curves", "Best-instance learning curves and sensitivity slices");
    curves->add_option("--input", curves_in, "Directory written by sweep")->required();
    curves->add_option("--out", curves_out, "Output directory (default: input)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*check)
            return cmd_check(check_seed);
        if (*run)
            return cmd_run(run_common, run_opts);
        if (*sweep)
            return cmd_sweep(sweep_common, sweep_out, threads, sweep_algorithms, sweep_runs, quiet);
        if (*curves)
            return cmd_curves(curves_in, curves_out);
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitIo;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInvalid;
    }
    return kExitInvalid;
}
