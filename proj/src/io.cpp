#include "offpolicy/io.hpp"

#include <json.hpp>

#include <charconv>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <tuple>

#ifndef OFFPOLICY_VERSION
#define OFFPOLICY_VERSION "unknown"
#endif

namespace offpolicy {

using nlohmann::json;

std::string_view code_version() { return OFFPOLICY_VERSION; }

std::string format_double(double value)
{
    char buf[64];
    const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
    if (ec != std::errc{})
        throw std::runtime_error("could not format double");
    return std::string(buf, end);
}

namespace {

double parse_double(std::string_view text, std::string_view column)
{
    double value = 0;
    const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || end != text.data() + text.size())
        throw std::invalid_argument("column '" + std::string(column) + "': bad number '" +
                                    std::string(text) + "'");
    return value;
}

long long parse_int(std::string_view text, std::string_view column)
{
    long long value = 0;
    const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || end != text.data() + text.size())
        throw std::invalid_argument("column '" + std::string(column) + "': bad integer '" +
                                    std::string(text) + "'");
    return value;
}

std::vector<std::string_view> split(std::string_view line, char sep)
{
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(sep, start);
        out.push_back(line.substr(start, pos - start));
        if (pos == std::string_view::npos)
            break;
        start = pos + 1;
    }
    return out;
}

void reject_unknown(const json& obj, std::initializer_list<std::string_view> known, std::string_view where)
{
    for (const auto& [key, _] : obj.items()) {
        bool found = false;
        for (auto k : known)
            found = found || key == k;
        if (!found)
            throw std::invalid_argument("unknown key '" + key + "' in " + std::string(where));
    }
}

std::vector<double> grid_from(const json& j, std::string_view name)
{
    if (!j.is_array())
        throw std::invalid_argument("'" + std::string(name) + "' must be an array of numbers");
    return j.get<std::vector<double>>();
}

int index_in(const std::vector<double>& grid, double value, std::string_view column)
{
    for (std::size_t i = 0; i < grid.size(); ++i)
        if (grid[i] == value)
            return static_cast<int>(i);
    throw std::invalid_argument("column '" + std::string(column) + "': value " + format_double(value) +
                                " is not on the configured grid");
}

std::string_view optional_field(int index, const std::vector<double>& grid, std::string& buffer)
{
    if (index < 0)
        return {};
    buffer = format_double(grid[index]);
    return buffer;
}

} // namespace

std::vector<AlgorithmVariant> parse_algorithm_list(std::string_view spec)
{
    std::vector<AlgorithmVariant> out;
    for (auto item : split(spec, ',')) {
        if (item.empty())
            continue;
        const auto colon = item.find(':');
        const auto name = item.substr(0, colon);
        const auto algorithm = parse_algorithm(name);
        if (!algorithm)
            throw std::invalid_argument("unknown algorithm '" + std::string(name) + "'");
        if (colon == std::string_view::npos) {
            for (Variant v : kVariants)
                out.push_back({*algorithm, v});
            continue;
        }
        const auto variant = parse_variant(item.substr(colon + 1));
        if (!variant)
            throw std::invalid_argument("unknown variant '" + std::string(item.substr(colon + 1)) +
                                        "' (expected full or target)");
        out.push_back({*algorithm, *variant});
    }
    if (out.empty())
        throw std::invalid_argument("empty algorithm list");
    return out;
}

SweepConfig parse_config(std::string_view json_text)
{
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object())
        throw std::invalid_argument("config must be a JSON object");
    reject_unknown(j,
                   {"algorithms", "alpha_grid", "eta_grid", "beta_grid", "num_steps", "num_runs",
                    "gamma", "features", "record_every", "base_seed", "weighting", "cbar", "zeta",
                    "start_distribution"},
                   "config");

    SweepConfig c;
    try {
        if (j.contains("algorithms")) {
            c.algorithms.clear();
            for (const auto& item : j.at("algorithms")) {
                auto parsed = parse_algorithm_list(item.get<std::string>());
                c.algorithms.insert(c.algorithms.end(), parsed.begin(), parsed.end());
            }
        }
        if (j.contains("alpha_grid"))
            c.alpha_grid = grid_from(j.at("alpha_grid"), "alpha_grid");
        if (j.contains("eta_grid"))
            c.eta_grid = grid_from(j.at("eta_grid"), "eta_grid");
        if (j.contains("beta_grid"))
            c.beta_grid = grid_from(j.at("beta_grid"), "beta_grid");
        if (j.contains("num_steps"))
            c.num_steps = j.at("num_steps").get<int>();
        if (j.contains("num_runs"))
            c.num_runs = j.at("num_runs").get<int>();
        if (j.contains("gamma"))
            c.gamma = j.at("gamma").get<double>();
        if (j.contains("record_every"))
            c.record_every = j.at("record_every").get<int>();
        if (j.contains("base_seed"))
            c.base_seed = j.at("base_seed").get<std::uint64_t>();
        if (j.contains("cbar"))
            c.cbar = j.at("cbar").get<double>();
        if (j.contains("zeta"))
            c.zeta = j.at("zeta").get<double>();
        if (j.contains("start_distribution"))
            c.start_distribution = j.at("start_distribution").get<std::array<double, kNumStartStates>>();
        if (j.contains("weighting")) {
            const auto w = j.at("weighting").get<std::string>();
            if (w == "behavior_visits")
                c.weighting = ErrorWeighting::BehaviorVisits;
            else if (w == "uniform")
                c.weighting = ErrorWeighting::Uniform;
            else
                throw std::invalid_argument("weighting must be behavior_visits or uniform");
        }
        if (j.contains("features")) {
            const auto& f = j.at("features");
            if (!f.is_object())
                throw std::invalid_argument("'features' must be an object");
            reject_unknown(f, {"kind", "dim", "ones_per_state", "seed"}, "features");
            if (f.contains("kind"))
                c.features.kind = parse_feature_kind(f.at("kind").get<std::string>());
            if (c.features.kind == FeatureKind::Tabular) {
                c.features.dim = kNumStates;
                c.features.ones_per_state = 1;
                c.features.seed = 0;
            }
            if (f.contains("dim"))
                c.features.dim = f.at("dim").get<int>();
            if (f.contains("ones_per_state"))
                c.features.ones_per_state = f.at("ones_per_state").get<int>();
            if (f.contains("seed"))
                c.features.seed = f.at("seed").get<std::uint64_t>();
        }
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("config has a value of the wrong type: ") + e.what());
    }
    c.validate();
    return c;
}

SweepConfig load_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open config file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

namespace {

json config_json(const SweepConfig& c)
{
    json algorithms = json::array();
    for (const auto& [a, v] : c.algorithms)
        algorithms.push_back(std::string(algorithm_id(a)) + ":" + std::string(variant_id(v)));
    return json{
        {"algorithms", algorithms},
        {"alpha_grid", c.alpha_grid},
        {"eta_grid", c.eta_grid},
        {"beta_grid", c.beta_grid},
        {"num_steps", c.num_steps},
        {"num_runs", c.num_runs},
        {"gamma", c.gamma},
        {"features",
         {{"kind", feature_kind_name(c.features.kind)},
          {"dim", c.features.dim},
          {"ones_per_state", c.features.ones_per_state},
          {"seed", c.features.seed}}},
        {"record_every", c.record_every},
        {"base_seed", c.base_seed},
        {"weighting", weighting_name(c.weighting)},
        {"cbar", c.cbar},
        {"zeta", c.zeta},
        {"start_distribution", c.start_distribution},
    };
}

} // namespace

std::string config_to_json(const SweepConfig& config) { return config_json(config).dump(2); }

std::string metric_name(ErrorWeighting weighting)
{
    return "rmsve_" + std::string(weighting_name(weighting));
}

void write_results_csv(std::ostream& out, std::span<const RunRecord> records, const SweepConfig& config)
{
    std::vector<const RunRecord*> sorted;
    sorted.reserve(records.size());
    for (const auto& r : records)
        sorted.push_back(&r);
    std::stable_sort(sorted.begin(), sorted.end(), [](const RunRecord* a, const RunRecord* b) {
        if (canonical_less(a->instance, b->instance))
            return true;
        if (canonical_less(b->instance, a->instance))
            return false;
        return a->run < b->run;
    });

    out << kResultsHeader << '\n';
    std::string eta_buf, beta_buf;
    for (const RunRecord* r : sorted) {
        const auto& i = r->instance;
        const std::string prefix = std::string(algorithm_id(i.algorithm)) + ',' +
                                   std::string(variant_id(i.variant)) + ',' +
                                   format_double(i.params.alpha) + ',' +
                                   std::string(optional_field(i.eta_index, config.eta_grid, eta_buf)) +
                                   ',' +
                                   std::string(optional_field(i.beta_index, config.beta_grid, beta_buf)) +
                                   ',' + std::to_string(r->run) + ',';
        const char* diverged = r->diverged ? "1" : "0";
        for (std::size_t k = 0; k < r->errors.size(); ++k)
            out << prefix << k * static_cast<std::size_t>(config.record_every) << ','
                << format_double(r->errors[k]) << ',' << diverged << '\n';
    }
}

std::vector<RunRecord> read_results_csv(std::istream& in, const SweepConfig& config)
{
    std::string line;
    if (!std::getline(in, line))
        throw std::invalid_argument("results file is empty");
    if (!line.empty() && line.back() == '\r')
        line.pop_back();
    if (line != kResultsHeader) {
        const auto expected = split(kResultsHeader, ',');
        const auto got = split(line, ',');
        for (std::size_t c = 0; c < expected.size(); ++c)
            if (c >= got.size() || got[c] != expected[c])
                throw std::invalid_argument("results header: expected column '" +
                                            std::string(expected[c]) + "' at position " +
                                            std::to_string(c + 1));
        throw std::invalid_argument("results header has unexpected extra columns");
    }

    using Key = std::tuple<int, int, int, int, int, int>;
    std::map<Key, RunRecord> runs;
    std::map<Key, std::map<long long, double>> points;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty())
            continue;
        const auto f = split(line, ',');
        if (f.size() != 9)
            throw std::invalid_argument("line " + std::to_string(line_no) + ": expected 9 fields");
        const auto algorithm = parse_algorithm(f[0]);
        if (!algorithm)
            throw std::invalid_argument("column 'algorithm': unknown id '" + std::string(f[0]) + "'");
        const auto variant = parse_variant(f[1]);
        if (!variant)
            throw std::invalid_argument("column 'variant': unknown id '" + std::string(f[1]) + "'");
        const int a = index_in(config.alpha_grid, parse_double(f[2], "alpha"), "alpha");
        const int e = f[3].empty() ? -1 : index_in(config.eta_grid, parse_double(f[3], "eta"), "eta");
        const int b = f[4].empty() ? -1 : index_in(config.beta_grid, parse_double(f[4], "beta"), "beta");
        const int run = static_cast<int>(parse_int(f[5], "run"));
        const long long step = parse_int(f[6], "step");
        const double error = parse_double(f[7], "error");
        const long long diverged = parse_int(f[8], "diverged");

        const Key key{static_cast<int>(*algorithm), static_cast<int>(*variant), a, e, b, run};
        auto [it, inserted] = runs.try_emplace(key);
        if (inserted) {
            it->second.instance = make_instance(config, *algorithm, *variant, a, e, b);
            it->second.run = run;
            it->second.seed = derive_seed(config.base_seed, it->second.instance, run).environment;
        }
        it->second.diverged = it->second.diverged || diverged != 0;
        if (!points[key].emplace(step, error).second)
            throw std::invalid_argument("line " + std::to_string(line_no) + ": duplicate step");
    }

    std::vector<RunRecord> out;
    out.reserve(runs.size());
    for (auto& [key, record] : runs) {
        long long expected = 0;
        for (const auto& [step, error] : points[key]) {
            if (step != expected)
                throw std::invalid_argument("column 'step': series has a gap at step " +
                                            std::to_string(expected));
            record.errors.push_back(error);
            expected += config.record_every;
        }
        out.push_back(std::move(record));
    }
    return out;
}

std::string metadata_json(const SweepConfig& config, const ExperimentContext& context)
{
    json table = json::array();
    for (int s = 1; s <= kNumStates; ++s) {
        const auto x = context.features.phi(State::at(s));
        table.push_back(std::vector<double>(x.data(), x.data() + x.size()));
    }
    json m{
        {"code_version", code_version()},
        {"metric", metric_name(config.weighting)},
        {"gamma", config.gamma},
        {"base_seed", config.base_seed},
        {"lambda", 0},
        {"grids", {{"alpha", config.alpha_grid}, {"eta", config.eta_grid}, {"beta", config.beta_grid}}},
        {"features",
         {{"kind", feature_kind_name(config.features.kind)},
          {"dim", context.features.dim()},
          {"ones_per_state", context.features.ones_per_state()},
          {"seed", context.features.seed()},
          {"table", table}}},
        {"true_values", std::vector<double>(context.truth.v_pi.data(), context.truth.v_pi.data() + kNumStates)},
        {"error_weights",
         std::vector<double>(context.truth.weights.data(), context.truth.weights.data() + kNumStates)},
        {"row_order", "algorithm roster, variant (full, target), alpha/eta/beta grid index, run, step"},
        {"divergence_policy",
         "run flagged when a weight is non-finite or |w^T x(s)| > 1e6; later points repeat the last "
         "finite error; flagged instances are excluded from best-instance selection"},
        {"config", config_json(config)},
    };
    return m.dump(2);
}

SweepConfig config_from_metadata(std::string_view metadata_text)
{
    json m;
    try {
        m = json::parse(metadata_text);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(std::string("metadata is not valid JSON: ") + e.what());
    }
    if (!m.is_object() || !m.contains("config"))
        throw std::invalid_argument("metadata lacks a 'config' object");
    return parse_config(m.at("config").dump());
}

void write_best_curves_csv(std::ostream& out, std::span<const InstanceSummary> best,
                           const SweepConfig& config)
{
    out << kBestCurvesHeader << '\n';
    std::string eta_buf, beta_buf;
    for (const auto& s : best) {
        const auto& i = s.instance;
        for (std::size_t k = 0; k < s.curve.mean.size(); ++k)
            out << algorithm_id(i.algorithm) << ',' << variant_id(i.variant) << ','
                << format_double(i.params.alpha) << ','
                << optional_field(i.eta_index, config.eta_grid, eta_buf) << ','
                << optional_field(i.beta_index, config.beta_grid, beta_buf) << ','
                << k * static_cast<std::size_t>(config.record_every) << ','
                << format_double(s.curve.mean[k]) << ',' << format_double(s.curve.standard_error[k])
                << ',' << format_double(s.curve.auc) << '\n';
    }
}

void write_sensitivity_csv(std::ostream& out, std::span<const SensitivityPoint> points)
{
    out << kSensitivityHeader << '\n';
    for (const auto& p : points) {
        const auto& i = p.instance;
        out << algorithm_id(i.algorithm) << ',' << variant_id(i.variant) << ','
            << format_double(i.params.alpha) << ','
            << (i.eta_index >= 0 ? format_double(i.params.eta) : std::string()) << ','
            << (i.beta_index >= 0 ? format_double(i.params.beta) : std::string()) << ','
            << format_double(p.auc) << ',' << format_double(p.final_error) << ','
            << (p.diverged ? 1 : 0) << '\n';
    }
}

} // namespace offpolicy
