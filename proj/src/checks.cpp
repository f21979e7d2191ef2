#include "offpolicy/checks.hpp"

#include "offpolicy/algorithms.hpp"
#include "offpolicy/harness.hpp"
#include "offpolicy/oracle.hpp"

#include <cmath>
#include <random>
#include <sstream>

namespace offpolicy {

namespace {

using Task = CollisionTask<double>;
using Map = FeatureMap<double>;

CheckResult check_true_values()
{
    const Task task;
    double worst = 0;
    for (double gamma : {0.5, 0.9, 0.99}) {
        const auto v = true_values(task, gamma);
        for (int s = 1; s <= kNumStates; ++s)
            worst = std::max(worst, std::abs(v(s - 1) - std::pow(gamma, kNumStates - s)));
    }
    std::ostringstream d;
    d << "max |v - gamma^(8-s)| = " << worst;
    return {"true values match closed form", worst <= 1e-10, d.str()};
}

CheckResult check_expected_ratio()
{
    const Task task;
    double worst = 0;
    for (int i = 1; i <= kNumStates; ++i) {
        const State s = State::at(i);
        double total = 0;
        for (Action a : kActions)
            if (task.behavior_prob(s, a) > 0)
                total += task.behavior_prob(s, a) * task.rho(s, a);
        worst = std::max(worst, std::abs(total - 1));
    }
    return {"expected importance ratio is 1", worst == 0, ""};
}

CheckResult check_pdis(std::mt19937_64& rng)
{
    const Task task;
    const double gamma = 0.9;
    const auto v = true_values(task, gamma);
    std::ostringstream d;
    bool ok = true;
    for (int i = 1; i <= kNumStates; ++i) {
        const auto est = mc_pdis_return(task, State::at(i), 20000, gamma, rng);
        const double z = (est.mean - v(i - 1)) / est.standard_error;
        ok = ok && std::abs(z) <= 3;
        d << "s" << i << " z=" << z << ' ';
    }
    return {"PDIS return is unbiased (3 s.e.)", ok, d.str()};
}

CheckResult check_control_variate(std::mt19937_64& rng)
{
    const Task task;
    const auto map = Map::random_binary(6, 3, 42);
    std::normal_distribution<double> normal;
    double worst = 0;
    for (int n = 0; n < 2000; ++n) {
        Vector<double> w(map.dim());
        for (auto& x : w)
            x = normal(rng);
        const State s = State::at(1 + static_cast<int>(rng() % kNumStates));
        const Action a = s.index() > kNumStartStates && (rng() & 1) ? Action::Turnaway : Action::Forward;
        const auto t = task.transition(s, a);
        const double value = w.dot(map.phi(s));
        const double lhs = delta_full(w, t, map, 0.9);
        const double rhs = delta_partial(w, t, map, 0.9) - t.rho * value + value;
        worst = std::max(worst, std::abs(lhs - rhs) / std::max(1.0, std::abs(lhs)));
    }
    std::ostringstream d;
    d << "max relative gap " << worst;
    return {"control-variate identity", worst <= 1e-12, d.str()};
}

CheckResult check_variance(std::mt19937_64& rng)
{
    const Task task;
    const auto map = Map::tabular();
    const double gamma = 0.9;
    const Vector<double> w = true_values(task, gamma);
    std::mt19937_64 rng_target = rng;
    const auto full = variance_probe(task, Variant::FullCorrection, w, map, gamma, 10000, rng);
    const auto partial = variance_probe(task, Variant::TargetOnly, w, map, gamma, 10000, rng_target);
    bool ok = true;
    std::ostringstream d;
    for (int s = 1; s <= kNumStates; ++s) {
        const auto f = full[s - 1].variance;
        const auto p = partial[s - 1].variance;
        if (s <= kNumStartStates) {
            ok = ok && f == p;
        } else {
            const double expected = w(s - 1) * w(s - 1);
            ok = ok && f == 0 && std::abs(p - expected) <= 0.05 * expected;
        }
        d << "s" << s << " full=" << f << " target=" << p << ' ';
    }
    return {"full correction removes TD-error variance at v_pi", ok, d.str()};
}

// Runs two agents over one shared stream and reports whether weights ever differ.
bool same_trajectory(const Task& task, const Map& map, AgentState<double> a, AgentState<double> b,
                     int steps, std::uint64_t seed)
{
    ExperienceStream<double, std::mt19937_64> stream(task, std::mt19937_64(seed));
    for (int t = 0; t < steps; ++t) {
        const auto tr = stream.next();
        update_in_place(a, tr, map);
        update_in_place(b, tr, map);
        if (a.w != b.w || a.v != b.v)
            return false;
    }
    return true;
}

CheckResult check_on_policy(std::uint64_t seed)
{
    const Task on_policy(Policy<double>::target(), Policy<double>::target());
    const auto map = Map::random_binary(6, 3, 42);
    Hyperparams<double> p;
    p.alpha = 0.05;
    p.eta = 0.5;
    p.beta = 0.4;
    bool ok = true;
    std::ostringstream d;
    for (Algorithm alg : kAlgorithms) {
        const bool same = same_trajectory(on_policy, map, make_agent(alg, Variant::FullCorrection, p, 6),
                                          make_agent(alg, Variant::TargetOnly, p, 6), 2000, seed);
        if (!same)
            d << algorithm_id(alg) << " differs ";
        ok = ok && same;
    }
    return {"on-policy stream: variants coincide", ok, d.str()};
}

CheckResult check_vtrace(std::uint64_t seed)
{
    const Task task;
    const auto map = Map::random_binary(6, 3, 42);
    Hyperparams<double> p;
    p.alpha = 0.05;
    p.cbar = 4;
    bool ok = true;
    for (Variant v : kVariants)
        ok = ok && same_trajectory(task, map, make_agent(Algorithm::Vtrace, v, p, 6),
                                   make_agent(Algorithm::TD, v, p, 6), 2000, seed);
    return {"Vtrace with cbar >= 2 equals off-policy TD", ok, ""};
}

CheckResult check_emphatic(std::uint64_t seed)
{
    const Task task;
    const auto map = Map::random_binary(6, 3, 42);
    Hyperparams<double> p;
    p.alpha = 0.01;
    p.beta = p.gamma;
    bool ok = true;
    for (Variant v : kVariants)
        ok = ok && same_trajectory(task, map, make_agent(Algorithm::ETD, v, p, 6),
                                   make_agent(Algorithm::ETDBeta, v, p, 6), 2000, seed);

    auto agent = make_agent(Algorithm::ETD, Variant::FullCorrection, p, 6);
    ExperienceStream<double, std::mt19937_64> stream(task, std::mt19937_64(seed));
    for (int t = 0; t < 2000; ++t) {
        update_in_place(agent, stream.next(), map);
        ok = ok && (agent.followon >= 1 || agent.followon == 0);
    }
    return {"ETD(beta = gamma) equals ETD, followon >= 1", ok, ""};
}

} // namespace

std::vector<CheckResult> run_checks(std::uint64_t seed)
{
    std::mt19937_64 rng(mix64(seed));
    std::vector<CheckResult> out;
    out.push_back(check_true_values());
    out.push_back(check_expected_ratio());
    out.push_back(check_pdis(rng));
    out.push_back(check_control_variate(rng));
    out.push_back(check_variance(rng));
    out.push_back(check_on_policy(mix64(seed + 1)));
    out.push_back(check_vtrace(mix64(seed + 2)));
    out.push_back(check_emphatic(mix64(seed + 3)));
    return out;
}

} // namespace offpolicy
