#pragma once

#include "offpolicy/collision.hpp"
#include "offpolicy/features.hpp"
#include "offpolicy/types.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string_view>
#include <vector>

namespace offpolicy {

enum class ErrorWeighting { BehaviorVisits, Uniform };

inline std::string_view weighting_name(ErrorWeighting w)
{
    return w == ErrorWeighting::BehaviorVisits ? "behavior_visits" : "uniform";
}

// Target-policy values by iterative policy evaluation, sweeping until the
// largest change drops below `tolerance`. Entry i is state i + 1.
template <class Scalar>
Vector<Scalar, kNumStates> true_values(const CollisionTask<Scalar>& task, Scalar gamma,
                                       Scalar tolerance = Scalar(1e-12), int max_sweeps = 100000)
{
    if (!(gamma >= 0 && gamma < 1))
        throw std::invalid_argument("gamma must lie in [0, 1)");

    Vector<Scalar, kNumStates> v = Vector<Scalar, kNumStates>::Zero();
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        Vector<Scalar, kNumStates> next;
        for (int i = 1; i <= kNumStates; ++i) {
            const State s = State::at(i);
            Scalar total = 0;
            for (Action a : kActions) {
                const Scalar p = task.target_prob(s, a);
                if (p == 0)
                    continue;
                const StepResult r = step(s, a);
                const Scalar bootstrap = r.done ? Scalar(0) : v(r.next.index() - 1);
                total += p * (static_cast<Scalar>(r.reward) + gamma * bootstrap);
            }
            next(i - 1) = total;
        }
        const Scalar change = (next - v).cwiseAbs().maxCoeff();
        v = next;
        if (change < tolerance)
            return v;
    }
    throw std::runtime_error("value iteration did not converge");
}

// Expected visits per episode under the behavior policy, normalised.
// visits(s) = start(s) + visits(s - 1) * b(Forward | s - 1).
template <class Scalar>
Vector<Scalar, kNumStates> visit_distribution(const CollisionTask<Scalar>& task)
{
    Vector<Scalar, kNumStates> visits;
    Scalar carried = 0;
    for (int i = 1; i <= kNumStates; ++i) {
        const Scalar start = i <= kNumStartStates ? task.start_distribution()[i - 1] : Scalar(0);
        visits(i - 1) = start + carried;
        carried = visits(i - 1) * task.behavior_prob(State::at(i), Action::Forward);
    }
    return visits / visits.sum();
}

template <class Scalar>
struct GroundTruth {
    Scalar gamma;
    Vector<Scalar, kNumStates> v_pi;
    Vector<Scalar, kNumStates> d_b;
    // Weights used by rmsve: d_b or uniform.
    Vector<Scalar, kNumStates> weights;
    ErrorWeighting weighting;
};

template <class Scalar>
GroundTruth<Scalar> make_ground_truth(const CollisionTask<Scalar>& task, Scalar gamma,
                                      ErrorWeighting weighting = ErrorWeighting::BehaviorVisits)
{
    GroundTruth<Scalar> g{gamma, true_values(task, gamma), visit_distribution(task), {}, weighting};
    g.weights = weighting == ErrorWeighting::BehaviorVisits
                    ? g.d_b
                    : Vector<Scalar, kNumStates>::Constant(Scalar(1) / kNumStates);
    return g;
}

template <class Derived>
typename Derived::Scalar rmsve(const Eigen::MatrixBase<Derived>& w,
                               const FeatureMap<typename Derived::Scalar>& map,
                               const GroundTruth<typename Derived::Scalar>& truth)
{
    if (w.size() != map.dim())
        throw std::invalid_argument("weight dimension does not match feature map");
    using Scalar = typename Derived::Scalar;
    const Vector<Scalar, kNumStates> err = map.state_features().transpose() * w - truth.v_pi;
    return std::sqrt((truth.weights.array() * err.array().square()).sum());
}

template <class Scalar>
struct MonteCarloEstimate {
    Scalar mean;
    Scalar standard_error; // NaN for a single episode
};

// Mean of the recursive per-decision importance-sampled return
//   G_t = rho_t (R_{t+1} + gamma G_{t+1})
// over behavior-policy episodes started in `s`.
template <class Scalar, class URBG>
MonteCarloEstimate<Scalar> mc_pdis_return(const CollisionTask<Scalar>& task, State s,
                                          int num_episodes, Scalar gamma, URBG& rng)
{
    if (num_episodes < 1)
        throw std::invalid_argument("need at least one episode");
    if (s.is_terminal())
        throw std::invalid_argument("episodes cannot start at the terminal state");

    std::vector<Transition<Scalar>> episode;
    episode.reserve(kNumStates);
    Scalar mean = 0;
    Scalar m2 = 0;
    for (int n = 1; n <= num_episodes; ++n) {
        episode.clear();
        State cur = s;
        bool done = false;
        while (!done) {
            episode.push_back(task.transition(cur, task.sample_behavior_action(cur, rng)));
            done = episode.back().done;
            cur = episode.back().next_state;
        }
        Scalar g = 0;
        for (auto it = episode.rbegin(); it != episode.rend(); ++it)
            g = it->rho * (it->reward + gamma * g);

        const Scalar diff = g - mean;
        mean += diff / n;
        m2 += diff * (g - mean);
    }
    const Scalar se = num_episodes > 1
                          ? std::sqrt(m2 / (num_episodes - 1) / num_episodes)
                          : std::numeric_limits<Scalar>::quiet_NaN();
    return {mean, se};
}

} // namespace offpolicy
