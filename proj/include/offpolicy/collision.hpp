#pragma once

#include "offpolicy/types.hpp"

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

namespace offpolicy {

inline constexpr int kNumStates = 8;
inline constexpr int kNumStartStates = 4;
inline constexpr int kNumActions = 2;

// Chain position 1..8, or the absorbing terminal (index 0).
class State {
public:
    static constexpr State terminal() { return State{0}; }

    static State at(int index)
    {
        if (index < 1 || index > kNumStates)
            throw std::out_of_range("state index " + std::to_string(index) + " outside 1..8");
        return State{index};
    }

    constexpr int index() const { return index_; }
    constexpr bool is_terminal() const { return index_ == 0; }

    friend constexpr bool operator==(State, State) = default;

private:
    constexpr explicit State(int index) : index_(index) {}
    int index_;
};

enum class Action : int { Forward = 0, Turnaway = 1 };

inline constexpr std::array<Action, kNumActions> kActions{Action::Forward, Action::Turnaway};

struct StepResult {
    State next;
    double reward;
    bool done;
};

template <class Scalar>
struct Transition {
    State state;
    Action action;
    Scalar reward;
    State next_state;
    bool done;
    Scalar rho;
};

// Deterministic chain dynamics. Turnaway is only defined in states 5..8.
inline StepResult step(State s, Action a)
{
    if (s.is_terminal())
        throw std::logic_error("step from terminal state");
    if (a == Action::Turnaway) {
        if (s.index() <= kNumStartStates)
            throw std::logic_error("turnaway is not available in state " + std::to_string(s.index()));
        return {State::terminal(), 0.0, true};
    }
    if (s.index() == kNumStates)
        return {State::terminal(), 1.0, true};
    return {State::at(s.index() + 1), 0.0, false};
}

// Per-state action distribution over the eight non-terminal states.
template <class Scalar>
class Policy {
public:
    using Table = std::array<std::array<Scalar, kNumActions>, kNumStates>;

    explicit Policy(const Table& table) : table_(table)
    {
        for (const auto& row : table_) {
            Scalar total = 0;
            for (Scalar p : row) {
                if (!(p >= 0 && p <= 1))
                    throw std::invalid_argument("action probability outside [0, 1]");
                total += p;
            }
            if (std::abs(total - Scalar(1)) > Scalar(1e-12))
                throw std::invalid_argument("action probabilities do not sum to 1");
        }
    }

    Scalar prob(State s, Action a) const
    {
        if (s.is_terminal())
            throw std::logic_error("policy queried at terminal state");
        return table_[s.index() - 1][static_cast<int>(a)];
    }

    // Always forward.
    static Policy target()
    {
        Table t{};
        for (auto& row : t)
            row = {Scalar(1), Scalar(0)};
        return Policy(t);
    }

    // Forward in 1..4, coin flip in 5..8.
    static Policy behavior()
    {
        Table t{};
        for (int i = 0; i < kNumStates; ++i)
            t[i] = i < kNumStartStates ? std::array<Scalar, 2>{1, 0}
                                       : std::array<Scalar, 2>{Scalar(0.5), Scalar(0.5)};
        return Policy(t);
    }

    friend bool operator==(const Policy&, const Policy&) = default;

private:
    Table table_;
};

// The Collision task: an eight-state chain that crashes (reward 1) when moving
// forward out of state 8, or ends quietly when turning away in states 5..8.
template <class Scalar>
class CollisionTask {
public:
    using StartDistribution = std::array<Scalar, kNumStartStates>;

    CollisionTask() : CollisionTask(Policy<Scalar>::target(), Policy<Scalar>::behavior()) {}

    CollisionTask(Policy<Scalar> target, Policy<Scalar> behavior,
                  StartDistribution start = {0.25, 0.25, 0.25, 0.25})
        : target_(std::move(target)), behavior_(std::move(behavior)), start_(start)
    {
        Scalar total = 0;
        for (Scalar p : start_) {
            if (!(p >= 0))
                throw std::invalid_argument("negative start probability");
            total += p;
        }
        if (std::abs(total - Scalar(1)) > Scalar(1e-12))
            throw std::invalid_argument("start distribution does not sum to 1");
        for (int i = 1; i <= kNumStates; ++i) {
            State s = State::at(i);
            if (behavior_.prob(s, Action::Turnaway) > 0 && i <= kNumStartStates)
                throw std::invalid_argument("behavior policy may not turn away in states 1..4");
            if (target_.prob(s, Action::Turnaway) > 0 && i <= kNumStartStates)
                throw std::invalid_argument("target policy may not turn away in states 1..4");
        }
    }

    const Policy<Scalar>& target() const { return target_; }
    const Policy<Scalar>& behavior() const { return behavior_; }
    const StartDistribution& start_distribution() const { return start_; }

    Scalar target_prob(State s, Action a) const { return target_.prob(s, a); }
    Scalar behavior_prob(State s, Action a) const { return behavior_.prob(s, a); }

    Scalar rho(State s, Action a) const
    {
        const Scalar b = behavior_prob(s, a);
        if (b <= 0)
            throw std::domain_error("importance ratio undefined: behavior never selects this action");
        return target_prob(s, a) / b;
    }

    // Inverse-CDF draw over states 1..4 from a single engine output.
    template <class URBG>
    State start_state(URBG& rng) const
    {
        const double u = uniform01(rng);
        double cumulative = 0;
        for (int i = 0; i < kNumStartStates - 1; ++i) {
            cumulative += static_cast<double>(start_[i]);
            if (u < cumulative)
                return State::at(i + 1);
        }
        return State::at(kNumStartStates);
    }

    // Consumes exactly one engine draw per call, whatever the state.
    template <class URBG>
    Action sample_behavior_action(State s, URBG& rng) const
    {
        const double u = uniform01(rng);
        return u < static_cast<double>(behavior_prob(s, Action::Forward)) ? Action::Forward
                                                                          : Action::Turnaway;
    }

    Transition<Scalar> transition(State s, Action a) const
    {
        const StepResult r = step(s, a);
        return {s, a, static_cast<Scalar>(r.reward), r.next, r.done, rho(s, a)};
    }

private:
    Policy<Scalar> target_;
    Policy<Scalar> behavior_;
    StartDistribution start_;
};

// Back-to-back episodes under the behavior policy; one call is one environment step.
template <class Scalar, class URBG>
class ExperienceStream {
public:
    ExperienceStream(const CollisionTask<Scalar>& task, URBG rng)
        : task_(&task), rng_(std::move(rng)), state_(task_->start_state(rng_))
    {}

    Transition<Scalar> next()
    {
        const Action a = task_->sample_behavior_action(state_, rng_);
        Transition<Scalar> t = task_->transition(state_, a);
        state_ = t.done ? task_->start_state(rng_) : t.next_state;
        return t;
    }

    State current() const { return state_; }

private:
    const CollisionTask<Scalar>* task_;
    URBG rng_;
    State state_;
};

} // namespace offpolicy
