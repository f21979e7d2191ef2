#include "offpolicy/oracle.hpp"

#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <random>

using namespace offpolicy;

namespace {

const CollisionTask<double> kTask;

double closed_form_value(double gamma, int s) { return std::pow(gamma, kNumStates - s); }

// Expected visits per episode: uniform starts give s/4 below state 5, then the
// coin flip halves the flow each step.
double closed_form_visits(int s) { return s <= 4 ? s / 4.0 : std::ldexp(1.0, 5 - s); }

} // namespace

TEST(TrueValues, MatchClosedForm)
{
    for (double gamma : {0.5, 0.9, 0.99}) {
        const auto v = true_values(kTask, gamma);
        for (int s = 1; s <= kNumStates; ++s)
            EXPECT_NEAR(v(s - 1), closed_form_value(gamma, s), 1e-10) << "gamma " << gamma << " s " << s;
    }
}

TEST(TrueValues, Examples)
{
    const auto v = true_values(kTask, 0.9);
    EXPECT_DOUBLE_EQ(v(7), 1.0);
    EXPECT_DOUBLE_EQ(v(6), 0.9);
    EXPECT_NEAR(v(0), 0.4782969, 1e-12);
    EXPECT_THROW(true_values(kTask, 1.0), std::invalid_argument);
}

TEST(VisitDistribution, AnalyticValues)
{
    const auto d = visit_distribution(kTask);
    EXPECT_NEAR(d(4), 1 / 4.375, 1e-15);
    EXPECT_NEAR(d(7), 0.125 / 4.375, 1e-15);
    EXPECT_NEAR(d(4), 0.228571, 1e-6);
    EXPECT_NEAR(d(7), 0.028571, 1e-6);
    EXPECT_NEAR(d.sum(), 1.0, 1e-15);
    EXPECT_TRUE((d.array() >= 0).all());
    for (int s = 1; s <= kNumStates; ++s)
        EXPECT_NEAR(d(s - 1), closed_form_visits(s) / 4.375, 1e-15);
}

TEST(VisitDistribution, MatchesMillionStepSimulation)
{
    ExperienceStream<double, std::mt19937_64> stream(kTask, std::mt19937_64(2024));
    std::array<double, kNumStates> current{}, sum{}, sum_sq{};
    long episodes = 0;
    for (int t = 0; t < 1000000; ++t) {
        const auto tr = stream.next();
        current[tr.state.index() - 1] += 1;
        if (tr.done) {
            ++episodes;
            for (int i = 0; i < kNumStates; ++i) {
                sum[i] += current[i];
                sum_sq[i] += current[i] * current[i];
                current[i] = 0;
            }
        }
    }
    const auto d = visit_distribution(kTask);
    const double total_visits = 4.375;
    for (int i = 0; i < kNumStates; ++i) {
        const double mean = sum[i] / episodes;
        const double var = (sum_sq[i] - episodes * mean * mean) / (episodes - 1);
        const double se = std::sqrt(var / episodes);
        const double expected = d(i) * total_visits;
        if (se == 0)
            EXPECT_DOUBLE_EQ(mean, expected) << "state " << i + 1;
        else
            EXPECT_LE(std::abs(mean - expected), 3 * se) << "state " << i + 1;
    }
}

TEST(Rmsve, ZeroWeightsAgainstClosedForms)
{
    const auto map = FeatureMap<double>::random_binary(6, 3, 42);
    const auto truth = make_ground_truth(kTask, 0.9);
    double expected = 0;
    for (int s = 1; s <= kNumStates; ++s)
        expected += closed_form_visits(s) / 4.375 * closed_form_value(0.9, s) * closed_form_value(0.9, s);
    EXPECT_NEAR(rmsve(Vector<double>::Zero(6), map, truth), std::sqrt(expected), 1e-12);
}

TEST(Rmsve, ExactRepresentationAndHomogeneity)
{
    const auto map = FeatureMap<double>::tabular();
    const auto truth = make_ground_truth(kTask, 0.9);
    const Vector<double> w = truth.v_pi;
    EXPECT_EQ(rmsve(w, map, truth), 0.0);

    Vector<double> offset(8);
    offset << 0.3, -0.1, 0.2, 0.05, -0.4, 0.1, 0.0, 0.25;
    const double once = rmsve(Vector<double>(w + offset), map, truth);
    const double twice = rmsve(Vector<double>(w + 2 * offset), map, truth);
    EXPECT_NEAR(twice, 2 * once, 1e-14);

    EXPECT_THROW(rmsve(Vector<double>::Zero(6), map, truth), std::invalid_argument);
}

TEST(Rmsve, UniformWeighting)
{
    const auto map = FeatureMap<double>::tabular();
    const auto truth = make_ground_truth(kTask, 0.9, ErrorWeighting::Uniform);
    double expected = 0;
    for (int s = 1; s <= kNumStates; ++s)
        expected += closed_form_value(0.9, s) * closed_form_value(0.9, s) / 8;
    EXPECT_NEAR(rmsve(Vector<double>::Zero(8), map, truth), std::sqrt(expected), 1e-12);
}

TEST(PdisReturn, LastStateOutcomes)
{
    std::mt19937_64 rng(3);
    bool saw_zero = false, saw_two = false;
    for (int i = 0; i < 200; ++i) {
        const double g = mc_pdis_return(kTask, State::at(8), 1, 0.9, rng).mean;
        EXPECT_TRUE(g == 0.0 || g == 2.0);
        saw_zero = saw_zero || g == 0.0;
        saw_two = saw_two || g == 2.0;
    }
    EXPECT_TRUE(saw_zero && saw_two);
    const auto est = mc_pdis_return(kTask, State::at(8), 100000, 0.9, rng);
    EXPECT_LE(std::abs(est.mean - 1.0), 3 * est.standard_error);
}

TEST(PdisReturn, StateFourWithinThreeStandardErrors)
{
    std::mt19937_64 rng(4);
    const auto est = mc_pdis_return(kTask, State::at(4), 100000, 0.9, rng);
    EXPECT_NEAR(closed_form_value(0.9, 4), 0.6561, 1e-12);
    EXPECT_LE(std::abs(est.mean - 0.6561), 3 * est.standard_error);
}

TEST(PdisReturn, OnPolicyIsDeterministic)
{
    const CollisionTask<double> on_policy(Policy<double>::target(), Policy<double>::target());
    std::mt19937_64 rng(5);
    const auto est = mc_pdis_return(on_policy, State::at(1), 1000, 0.9, rng);
    EXPECT_EQ(est.standard_error, 0.0);
    EXPECT_NEAR(est.mean, std::pow(0.9, 7), 1e-15);
}

TEST(PdisReturn, UnbiasedFromEveryState)
{
    std::mt19937_64 rng(6);
    for (int s = 1; s <= kNumStates; ++s) {
        const auto est = mc_pdis_return(kTask, State::at(s), 50000, 0.9, rng);
        EXPECT_LE(std::abs(est.mean - closed_form_value(0.9, s)), 3 * est.standard_error) << "state " << s;
    }
}

TEST(PdisReturn, Preconditions)
{
    std::mt19937_64 rng(7);
    EXPECT_THROW(mc_pdis_return(kTask, State::at(1), 0, 0.9, rng), std::invalid_argument);
    EXPECT_THROW(mc_pdis_return(kTask, State::terminal(), 10, 0.9, rng), std::invalid_argument);
    EXPECT_TRUE(std::isnan(mc_pdis_return(kTask, State::at(1), 1, 0.9, rng).standard_error));
}
