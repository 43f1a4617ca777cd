#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "marblesim/branching.hpp"

using namespace marblesim;

TEST(Population, ZeroRateSurvivalMatchesReflection) {
    auto grid = TimeGrid::span(0.0, 0.25, 25);
    const int n = 20000;
    int alive = 0;
    for (int i = 0; i < n; ++i) {
        RngStream rng(1, i, StreamTag::Population);
        auto r = simulate_population(RateFunction::constant(0.0), 2, {1.0}, grid, rng);
        alive += r.final_state.particles.empty() ? 0 : 1;
    }
    double p = std::erf(1.0);
    EXPECT_NEAR(static_cast<double>(alive) / n, p, 3.0 * std::sqrt(p * (1.0 - p) / n));
}

TEST(Population, SplitsConserveMassExactly) {
    auto grid = TimeGrid::span(0.0, 1.0, 100);
    PopulationOptions o;
    o.record_splits = true;
    o.record_states = true;
    std::size_t total = 0;
    for (int i = 0; i < 200; ++i) {
        RngStream rng(2, i, StreamTag::Population);
        auto r = simulate_population(RateFunction::constant(2.0), 3, {1.0}, grid, rng, o);
        EXPECT_EQ(r.splits.size(), r.n_splits);
        for (const auto& s : r.splits) EXPECT_EQ(s.mass_before, s.mass_after);
        total += r.n_splits;
        ASSERT_EQ(r.series.size(), grid.size());
        ASSERT_EQ(r.states.size(), grid.size());
        for (std::size_t k = 0; k < grid.size(); ++k) {
            EXPECT_EQ(r.series[k].n_alive, r.states[k].particles.size());
            for (const auto& p : r.states[k].particles) EXPECT_GT(p.mass, 0.0);
        }
    }
    EXPECT_GT(total, 100u);
}

TEST(Population, ExpectedMassIsConserved) {
    auto grid = TimeGrid::span(0.0, 1.0, 100);
    const int n = 100000;
    double s = 0.0, s2 = 0.0;
    for (int i = 0; i < n; ++i) {
        RngStream rng(3, i, StreamTag::Population);
        double m = simulate_population(RateFunction::constant(1.0), 2, {1.0}, grid, rng).final_state.total_mass();
        s += m;
        s2 += m * m;
    }
    double mean = s / n, se = std::sqrt((s2 / n - mean * mean) / n);
    EXPECT_NEAR(mean, 1.0, 3.0 * se);
}

TEST(Population, EmptyIsAbsorbingAndCapFlags) {
    auto grid = TimeGrid::span(0.0, 2.0, 200);
    RngStream rng(4, 0, StreamTag::Population);
    auto r = simulate_population(RateFunction::constant(0.0), 2, {0.01}, grid, rng);
    bool empty = false;
    for (const auto& s : r.series) {
        if (empty) EXPECT_EQ(s.n_alive, 0u);
        empty = empty || s.n_alive == 0;
    }
    EXPECT_TRUE(empty);

    PopulationOptions o;
    o.cap = 5;
    RngStream rng2(4, 1, StreamTag::Population);
    auto big = simulate_population(RateFunction::constant(50.0), 4, {10.0}, grid, rng2, o);
    EXPECT_TRUE(big.aborted);
}

TEST(Population, Errors) {
    RngStream rng(1, 0);
    auto grid = TimeGrid::span(0.0, 1.0, 10);
    auto r = RateFunction::constant(1.0);
    EXPECT_THROW(simulate_population(r, 1, {1.0}, grid, rng), std::invalid_argument);
    EXPECT_THROW(simulate_population(r, 2, {0.0}, grid, rng), std::invalid_argument);
    EXPECT_THROW(simulate_population(RateFunction::power_law(1.0), 2, {1.0}, grid, rng), std::invalid_argument);
}

TEST(Spine, ZeroRateSecondMoment) {
    const int n = 100000;
    double s = 0.0;
    for (int i = 0; i < n; ++i) {
        RngStream rng(5, i, StreamTag::Spine);
        double x = spine_endpoint(RateFunction::constant(0.0), 2, 0.5, 1.0, rng);
        s += x * x;
    }
    EXPECT_NEAR(s / n, 0.25 + 3.0, 0.02 * 3.25);
}

TEST(Spine, JumpsDivideByN) {
    auto grid = TimeGrid::span(0.0, 1.0, 1000);
    for (int i = 0; i < 50; ++i) {
        RngStream rng(6, i, StreamTag::Spine);
        auto p = simulate_spine(RateFunction::constant(3.0), 2, 0.8, grid, rng);
        ASSERT_EQ(p.mass.size(), grid.size());
        EXPECT_EQ(p.mass.front(), 0.8);
        for (double m : p.mass) EXPECT_GT(m, 0.0);
    }
    // a rate that only fires while the mass is at 0.8 or above, and so at most once near t=0
    RateFunction once = RateFunction::table({{0.0, 0.0}, {0.79, 1e9}});
    RngStream rng(7, 0, StreamTag::Spine);
    std::size_t jumps = 0;
    double x = spine_endpoint(once, 2, 0.8, 1e-9, rng, 1.0, &jumps);
    EXPECT_EQ(jumps, 1u);
    EXPECT_NEAR(x, 0.4, 1e-3);
}

TEST(Spine, ConstantRateJumpCount) {
    const int n = 20000;
    double s = 0.0;
    for (int i = 0; i < n; ++i) {
        RngStream rng(8, i, StreamTag::Spine);
        std::size_t k = 0;
        spine_endpoint(RateFunction::constant(2.0), 2, 1.0, 1.0, rng, 1.0, &k);
        s += static_cast<double>(k);
    }
    EXPECT_NEAR(s / n, 2.0, 3.0 * std::sqrt(2.0 / n));
}

TEST(ManyToOne, ZeroHorizonIsExact) {
    ManyToOneOptions o;
    o.replicas = 100;
    auto f = [](double x) { return x * std::exp(-x); };
    auto rep = many_to_one_check(RateFunction::constant(1.0), 2, 0.7, 0.0, f, 1, o);
    EXPECT_DOUBLE_EQ(rep.lhs, f(0.7));
    EXPECT_DOUBLE_EQ(rep.rhs, f(0.7));
    EXPECT_EQ(rep.rel_diff, 0.0);
}

TEST(ManyToOne, SidesAgreeAtModerateSize) {
    ManyToOneOptions o;
    o.replicas = 20000;
    auto rep = many_to_one_check(RateFunction::constant(1.0), 2, 1.0, 1.0, [](double x) { return x * std::exp(-x); },
                                 9, o);
    EXPECT_TRUE(rep.valid);
    EXPECT_LT(std::fabs(rep.z), 3.0);
    EXPECT_LT(std::fabs(rep.mean_total_mass - 1.0), 3.0 * rep.total_mass_se);
}

TEST(ManyToOne, Errors) {
    auto f = [](double x) { return x; };
    EXPECT_THROW(many_to_one_check(RateFunction::constant(1.0), 2, 0.0, 1.0, f, 1), std::invalid_argument);
    EXPECT_THROW(many_to_one_check(RateFunction::constant(1.0), 2, 1.0, -1.0, f, 1), std::invalid_argument);
}
