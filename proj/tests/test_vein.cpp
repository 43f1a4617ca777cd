#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "marblesim/analysis.hpp"
#include "marblesim/rbessel.hpp"
#include "marblesim/vein.hpp"

using namespace marblesim;

namespace {

std::vector<double> vein_gaps(const RateFunction& rate, double t, double dt, int n, std::uint64_t seed) {
    auto grid = TimeGrid::with_max_step(0.0, t, dt);
    std::vector<double> out;
    for (int i = 0; i < n; ++i) {
        RngStream rng(seed, i, StreamTag::Vein);
        out.push_back(simulate_vein_endpoint(rate, {}, grid, rng).state.gap());
    }
    return out;
}

}  // namespace

TEST(Vein, OrderingAlongEveryPath) {
    auto grid = TimeGrid::span(0.0, 1.0, 1000);
    auto rate = RateFunction::truncated_power_law(3.0, 256.0);
    for (int i = 0; i < 100; ++i) {
        RngStream rng(1, i, StreamTag::Vein);
        auto p = simulate_vein(rate, {-0.1, 0.0, 0.2}, grid, rng);
        ASSERT_EQ(p.L.size(), grid.size());
        EXPECT_EQ(p.L[0], -0.1);
        EXPECT_EQ(p.U[0], 0.2);
        for (std::size_t k = 0; k < grid.size(); ++k) {
            ASSERT_LE(p.L[k], p.C[k]);
            ASSERT_LE(p.C[k], p.U[k]);
        }
        EXPECT_EQ(p.jump_times.size(), p.jump_positions.size());
        for (std::size_t j = 1; j < p.jump_times.size(); ++j) EXPECT_LT(p.jump_times[j - 1], p.jump_times[j]);
    }
}

TEST(Vein, ZeroRateGapIsBesselThree) {
    auto g = vein_gaps(RateFunction::constant(0.0), 1.0, 0.05, 100000, 2);
    double s = 0.0;
    for (double v : g) s += v * v / 2.0;
    EXPECT_NEAR(s / g.size(), 3.0, 0.06);
}

TEST(Vein, ConstantRateJumpCount) {
    auto grid = TimeGrid::span(0.0, 1.0, 20);
    const int n = 20000;
    double s = 0.0;
    for (int i = 0; i < n; ++i) {
        RngStream rng(3, i, StreamTag::Vein);
        s += static_cast<double>(simulate_vein_endpoint(RateFunction::constant(1.5), {}, grid, rng).n_jumps);
    }
    EXPECT_NEAR(s / n, 1.5, 3.0 * std::sqrt(1.5 / n));
}

TEST(Vein, DisorderedStartRejected) {
    RngStream rng(1, 0);
    auto grid = TimeGrid::span(0.0, 1.0, 10);
    EXPECT_THROW(simulate_vein(RateFunction::constant(0.0), {0.1, 0.0, 0.2}, grid, rng), std::invalid_argument);
    EXPECT_THROW(simulate_vein(RateFunction::power_law(3.0), {}, grid, rng), std::invalid_argument);
}

TEST(Uniformity, TruncatedRate) {
    auto grid = TimeGrid::span(0.0, 1.0, 1000);
    auto rate = RateFunction::truncated_power_law(3.0, 1024.0);
    std::vector<VeinState> st;
    for (int i = 0; i < 10000; ++i) {
        RngStream rng(4, i, StreamTag::Vein);
        st.push_back(simulate_vein_endpoint(rate, {}, grid, rng).state);
    }
    auto rep = uniformity_check(st);
    EXPECT_TRUE(rep.ks.pass) << rep.ks.statistic;
    EXPECT_LT(std::fabs(rep.correlation), 0.05);
}

TEST(Uniformity, ZeroRate) {
    auto grid = TimeGrid::span(0.0, 1.0, 20);
    std::vector<VeinState> st;
    for (int i = 0; i < 10000; ++i) {
        RngStream rng(5, i, StreamTag::Vein);
        st.push_back(simulate_vein_endpoint(RateFunction::constant(0.0), {}, grid, rng).state);
    }
    auto rep = uniformity_check(st);
    EXPECT_TRUE(rep.ks.pass) << rep.ks.statistic;
    EXPECT_LT(std::fabs(rep.correlation), 0.05);
}

TEST(Uniformity, SingleSampleAndDegenerate) {
    std::vector<VeinState> one{{0.0, 0.3, 1.0}};
    EXPECT_NEAR(uniformity_check(one).ks.statistic, 0.7, 1e-15);
    std::vector<VeinState> flat{{0.0, 0.0, 0.0}, {1.0, 1.0, 1.0}};
    EXPECT_THROW(uniformity_check(flat), std::invalid_argument);
}

TEST(BubbleAtPoint, StructureAndRecentring) {
    auto rate = RateFunction::truncated_power_law(3.0, 256.0);
    for (int i = 0; i < 200; ++i) {
        RngStream rng(6, i, StreamTag::Vein);
        auto [path, b] = bubble_at_point(rate, 1.0, 0.4, 1e-3, rng);
        EXPECT_DOUBLE_EQ(path.C.back(), 0.4);
        ASSERT_TRUE(path.continuation);
        const auto& c = *path.continuation;
        EXPECT_EQ(c.L.front(), path.L.back());
        EXPECT_EQ(c.U.front(), path.U.back());
        EXPECT_EQ(c.tau, c.times.back());
        EXPECT_LT(b.sigma, 1.0);
        EXPECT_GT(b.tau, 1.0);
        EXPECT_LE(b.tau, 5.0);
        EXPECT_TRUE(b.contains(1.0, 0.4));
        EXPECT_EQ(b.height_at(b.sigma), 0.0);
        if (!b.censored && b.death == DeathKind::Coalesced) EXPECT_NEAR(b.height_at(b.tau), 0.0, 1e-12);
        for (std::size_t k = 0; k < b.times.size(); ++k) EXPECT_LE(b.lower[k], b.upper[k]);
    }
}

TEST(BubbleAtPoint, ZeroRateBubbleBornAtZero) {
    for (int i = 0; i < 200; ++i) {
        RngStream rng(7, i, StreamTag::Vein);
        auto [path, b] = bubble_at_point(RateFunction::constant(0.0), 0.5, 0.0, 1e-2, rng);
        EXPECT_EQ(b.sigma, 0.0);
        EXPECT_TRUE(path.jump_times.empty());
        if (!b.censored) EXPECT_EQ(b.death, DeathKind::Coalesced);
    }
    RngStream rng(1, 0);
    EXPECT_THROW(bubble_at_point(RateFunction::constant(0.0), 0.0, 0.0, 1e-2, rng), std::invalid_argument);
}

TEST(Conditioned, ZeroRateIsChiSquareThree) {
    std::vector<ConditionedSample> s;
    for (double g : vein_gaps(RateFunction::constant(0.0), 1.0, 0.05, 10000, 8)) s.push_back({g, 0.0, 1.0});
    auto c = conditioned_bessel_check(s, 0.0);
    EXPECT_DOUBLE_EQ(c.meta["shape"].get<double>(), 1.5);
    EXPECT_TRUE(c.pass) << c.statistic;
    EXPECT_THROW(conditioned_bessel_check(s, 6.0), std::invalid_argument);
}

TEST(Conditioned, ShapeAtLambdaThree) {
    std::vector<ConditionedSample> s{{1.0, 0.2, 1.0}};
    auto c = conditioned_bessel_check(s, 3.0);
    EXPECT_NEAR(c.meta["shape"].get<double>(), 2.151388, 1e-6);
}

// The vein gap over sqrt(2) is the R-Bessel process.
TEST(Vein, GapMatchesRBessel) {
    const int n = 5000;
    auto rate = RateFunction::truncated_power_law(3.0, 256.0);
    for (double t : {0.25, 1.0}) {
        auto g = vein_gaps(rate, t, 1e-3, n, 9);
        std::vector<double> x;
        for (int i = 0; i < n; ++i) {
            RngStream rng(9, i, StreamTag::Bessel);
            x.push_back(std::sqrt(2.0) * simulate_rbessel_endpoint(rate, 0.0, t, rng).x_t);
        }
        EXPECT_LT(ks_two_sample(g, x), 2.0 * ks_threshold(n)) << "t " << t;
    }
}

TEST(Vein, SubcriticalMediansStabilise) {
    const int n = 4000;
    double m1 = median(vein_gaps(RateFunction::truncated_power_law(3.0, 1024.0), 1.0, 1e-2, n, 10));
    double m2 = median(vein_gaps(RateFunction::truncated_power_law(3.0, 4096.0), 1.0, 1e-2, n, 11));
    EXPECT_GT(m2 / m1, 0.8);
    EXPECT_LT(m2 / m1, 1.2);
}

TEST(Vein, SupercriticalMediansShrink) {
    const int n = 4000;
    double prev = INFINITY;
    for (double lvl : {64.0, 256.0, 1024.0}) {
        double m = median(vein_gaps(RateFunction::truncated_power_law(8.0, lvl), 1.0, 1e-2, n, 12));
        EXPECT_LT(m, prev) << lvl;
        prev = m;
    }
}

TEST(Vein, SelfSimilarUnderRescaledTruncation) {
    const int n = 5000;
    auto a = vein_gaps(RateFunction::truncated_power_law(3.0, 256.0), 1.0, 1e-2, n, 13);
    auto b = vein_gaps(RateFunction::truncated_power_law(3.0, 64.0), 4.0, 4e-2, n, 14);
    for (double& v : b) v /= 2.0;
    EXPECT_LT(ks_two_sample(a, b), 2.0 * ks_threshold(n));
}
