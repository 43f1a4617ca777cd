#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "marblesim/rate.hpp"

using namespace marblesim;

TEST(Rate, TruncatedPowerLawValues) {
    auto r = RateFunction::truncated_power_law(3.0, 64.0);
    EXPECT_DOUBLE_EQ(r(1.0), 3.0);
    EXPECT_DOUBLE_EQ(r(0.1), 64.0);
    EXPECT_DOUBLE_EQ(r(std::sqrt(3.0 / 64.0)), 64.0);
    EXPECT_DOUBLE_EQ(r.bound(), 64.0);
    EXPECT_TRUE(r.bounded());
}

TEST(Rate, MonotoneInGapAndLevel) {
    auto lo = RateFunction::truncated_power_law(3.0, 64.0);
    auto hi = RateFunction::truncated_power_law(3.0, 1024.0);
    double prev = std::numeric_limits<double>::infinity();
    for (double g = 1e-4; g < 20.0; g *= 1.1) {
        double v = lo(g);
        EXPECT_GE(v, 0.0);
        EXPECT_TRUE(std::isfinite(v));
        EXPECT_LE(v, prev);
        EXPECT_LE(v, hi(g));
        EXPECT_LE(v, lo.bound());
        prev = v;
    }
}

TEST(Rate, HalfLambdaCap) {
    auto r = RateFunction::half_lambda_trunc(3.0);
    EXPECT_DOUBLE_EQ(r(0.5), 1.5);
    EXPECT_DOUBLE_EQ(r(2.0), 0.75);
    EXPECT_DOUBLE_EQ(r.bound(), 1.5);
}

TEST(Rate, ConstantAndTable) {
    auto c = RateFunction::constant(2.5);
    EXPECT_DOUBLE_EQ(c(0.01), 2.5);
    EXPECT_DOUBLE_EQ(c(100.0), 2.5);
    auto t = RateFunction::table({{1.0, 2.0}, {0.0, 5.0}, {2.0, 0.5}});
    EXPECT_DOUBLE_EQ(t(0.5), 5.0);
    EXPECT_DOUBLE_EQ(t(1.0), 2.0);
    EXPECT_DOUBLE_EQ(t(3.0), 0.5);
    EXPECT_DOUBLE_EQ(t.bound(), 5.0);
}

TEST(Rate, PowerLawUnboundedUntilTruncated) {
    auto p = RateFunction::power_law(3.0);
    EXPECT_FALSE(p.bounded());
    auto q = p.truncated(256.0);
    EXPECT_EQ(q.kind(), RateFunction::Kind::TruncatedPowerLaw);
    EXPECT_DOUBLE_EQ(q.bound(), 256.0);
    EXPECT_DOUBLE_EQ(q.truncated(1024.0).bound(), 256.0);
    EXPECT_TRUE(RateFunction::power_law(0.0).bounded());
}

TEST(Rate, Errors) {
    EXPECT_THROW(RateFunction::power_law(-1.0), std::invalid_argument);
    EXPECT_THROW(RateFunction::truncated_power_law(3.0, 0.0), std::invalid_argument);
    EXPECT_THROW(RateFunction::constant(-0.1), std::invalid_argument);
    EXPECT_THROW(RateFunction::table({}), std::invalid_argument);
    EXPECT_THROW(RateFunction::table({{0.0, -1.0}}), std::invalid_argument);
}

TEST(Rate, Json) {
    auto j = RateFunction::truncated_power_law(3.0, 64.0).to_json();
    EXPECT_EQ(j["kind"], "truncated_power");
    EXPECT_EQ(j["n"], 64.0);
}
