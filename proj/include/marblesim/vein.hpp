#pragma once

#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "marblesim/analysis.hpp"
#include "marblesim/bubble.hpp"
#include "marblesim/rate.hpp"
#include "marblesim/rng.hpp"
#include "marblesim/stochastics.hpp"

namespace marblesim {

struct VeinState {
    double L = 0.0;
    double C = 0.0;
    double U = 0.0;

    double gap() const { return U - L; }
};

struct VeinContinuation {
    std::vector<double> times;  // starts at the query time, ends at tau
    std::vector<double> L;
    std::vector<double> U;
    double tau = 0.0;
    DeathKind death = DeathKind::Coalesced;
    bool censored = false;
};

struct VeinPath {
    TimeGrid grid;
    std::vector<double> L, C, U;
    std::vector<double> jump_times;
    std::vector<double> jump_positions;  // C at each jump
    std::optional<VeinContinuation> continuation;

    VeinState at(std::size_t k) const { return {L[k], C[k], U[k]}; }
    VeinState final_state() const { return at(L.size() - 1); }
};

// Horizon-only summary of a vein run.
struct VeinEndpoint {
    VeinState state;
    double sigma = 0.0;
    std::size_t n_jumps = 0;
};

VeinPath simulate_vein(const RateFunction& rate, VeinState start, const TimeGrid& grid, RngStream& rng);

// Same dynamics as simulate_vein without storing the grid values.
VeinEndpoint simulate_vein_endpoint(const RateFunction& rate, VeinState start, const TimeGrid& grid, RngStream& rng);

struct ContinuationOptions {
    double max_duration = 4.0;  // censor after this much time past t (in units of t)
    double dt = 0.0;            // 0: reuse the main grid step
};

// Vein to z = (t, x) with its continuation, and the bubble containing z.
std::pair<VeinPath, Bubble> bubble_at_point(const RateFunction& rate, double t, double x, double dt, RngStream& rng,
                                            ContinuationOptions opts = {});

struct UniformityReport {
    Check ks;
    double correlation = 0.0;
    std::size_t used = 0;
};

// (C-L)/(U-L) against Uniform(0,1) over states with U > L.
UniformityReport uniformity_check(std::span<const VeinState> states);

struct ConditionedSample {
    double gap = 0.0;  // U_t - L_t
    double sigma = 0.0;
    double t = 0.0;
};

// X_t^2/(2(t-sigma)) with X = gap/sqrt(2) against Gamma(alpha/2+1).
Check conditioned_bessel_check(std::span<const ConditionedSample> samples, double lambda);

}  // namespace marblesim
