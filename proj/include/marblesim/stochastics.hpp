#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "marblesim/rng.hpp"

namespace marblesim {

struct TimeGrid {
    double t0 = 0.0;
    double dt = 0.0;
    std::size_t n_steps = 0;

    TimeGrid() = default;
    TimeGrid(double t0_, double dt_, std::size_t n_steps_);

    // Grid on [t0,t1] with n_steps equal steps.
    static TimeGrid span(double t0, double t1, std::size_t n_steps);
    // Grid on [t0,t1] with step at most dt_max.
    static TimeGrid with_max_step(double t0, double t1, double dt_max);

    double t1() const { return t0 + static_cast<double>(n_steps) * dt; }
    double time(std::size_t k) const { return t0 + static_cast<double>(k) * dt; }
    std::size_t size() const { return n_steps + 1; }
};

// Normal(0, diffusivity*dt).
double gaussian_increment(RngStream& rng, double dt, double diffusivity = 1.0);

// Squared Bessel transition of dimension dim over dt starting from the squared
// position x0, via the Poisson-Gamma mixture of the noncentral chi-square law.
double squared_bessel_transition(double x0, double dim, double dt, RngStream& rng);

// Exact Bessel-3 step of the position x over h.
double bessel3_step(double x, double h, RngStream& rng);

// D[k] = W[k] + max(0, max_{j<=k} -W[j]).
std::vector<double> skorokhod_reflect(std::span<const double> driver, double start_gap);

// Same map driven by per-step path minima: running_min[k] is the minimum of the
// driver over step k (between W[k-1] and W[k]); running_min[0] is ignored.
std::vector<double> skorokhod_reflect_with_minima(std::span<const double> driver,
                                                  std::span<const double> step_minima);

// Minimum of a Brownian bridge of variance rate `var` over time h, going from 0
// to delta, sampled exactly by inverting the bridge minimum law.
double bridge_minimum(double delta, double var, double h, RngStream& rng);

// Probability that two boundaries with gaps g0 > 0 and g1 > 0 at the ends of a
// step of length h touched in between, for a gap with variance rate `var`.
double bridge_crossing_probability(double g0, double g1, double var, double h);

double reg_inc_gamma(double shape, double x);
double reg_inc_beta(double a, double b, double x);

double normal_cdf(double x);
double normal_quantile(double p);

}  // namespace marblesim
