#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "marblesim/rate.hpp"
#include "marblesim/rng.hpp"
#include "marblesim/stochastics.hpp"

namespace marblesim {

// Bessel-3 path jumping to 0 at rate R(sqrt(2) X).
struct RBesselPath {
    TimeGrid grid;
    std::vector<double> x;
    std::vector<double> jump_times;
    RateFunction rate;
    std::uint64_t seed = 0;
};

struct ExcursionRecord {
    std::vector<double> durations;  // completed excursions E_1..E_{k(t)-1}, then the open one up to the horizon
    double sigma_t = 0.0;
    std::size_t k_t = 1;
};

// Summary of one replica at the horizon.
struct RBesselEndpoint {
    double x_t = 0.0;
    double sigma_t = 0.0;
    std::size_t n_jumps = 0;
    // Longest excursion started before t; the straddling one counts with its
    // full length when the run was extended past t, else with its age t - sigma_t.
    double max_excursion = 0.0;
    bool censored = false;
};

RBesselPath simulate_rbessel(const RateFunction& rate, double x0, const TimeGrid& grid, RngStream& rng);

// Event-driven run to time t, no grid.
RBesselEndpoint simulate_rbessel_endpoint(const RateFunction& rate, double x0, double t, RngStream& rng);

// Time of the first accepted jump, or +inf if none before horizon.
double first_jump_time(const RateFunction& rate, double x0, double horizon, RngStream& rng);

// Coupled paths for rates (lambda/g^2) ∧ n, n in levels (strictly increasing).
// Pathwise X^{n'} <= X^n for n' >= n.
std::vector<RBesselPath> simulate_truncation_ladder(double lambda, double x0, const TimeGrid& grid,
                                                   const std::vector<double>& levels, RngStream& rng);

// Coupled ladder run to t. With extend > 0 the run continues past t (up to
// t + extend) until every level's straddling excursion has closed.
std::vector<RBesselEndpoint> ladder_endpoint(double lambda, double x0, double t, const std::vector<double>& levels,
                                             RngStream& rng, double extend = 0.0);

// Quantile of |a + Z| at probability u, Z standard normal.
double folded_normal_quantile(double a, double u);

struct SurvivalEstimate {
    double p_hat = 1.0;
    double stderr_ = 0.0;
};

SurvivalEstimate survival_probability(const RateFunction& rate, double t, std::size_t replicas,
                                      std::uint64_t seed, unsigned workers = 0);

// p(t) for each t in times from one set of replicas.
std::vector<SurvivalEstimate> survival_curve(const RateFunction& rate, const std::vector<double>& times,
                                             std::size_t replicas, std::uint64_t seed, unsigned workers = 0);

ExcursionRecord excursions(const RBesselPath& path, double query_t);

struct MaxExcursionReport {
    std::vector<double> levels;
    std::vector<double> q90;       // per level
    std::vector<double> median_x;  // per level, X_t medians from the same replicas
    std::size_t censored = 0;
    bool nonincreasing = true;
};

MaxExcursionReport max_excursion_supercritical(double lambda, const std::vector<double>& levels, double t,
                                               std::size_t replicas, std::uint64_t seed, unsigned workers = 0,
                                               double q = 0.9);

}  // namespace marblesim
