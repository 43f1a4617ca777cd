#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "marblesim/analysis.hpp"
#include "marblesim/rate.hpp"
#include "marblesim/rng.hpp"
#include "marblesim/stochastics.hpp"

namespace marblesim {

struct MassParticle {
    double mass = 0.0;
    std::uint64_t id = 0;
    std::uint64_t parent_id = 0;
};

struct PopulationState {
    double time = 0.0;
    std::vector<MassParticle> particles;

    double total_mass() const;
};

struct PopulationSample {
    double time = 0.0;
    std::size_t n_alive = 0;
    double total_mass = 0.0;
};

struct SplitEvent {
    double time = 0.0;
    double mass_before = 0.0;
    double mass_after = 0.0;  // sum of the N children
};

struct PopulationOptions {
    double diffusivity = 2.0;  // masses move as sqrt(diffusivity) times a Brownian motion
    std::size_t cap = 1000000;
    bool record_states = false;
    bool record_splits = false;
};

struct PopulationRun {
    std::vector<PopulationSample> series;  // one per grid time
    std::vector<PopulationState> states;   // per grid time when record_states
    std::vector<SplitEvent> splits;        // when record_splits
    PopulationState final_state;
    bool aborted = false;  // particle cap exceeded; the run stops at the offending step
    std::size_t n_splits = 0;
};

PopulationRun simulate_population(const RateFunction& rate, unsigned N, const std::vector<double>& initial_masses,
                                  const TimeGrid& grid, RngStream& rng, PopulationOptions opts = {});

struct SpinePath {
    TimeGrid grid;
    std::vector<double> mass;
    std::vector<double> jump_times;
};

// Bessel-3 (scaled by sqrt(diffusivity)) jumping x -> x/N at rate R(x).
SpinePath simulate_spine(const RateFunction& rate, unsigned N, double x0, const TimeGrid& grid, RngStream& rng,
                         double diffusivity = 1.0);

// Spine value at t, event-driven.
double spine_endpoint(const RateFunction& rate, unsigned N, double x0, double t, RngStream& rng,
                      double diffusivity = 1.0, std::size_t* n_jumps = nullptr);

struct ManyToOneReport {
    double lhs = 0.0, lhs_se = 0.0;
    double rhs = 0.0, rhs_se = 0.0;
    double rel_diff = 0.0;
    double pooled_se = 0.0;
    double z = 0.0;
    double aborted_fraction = 0.0;
    bool valid = true;  // false when more than 1% of population runs hit the cap
    double mean_total_mass = 0.0, total_mass_se = 0.0;
    std::vector<std::vector<PopulationSample>> series;  // per population replica, when keep_series
};

struct ManyToOneOptions {
    std::size_t replicas = 100000;
    double dt = 0.01;
    double diffusivity = 2.0;
    std::size_t cap = 1000000;
    unsigned workers = 0;
    bool keep_series = false;
};

// E[sum_u f(X_u(t))] from the population against y E_y[f(Xbar_t)/Xbar_t] from the spine.
ManyToOneReport many_to_one_check(const RateFunction& rate, unsigned N, double y, double t,
                                  const std::function<double(double)>& f, std::uint64_t seed,
                                  ManyToOneOptions opts = {});

}  // namespace marblesim
