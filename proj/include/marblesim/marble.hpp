#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "marblesim/analysis.hpp"
#include "marblesim/bubble.hpp"
#include "marblesim/rate.hpp"
#include "marblesim/rng.hpp"
#include "marblesim/stochastics.hpp"

namespace marblesim {

struct ParticleFront {
    double time = 0.0;
    std::vector<double> positions;         // strictly increasing
    std::vector<std::uint64_t> ids;        // particle ids
    std::vector<std::uint64_t> gap_ids;    // bubble id of gap (i, i+1)

    // Index i with positions[i] < x < positions[i+1], or -1.
    long gap_index(double x) const;
    std::size_t count_in(double a, double b) const;
};

struct FragmentationEvent {
    double time = 0.0;
    double L = 0.0;
    double U = 0.0;
    std::uint64_t bubble_id = 0;
    std::size_t inserted = 0;  // interior refill particles
};

struct CoalescenceEvent {
    double time = 0.0;
    double L = 0.0;  // the two positions that met
    double U = 0.0;
    double position = 0.0;  // merged position
    std::uint64_t survivor = 0;
    std::uint64_t absorbed = 0;
    std::uint64_t bubble_id = 0;
};

struct BubbleLife {
    double birth = 0.0;
    double death = 0.0;
    double lower0 = 0.0, upper0 = 0.0;  // boundaries at birth
    double lowerD = 0.0, upperD = 0.0;  // boundaries at death
    DeathKind kind = DeathKind::Coalesced;
    bool alive = true;
};

// Position of a merged pair. KeepLeft lets the cluster follow its lowest-index
// member's own increment (coalescence by priority); Midpoint averages the two.
enum class MergeRule { KeepLeft, Midpoint };

struct MarbleOptions {
    MergeRule merge = MergeRule::KeepLeft;
    double margin = -1.0;          // negative: 4 sqrt(t_max)
    std::size_t record_stride = 1;  // record every k-th front; 0 keeps only the first and last
    bool record_coalescence = true;
    bool enforce_step_bound = true;  // reject M dt > 0.1
};

struct MarbleTrace {
    TimeGrid grid;
    RateFunction rate;
    double delta = 0.0;
    double x_min = 0.0, x_max = 1.0;
    double margin = 0.0;
    std::uint64_t seed = 0;
    std::vector<ParticleFront> fronts;
    std::vector<FragmentationEvent> fragmentation_events;
    std::vector<CoalescenceEvent> coalescence_events;
    std::vector<BubbleLife> lives;  // indexed by bubble id
};

MarbleTrace simulate_marble(const RateFunction& rate, std::pair<double, double> window, const TimeGrid& grid,
                            double delta, RngStream& rng, MarbleOptions opts = {});

struct BubbleSet {
    std::vector<Bubble> bubbles;

    // Bubbles containing (s, x).
    std::vector<std::size_t> containing(double s, double x) const;
};

BubbleSet extract_bubbles(const MarbleTrace& trace);

// Height of the gap containing x in the last front and its bubble.
struct PointBubble {
    double height = 0.0;
    double lower = 0.0, upper = 0.0;
    double sigma = 0.0;
    std::uint64_t bubble_id = 0;
    bool found = false;
};

PointBubble bubble_at(const MarbleTrace& trace, double x);

// Fraction of [x_min,x_max] covered by gaps taller than threshold, averaged over
// recorded fronts with time in slice_times (nearest recorded front).
double area_fraction(const MarbleTrace& trace, const std::vector<double>& slice_times, double threshold);

struct ConvergenceLevel {
    double n = 0.0;
    double area_fraction = 0.0;      // mean over replicas
    std::vector<double> heights;     // bubble height at z per replica
    std::size_t fragmentations = 0;  // mean per replica (rounded)
};

struct ConvergenceReport {
    double lambda = 0.0;
    std::vector<ConvergenceLevel> levels;
    bool area_strictly_decreasing = false;
    double last_relative_change = 0.0;
    double last_height_ks = 0.0;
    Check verdict;
};

struct ConvergenceOptions {
    std::pair<double, double> window{0.0, 1.0};
    double t = 1.0;
    double delta = 1e-3;
    double dt = 0.0;  // 0: 0.1 / max level
    std::size_t replicas = 20;
    std::vector<double> slices{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
    double height_threshold = 0.05;
    unsigned workers = 0;
};

ConvergenceReport truncation_convergence(double lambda, const std::vector<double>& levels, std::uint64_t seed,
                                         ConvergenceOptions opts = {});

struct CrossCheckOptions {
    double delta = 1e-3;
    double dt = 0.0;  // 0: 0.1 / n
    std::size_t replicas = 2000;
    std::pair<double, double> window{0.0, 1.0};
    unsigned workers = 0;
};

struct CrossCheckReport {
    std::vector<double> marble_heights;
    std::vector<double> vein_heights;
    Check ks;
};

CrossCheckReport marble_vs_vein_crosscheck(double lambda, double n, double t, double z, std::uint64_t seed,
                                           CrossCheckOptions opts = {});

}  // namespace marblesim
