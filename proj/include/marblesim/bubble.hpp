#pragma once

#include <cstdint>
#include <vector>

namespace marblesim {

enum class DeathKind { Coalesced, Fragmented };

const char* death_kind_name(DeathKind k);

// Open spacetime region {sigma < s < tau, lower(s) < x < upper(s)}.
struct Bubble {
    std::uint64_t id = 0;
    double sigma = 0.0;
    double tau = 0.0;
    std::vector<double> times;
    std::vector<double> lower;
    std::vector<double> upper;
    DeathKind death = DeathKind::Coalesced;
    bool censored = false;  // still alive at the end of the run; tau is the horizon

    // Piecewise-linear in time between samples, 0 outside [sigma, tau].
    double height_at(double s) const;
    double lower_at(double s) const;
    double upper_at(double s) const;
    bool contains(double s, double x) const;
};

}  // namespace marblesim
