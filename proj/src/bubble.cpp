#include "marblesim/bubble.hpp"

#include <algorithm>

namespace marblesim {

const char* death_kind_name(DeathKind k) { return k == DeathKind::Coalesced ? "coalesced" : "fragmented"; }

namespace {

double interp(const std::vector<double>& ts, const std::vector<double>& v, double s) {
    if (ts.empty()) return 0.0;
    if (s <= ts.front()) return v.front();
    if (s >= ts.back()) return v.back();
    auto it = std::upper_bound(ts.begin(), ts.end(), s);
    std::size_t i = static_cast<std::size_t>(it - ts.begin());
    double t0 = ts[i - 1], t1 = ts[i];
    if (t1 == t0) return v[i];
    double w = (s - t0) / (t1 - t0);
    return v[i - 1] + w * (v[i] - v[i - 1]);
}

}  // namespace

double Bubble::lower_at(double s) const { return interp(times, lower, s); }
double Bubble::upper_at(double s) const { return interp(times, upper, s); }

double Bubble::height_at(double s) const {
    if (s < sigma || s > tau || times.empty()) return 0.0;
    return std::max(0.0, upper_at(s) - lower_at(s));
}

bool Bubble::contains(double s, double x) const {
    if (!(s > sigma && s < tau)) return false;
    return lower_at(s) < x && x < upper_at(s);
}

}  // namespace marblesim
