#include "marblesim/stochastics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <boost/math/special_functions/erf.hpp>

namespace marblesim {

TimeGrid::TimeGrid(double t0_, double dt_, std::size_t n_steps_) : t0(t0_), dt(dt_), n_steps(n_steps_) {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("TimeGrid: dt must be positive");
}

TimeGrid TimeGrid::span(double t0, double t1, std::size_t n_steps) {
    if (n_steps == 0) throw std::invalid_argument("TimeGrid: need at least one step");
    if (!(t1 > t0)) throw std::invalid_argument("TimeGrid: t1 must exceed t0");
    return TimeGrid(t0, (t1 - t0) / static_cast<double>(n_steps), n_steps);
}

TimeGrid TimeGrid::with_max_step(double t0, double t1, double dt_max) {
    if (!(dt_max > 0.0)) throw std::invalid_argument("TimeGrid: dt must be positive");
    if (!(t1 > t0)) throw std::invalid_argument("TimeGrid: t1 must exceed t0");
    auto n = static_cast<std::size_t>(std::ceil((t1 - t0) / dt_max - 1e-9));
    return span(t0, t1, std::max<std::size_t>(n, 1));
}

double gaussian_increment(RngStream& rng, double dt, double diffusivity) {
    if (!(dt > 0.0)) throw std::invalid_argument("gaussian_increment: dt must be positive");
    if (!(diffusivity > 0.0)) throw std::invalid_argument("gaussian_increment: diffusivity must be positive");
    return std::sqrt(diffusivity * dt) * rng.normal();
}

double squared_bessel_transition(double x0, double dim, double dt, RngStream& rng) {
    if (!(x0 >= 0.0) || !(dim > 0.0) || !(dt > 0.0))
        throw std::invalid_argument("squared_bessel_transition: need x0 >= 0, dim > 0, dt > 0");
    auto k = rng.poisson(x0 / (2.0 * dt));
    return 2.0 * dt * rng.gamma(0.5 * dim + static_cast<double>(k));
}

double bessel3_step(double x, double h, RngStream& rng) {
    // |x e1 + 3d Gaussian| via a 1d normal plus an independent chi-square(2).
    double s = std::sqrt(h);
    double a = x + s * rng.normal();
    return std::sqrt(a * a - 2.0 * h * std::log(rng.uniform()));
}

std::vector<double> skorokhod_reflect(std::span<const double> driver, double start_gap) {
    if (driver.empty()) throw std::invalid_argument("skorokhod_reflect: empty driver");
    if (!(start_gap >= 0.0)) throw std::invalid_argument("skorokhod_reflect: negative start gap");
    std::vector<double> out(driver.size());
    double push = 0.0;
    for (std::size_t k = 0; k < driver.size(); ++k) {
        push = std::max(push, -driver[k]);
        out[k] = driver[k] + push;
    }
    return out;
}

std::vector<double> skorokhod_reflect_with_minima(std::span<const double> driver,
                                                  std::span<const double> step_minima) {
    if (driver.empty()) throw std::invalid_argument("skorokhod_reflect: empty driver");
    if (step_minima.size() != driver.size())
        throw std::invalid_argument("skorokhod_reflect: minima must match driver length");
    std::vector<double> out(driver.size());
    double push = std::max(0.0, -driver[0]);
    out[0] = driver[0] + push;
    for (std::size_t k = 1; k < driver.size(); ++k) {
        push = std::max(push, -std::min(step_minima[k], driver[k]));
        out[k] = driver[k] + push;
    }
    return out;
}

double bridge_minimum(double delta, double var, double h, RngStream& rng) {
    double disc = delta * delta - 2.0 * var * h * std::log(rng.uniform());
    return 0.5 * (delta - std::sqrt(disc));
}

double bridge_crossing_probability(double g0, double g1, double var, double h) {
    if (g0 <= 0.0 || g1 <= 0.0) return 1.0;
    return std::exp(-2.0 * g0 * g1 / (var * h));
}

namespace {

constexpr double kEps = 1e-16;
constexpr double kTiny = 1e-300;
constexpr int kMaxIter = 100000;

double gamma_series(double a, double x) {
    double ap = a;
    double sum = 1.0 / a;
    double del = sum;
    for (int n = 0; n < kMaxIter; ++n) {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if (std::fabs(del) < std::fabs(sum) * kEps) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Upper tail Q(a,x) via modified Lentz.
double gamma_cf(double a, double x) {
    double b = x + 1.0 - a;
    double c = 1.0 / kTiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < kMaxIter; ++i) {
        double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = b + an / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < kEps) break;
    }
    return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

double beta_cf(double a, double b, double x) {
    double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m < kMaxIter; ++m) {
        int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < kEps) break;
    }
    return h;
}

}  // namespace

double reg_inc_gamma(double shape, double x) {
    if (!(shape > 0.0)) throw std::invalid_argument("reg_inc_gamma: shape must be positive");
    if (std::isnan(x)) throw std::invalid_argument("reg_inc_gamma: x is NaN");
    if (x <= 0.0) return 0.0;
    if (std::isinf(x)) return 1.0;
    if (x < shape + 1.0) return std::clamp(gamma_series(shape, x), 0.0, 1.0);
    return std::clamp(1.0 - gamma_cf(shape, x), 0.0, 1.0);
}

double reg_inc_beta(double a, double b, double x) {
    if (!(a > 0.0) || !(b > 0.0)) throw std::invalid_argument("reg_inc_beta: a and b must be positive");
    if (!(x >= 0.0 && x <= 1.0)) throw std::invalid_argument("reg_inc_beta: x outside [0,1]");
    if (x == 0.0) return 0.0;
    if (x == 1.0) return 1.0;
    double front = std::exp(std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) +
                            b * std::log1p(-x));
    if (x < a / (a + b)) return std::clamp(front * beta_cf(a, b, x) / a, 0.0, 1.0);
    return std::clamp(1.0 - front * beta_cf(b, a, 1.0 - x) / b, 0.0, 1.0);
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) {
        if (p == 0.0) return -std::numeric_limits<double>::infinity();
        if (p == 1.0) return std::numeric_limits<double>::infinity();
        throw std::invalid_argument("normal_quantile: p outside [0,1]");
    }
    return -std::sqrt(2.0) * boost::math::erfc_inv(2.0 * p);
}

}  // namespace marblesim
