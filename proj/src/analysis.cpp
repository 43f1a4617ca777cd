#include "marblesim/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "marblesim/stochastics.hpp"

namespace marblesim {

LambdaParams lambda_params(double lambda) {
    if (!(lambda >= 0.0) || !std::isfinite(lambda))
        throw std::invalid_argument("lambda_params: lambda must be a nonnegative real");
    LambdaParams p;
    p.lambda = lambda;
    p.alpha = 0.5 * (1.0 + std::sqrt(4.0 * lambda + 1.0));
    p.beta = 0.5 * (p.alpha - 1.0);
    p.c = (6.0 - lambda) / 4.0;
    p.bessel_dim = 2.0 * p.alpha + 1.0;
    p.regime = lambda < 6.0 ? Regime::Subcritical : (lambda == 6.0 ? Regime::Critical : Regime::Supercritical);
    return p;
}

const char* regime_name(Regime r) {
    switch (r) {
        case Regime::Subcritical: return "subcritical";
        case Regime::Critical: return "critical";
        case Regime::Supercritical: return "supercritical";
    }
    return "?";
}

LampertiRoot lamperti_root(double lambda) {
    LampertiRoot out;
    double disc = 1.0 + 4.0 * lambda;
    if (!(disc >= 0.0)) return out;
    double theta = 0.5 * (-1.0 + std::sqrt(disc));
    out.theta0 = theta;
    out.has_recurrent_extension = theta > 0.0 && theta < 2.0;
    return out;
}

nlohmann::json to_json(const SampleMeta& m, std::size_t sample_size) {
    return {{"lambda", m.lambda}, {"n", m.n},       {"t", m.t},
            {"dt", m.dt},         {"seed", m.seed}, {"sample_size", sample_size}};
}

nlohmann::json to_json(const Check& c) {
    return {{"name", c.name}, {"statistic", c.statistic}, {"threshold", c.threshold}, {"pass", c.pass},
            {"meta", c.meta}};
}

Cdf uniform_cdf() {
    return [](double x) { return std::clamp(x, 0.0, 1.0); };
}

Cdf gamma_cdf(double shape, double scale) {
    if (!(shape > 0.0) || !(scale > 0.0)) throw std::invalid_argument("gamma_cdf: bad parameters");
    return [shape, scale](double x) { return x <= 0.0 ? 0.0 : reg_inc_gamma(shape, x / scale); };
}

Cdf beta_cdf(double a, double b) {
    if (!(a > 0.0) || !(b > 0.0)) throw std::invalid_argument("beta_cdf: bad parameters");
    return [a, b](double x) { return reg_inc_beta(a, b, std::clamp(x, 0.0, 1.0)); };
}

double ks_distance(std::span<const double> sample, const Cdf& cdf) {
    if (sample.empty()) throw std::invalid_argument("ks_distance: empty sample");
    std::vector<double> v(sample.begin(), sample.end());
    std::sort(v.begin(), v.end());
    double n = static_cast<double>(v.size());
    double d = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        double f = cdf(v[i]);
        d = std::max({d, (static_cast<double>(i) + 1.0) / n - f, f - static_cast<double>(i) / n});
    }
    return d;
}

double ks_distance(const EmpiricalSample& sample, const Cdf& cdf) { return ks_distance(sample.values, cdf); }

double ks_two_sample(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) throw std::invalid_argument("ks_two_sample: empty sample");
    std::vector<double> x(a.begin(), a.end()), y(b.begin(), b.end());
    std::sort(x.begin(), x.end());
    std::sort(y.begin(), y.end());
    double nx = static_cast<double>(x.size()), ny = static_cast<double>(y.size());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < x.size() && j < y.size()) {
        double v = std::min(x[i], y[j]);
        while (i < x.size() && x[i] == v) ++i;
        while (j < y.size() && y[j] == v) ++j;
        d = std::max(d, std::fabs(static_cast<double>(i) / nx - static_cast<double>(j) / ny));
    }
    return d;
}

double ks_threshold(std::size_t n) { return 1.63 / std::sqrt(static_cast<double>(n)); }

double ks_threshold(std::size_t n, std::size_t m) {
    double a = static_cast<double>(n), b = static_cast<double>(m);
    return 1.63 * std::sqrt((a + b) / (a * b));
}

TailFit tail_exponent_fit(std::span<const std::pair<double, double>> survival_curve,
                          std::pair<double, double> window) {
    std::vector<double> lx, ly;
    for (auto [t, p] : survival_curve) {
        if (t < window.first || t > window.second) continue;
        if (!(p > 0.0) || !(t > 0.0)) throw std::invalid_argument("tail_exponent_fit: nonpositive point in window");
        lx.push_back(std::log(t));
        ly.push_back(std::log(p));
    }
    if (lx.size() < 5) throw std::invalid_argument("tail_exponent_fit: fewer than 5 points in window");
    double n = static_cast<double>(lx.size());
    double mx = mean(lx), my = mean(ly);
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        sxx += (lx[i] - mx) * (lx[i] - mx);
        sxy += (lx[i] - mx) * (ly[i] - my);
    }
    if (!(sxx > 0.0)) throw std::invalid_argument("tail_exponent_fit: degenerate time window");
    double slope = sxy / sxx;
    double icpt = my - slope * mx;
    double rss = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        double r = ly[i] - icpt - slope * lx[i];
        rss += r * r;
    }
    TailFit f;
    f.beta_hat = -slope;
    f.intercept = icpt;
    f.stderr_ = std::sqrt(rss / (n - 2.0) / sxx);
    f.points = lx.size();
    return f;
}

ScalingReport subordinator_scaling_check(const std::map<double, EmpiricalSample>& excursion_lengths_by_n,
                                         double beta, std::vector<double> r_grid,
                                         std::vector<double> theta_grid) {
    if (excursion_lengths_by_n.size() < 2)
        throw std::invalid_argument("subordinator_scaling_check: need at least two truncation levels");
    if (!(beta > 0.0)) throw std::invalid_argument("subordinator_scaling_check: beta must be positive");
    std::size_t size = excursion_lengths_by_n.begin()->second.size();
    for (auto& [n, s] : excursion_lengths_by_n) {
        if (s.size() != size || size == 0)
            throw std::invalid_argument("subordinator_scaling_check: mismatched sample sizes");
    }
    ScalingReport rep;
    rep.r_grid = r_grid;
    rep.theta_grid = theta_grid;
    for (auto& [n, s] : excursion_lengths_by_n) {
        std::vector<double> stat;
        for (double r : r_grid) {
            double k = std::floor(std::pow(n, beta) * r);
            for (double th : theta_grid) {
                double lap = 0.0;
                for (double e : s.values) lap += std::exp(-th * e);
                lap /= static_cast<double>(s.size());
                stat.push_back(-k * std::log(lap) / (r * std::pow(th, beta)));
            }
        }
        rep.collapse[n] = std::move(stat);
    }
    std::size_t cells = r_grid.size() * theta_grid.size();
    for (std::size_t c = 0; c < cells; ++c) {
        double lo = INFINITY, hi = -INFINITY, sum = 0.0;
        for (auto& [n, st] : rep.collapse) {
            lo = std::min(lo, st[c]);
            hi = std::max(hi, st[c]);
            sum += st[c];
        }
        double m = sum / static_cast<double>(rep.collapse.size());
        rep.dispersion = std::max(rep.dispersion, (hi - lo) / std::fabs(m));
    }
    return rep;
}

double quantile(std::vector<double> values, double p) {
    if (values.empty()) throw std::invalid_argument("quantile: empty sample");
    p = std::clamp(p, 0.0, 1.0);
    double pos = p * static_cast<double>(values.size() - 1);
    auto lo = static_cast<std::size_t>(std::floor(pos));
    std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(lo), values.end());
    double a = values[lo];
    if (lo + 1 >= values.size()) return a;
    double b = *std::min_element(values.begin() + static_cast<std::ptrdiff_t>(lo) + 1, values.end());
    return a + (pos - static_cast<double>(lo)) * (b - a);
}

double median(std::vector<double> values) { return quantile(std::move(values), 0.5); }

double mean(std::span<const double> v) {
    if (v.empty()) throw std::invalid_argument("mean: empty sample");
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_variance(std::span<const double> v) {
    if (v.size() < 2) throw std::invalid_argument("sample_variance: need two values");
    double m = mean(v), s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / static_cast<double>(v.size() - 1);
}

double pearson(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size() || a.size() < 2) throw std::invalid_argument("pearson: bad sizes");
    double ma = mean(a), mb = mean(b);
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    if (saa == 0.0 || sbb == 0.0) return 0.0;
    return sab / std::sqrt(saa * sbb);
}

}  // namespace marblesim
