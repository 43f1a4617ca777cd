#include "marblesim/rbessel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <boost/math/special_functions/erf.hpp>

#include "marblesim/analysis.hpp"
#include "marblesim/parallel.hpp"

namespace marblesim {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
const double kSqrt2 = std::sqrt(2.0);

void require_bounded(const RateFunction& rate, const char* who) {
    if (!rate.bounded()) throw std::invalid_argument(std::string(who) + ": rate must be bounded (truncate first)");
}

// Single R-Bessel path advanced between candidate times of a Poisson(M) stream.
struct Runner {
    const RateFunction& rate;
    RngStream& rng;
    double m;
    double x;
    double t;
    double next;
    std::vector<double>* jumps;
    std::size_t n_jumps = 0;
    double last_jump;
    double max_closed = 0.0;

    Runner(const RateFunction& r, RngStream& g, double x0, double t0, std::vector<double>* j)
        : rate(r), rng(g), m(r.bound()), x(x0), t(t0), next(kInf), jumps(j), last_jump(t0) {
        if (m > 0.0) next = t + rng.exponential() / m;
    }

    void step_to(double target) {
        if (target > t) {
            x = bessel3_step(x, target - t, rng);
            t = target;
        }
    }

    // Advance to target; returns after the first accepted jump if stop_on_jump.
    bool advance(double target, bool stop_on_jump = false) {
        while (next <= target) {
            step_to(next);
            bool accept = rng.uniform() * m <= rate(kSqrt2 * x);
            next += rng.exponential() / m;
            if (accept) {
                x = 0.0;
                max_closed = std::max(max_closed, t - last_jump);
                last_jump = t;
                ++n_jumps;
                if (jumps) jumps->push_back(t);
                if (stop_on_jump) return true;
            }
        }
        step_to(target);
        return false;
    }
};

}  // namespace

namespace {

// Solves Phi(v-a) + Phi(v+a) - 1 = u given q_u = Phi^{-1}(u), q_half = Phi^{-1}((1+u)/2).
double folded_quantile_solve(double a, double u, double q_u, double q_half) {
    if (a == 0.0) return q_half;
    if (a >= 8.0 && a + q_u > 0.0) return a + q_u;
    // |a+Z| dominates both a+Z and |Z|, and is dominated by a+|Z|.
    double lo = std::max(a + q_u, q_half);
    double hi = a + q_half;
    if (!(hi > lo)) return lo;
    bool upper = u > 0.5;
    double cu = 1.0 - u;
    constexpr double kInvSqrt2 = 0.7071067811865476;
    constexpr double kInvSqrt2Pi = 0.3989422804014327;
    double v = lo;
    for (int it = 0; it < 100; ++it) {
        double zm = (v - a) * kInvSqrt2, zp = (v + a) * kInvSqrt2;
        double r;
        if (upper) {
            r = cu - 0.5 * (std::erfc(zm) + std::erfc(zp));
        } else {
            r = 0.5 * (std::erfc(-zm) - std::erfc(zp)) - u;
        }
        if (r == 0.0) return v;
        if (r > 0.0) hi = v; else lo = v;
        double d = kInvSqrt2Pi * (std::exp(-zm * zm) + std::exp(-zp * zp));
        double nv = d > 0.0 ? v - r / d : 0.5 * (lo + hi);
        if (!(nv > lo && nv < hi)) nv = 0.5 * (lo + hi);
        if (std::fabs(nv - v) <= 1e-13 * (1.0 + v)) return nv;
        v = nv;
        if (hi - lo <= 1e-14 * (1.0 + v)) return v;
    }
    return v;
}

double quantile_half(double u) { return kSqrt2 * boost::math::erfc_inv(1.0 - u); }
double quantile_u(double u) { return -kSqrt2 * boost::math::erfc_inv(2.0 * u); }

}  // namespace

double folded_normal_quantile(double a, double u) {
    if (!(u > 0.0 && u < 1.0)) throw std::invalid_argument("folded_normal_quantile: u outside (0,1)");
    return folded_quantile_solve(std::fabs(a), u, quantile_u(u), quantile_half(u));
}

RBesselPath simulate_rbessel(const RateFunction& rate, double x0, const TimeGrid& grid, RngStream& rng) {
    require_bounded(rate, "simulate_rbessel");
    if (!(x0 >= 0.0)) throw std::invalid_argument("simulate_rbessel: x0 must be >= 0");
    RBesselPath p{grid, {}, {}, rate, rng.seed()};
    p.x.resize(grid.size());
    p.x[0] = x0;
    Runner run(rate, rng, x0, grid.t0, &p.jump_times);
    for (std::size_t k = 1; k < grid.size(); ++k) {
        run.advance(grid.time(k));
        p.x[k] = run.x;
    }
    return p;
}

RBesselEndpoint simulate_rbessel_endpoint(const RateFunction& rate, double x0, double t, RngStream& rng) {
    require_bounded(rate, "simulate_rbessel_endpoint");
    if (!(x0 >= 0.0) || !(t >= 0.0)) throw std::invalid_argument("simulate_rbessel_endpoint: bad arguments");
    Runner run(rate, rng, x0, 0.0, nullptr);
    run.advance(t);
    RBesselEndpoint e;
    e.x_t = run.x;
    e.sigma_t = run.last_jump;
    e.n_jumps = run.n_jumps;
    e.max_excursion = std::max(run.max_closed, t - run.last_jump);
    return e;
}

double first_jump_time(const RateFunction& rate, double x0, double horizon, RngStream& rng) {
    require_bounded(rate, "first_jump_time");
    Runner run(rate, rng, x0, 0.0, nullptr);
    if (run.advance(horizon, true)) return run.t;
    return kInf;
}

namespace {

// Monotone coupling of (lambda/g^2) ∧ n_j across levels: shared candidate stream
// and marks, Bessel steps coupled through the quantile of the radial part.
class Ladder {
public:
    Ladder(double lambda, double x0, const std::vector<double>& levels, RngStream& rng)
        : lambda_(lambda), levels_(levels), rng_(rng), x_(levels.size(), x0), scratch_(levels.size()),
          last_jump_(levels.size(), 0.0), max_closed_(levels.size(), 0.0), n_jumps_(levels.size(), 0),
          jumps_(levels.size()) {
        if (levels.empty()) throw std::invalid_argument("simulate_truncation_ladder: empty levels");
        for (std::size_t j = 0; j < levels.size(); ++j) {
            if (!(levels[j] > 0.0)) throw std::invalid_argument("simulate_truncation_ladder: levels must be positive");
            if (j > 0 && !(levels[j] > levels[j - 1]))
                throw std::invalid_argument("simulate_truncation_ladder: levels must be strictly increasing");
        }
        if (!(lambda >= 0.0)) throw std::invalid_argument("simulate_truncation_ladder: lambda must be >= 0");
        if (!(x0 >= 0.0)) throw std::invalid_argument("simulate_truncation_ladder: x0 must be >= 0");
        m_ = lambda > 0.0 ? levels.back() : 0.0;
        next_ = m_ > 0.0 ? rng_.exponential() / m_ : kInf;
    }

    void record_jumps(bool on) { record_ = on; }

    double rate(std::size_t j, double x) const {
        if (x <= 0.0) return levels_[j];
        return std::min(lambda_ / (2.0 * x * x), levels_[j]);
    }

    void step(double h) {
        if (h <= 0.0) return;
        double s = std::sqrt(h);
        double u = rng_.uniform();
        double q = -2.0 * h * std::log(rng_.uniform());
        double q_u = quantile_u(u), q_half = quantile_half(u);
        for (std::size_t j = 0; j < x_.size(); ++j) {
            if (j > 0 && x_[j] == x_[j - 1]) {
                scratch_[j] = scratch_[j - 1];
                continue;
            }
            double y = s * folded_quantile_solve(x_[j] / s, u, q_u, q_half);
            scratch_[j] = std::sqrt(y * y + q);
        }
        for (std::size_t j = 1; j < x_.size(); ++j) scratch_[j] = std::min(scratch_[j], scratch_[j - 1]);
        x_.swap(scratch_);
        t_ += h;
    }

    void candidate() {
        double mark = rng_.uniform() * m_;
        for (std::size_t j = x_.size(); j-- > 0;) {
            if (!(mark <= rate(j, x_[j]))) break;  // lower levels have lower rates
            x_[j] = 0.0;
            max_closed_[j] = std::max(max_closed_[j], t_ - last_jump_[j]);
            last_jump_[j] = t_;
            ++n_jumps_[j];
            if (record_) jumps_[j].push_back(t_);
            after_jump(j);
        }
    }

    void advance(double target) {
        while (next_ <= target) {
            step(next_ - t_);
            next_ += rng_.exponential() / m_;
            candidate();
        }
        step(target - t_);
    }

    // Continue past the horizon until every level has closed its straddling excursion.
    void extend(double horizon, double limit) {
        (void)horizon;
        closing_ = true;
        closed_.assign(x_.size(), false);
        close_time_.assign(x_.size(), kInf);
        while (std::find(closed_.begin(), closed_.end(), false) != closed_.end() && next_ <= limit) {
            step(next_ - t_);
            next_ += rng_.exponential() / m_;
            candidate();
        }
        closing_ = false;
    }

    double x(std::size_t j) const { return x_[j]; }
    double t() const { return t_; }
    double last_jump(std::size_t j) const { return last_jump_[j]; }
    double max_closed(std::size_t j) const { return max_closed_[j]; }
    std::size_t n_jumps(std::size_t j) const { return n_jumps_[j]; }
    const std::vector<double>& jumps(std::size_t j) const { return jumps_[j]; }
    bool closed(std::size_t j) const { return closed_[j]; }
    double close_time(std::size_t j) const { return close_time_[j]; }

private:
    void after_jump(std::size_t j) {
        if (closing_ && !closed_[j]) {
            closed_[j] = true;
            close_time_[j] = t_;
        }
    }

    double lambda_;
    std::vector<double> levels_;
    RngStream& rng_;
    double m_ = 0.0;
    double t_ = 0.0;
    double next_ = kInf;
    std::vector<double> x_, scratch_;
    std::vector<double> last_jump_, max_closed_;
    std::vector<std::size_t> n_jumps_;
    std::vector<std::vector<double>> jumps_;
    bool record_ = false;
    bool closing_ = false;
    std::vector<bool> closed_;
    std::vector<double> close_time_;
};

}  // namespace

std::vector<RBesselPath> simulate_truncation_ladder(double lambda, double x0, const TimeGrid& grid,
                                                   const std::vector<double>& levels, RngStream& rng) {
    Ladder lad(lambda, x0, levels, rng);
    lad.record_jumps(true);
    std::vector<RBesselPath> out;
    out.reserve(levels.size());
    for (double n : levels) {
        RBesselPath p{grid, std::vector<double>(grid.size()), {}, RateFunction::truncated_power_law(lambda, n),
                      rng.seed()};
        p.x[0] = x0;
        out.push_back(std::move(p));
    }
    // the ladder clock starts at 0; shift by t0
    for (std::size_t k = 1; k < grid.size(); ++k) {
        lad.advance(grid.time(k) - grid.t0);
        for (std::size_t j = 0; j < levels.size(); ++j) out[j].x[k] = lad.x(j);
    }
    for (std::size_t j = 0; j < levels.size(); ++j) {
        for (double s : lad.jumps(j)) out[j].jump_times.push_back(s + grid.t0);
    }
    return out;
}

std::vector<RBesselEndpoint> ladder_endpoint(double lambda, double x0, double t, const std::vector<double>& levels,
                                             RngStream& rng, double extend) {
    Ladder lad(lambda, x0, levels, rng);
    lad.advance(t);
    std::vector<RBesselEndpoint> out(levels.size());
    for (std::size_t j = 0; j < levels.size(); ++j) {
        out[j].x_t = lad.x(j);
        out[j].sigma_t = lad.last_jump(j);
        out[j].n_jumps = lad.n_jumps(j);
        out[j].max_excursion = std::max(lad.max_closed(j), t - lad.last_jump(j));
    }
    if (extend > 0.0) {
        lad.extend(t, t + extend);
        for (std::size_t j = 0; j < levels.size(); ++j) {
            double end = lad.closed(j) ? lad.close_time(j) : t + extend;
            out[j].censored = !lad.closed(j);
            out[j].max_excursion = std::max(out[j].max_excursion, end - out[j].sigma_t);
        }
    }
    return out;
}

SurvivalEstimate survival_probability(const RateFunction& rate, double t, std::size_t replicas, std::uint64_t seed,
                                      unsigned workers) {
    return survival_curve(rate, {t}, replicas, seed, workers).front();
}

std::vector<SurvivalEstimate> survival_curve(const RateFunction& rate, const std::vector<double>& times,
                                             std::size_t replicas, std::uint64_t seed, unsigned workers) {
    require_bounded(rate, "survival_probability");
    if (replicas == 0) throw std::invalid_argument("survival_probability: need at least one replica");
    if (times.empty()) throw std::invalid_argument("survival_probability: no query times");
    double horizon = 0.0;
    for (double t : times) {
        if (!(t >= 0.0)) throw std::invalid_argument("survival_probability: negative time");
        horizon = std::max(horizon, t);
    }
    auto firsts = run_replicas(replicas, workers, [&](std::size_t i) {
        RngStream rng(seed, i, StreamTag::Survival);
        return first_jump_time(rate, 0.0, horizon, rng);
    });
    std::vector<SurvivalEstimate> out;
    double n = static_cast<double>(replicas);
    for (double t : times) {
        std::size_t alive = 0;
        for (double f : firsts) alive += f > t ? 1 : 0;
        double p = static_cast<double>(alive) / n;
        out.push_back({p, std::sqrt(p * (1.0 - p) / n)});
    }
    return out;
}

ExcursionRecord excursions(const RBesselPath& path, double query_t) {
    double t0 = path.grid.t0, t1 = path.grid.t1();
    if (!(query_t >= t0 && query_t <= t1 + 1e-12 * std::max(1.0, std::fabs(t1))))
        throw std::invalid_argument("excursions: query time outside the grid");
    ExcursionRecord rec;
    double prev = t0;
    rec.sigma_t = t0;
    rec.k_t = 1;
    for (double j : path.jump_times) {
        rec.durations.push_back(j - prev);
        prev = j;
        if (j <= query_t) {
            rec.sigma_t = j;
            ++rec.k_t;
        }
    }
    return rec;
}

MaxExcursionReport max_excursion_supercritical(double lambda, const std::vector<double>& levels, double t,
                                               std::size_t replicas, std::uint64_t seed, unsigned workers,
                                               double q) {
    if (!(lambda >= 6.0)) throw std::invalid_argument("max_excursion_supercritical: lambda must be >= 6");
    if (replicas == 0) throw std::invalid_argument("max_excursion_supercritical: need replicas");
    auto rows = run_replicas(replicas, workers, [&](std::size_t i) {
        RngStream rng(seed, i, StreamTag::Ladder);
        return ladder_endpoint(lambda, 0.0, t, levels, rng, 100.0 * t);
    });
    MaxExcursionReport rep;
    rep.levels = levels;
    for (std::size_t j = 0; j < levels.size(); ++j) {
        std::vector<double> mx, xs;
        for (auto& r : rows) {
            mx.push_back(r[j].max_excursion);
            xs.push_back(r[j].x_t);
            rep.censored += r[j].censored ? 1 : 0;
        }
        rep.q90.push_back(quantile(mx, q));
        rep.median_x.push_back(median(xs));
    }
    for (std::size_t j = 1; j < levels.size(); ++j) rep.nonincreasing = rep.nonincreasing && rep.q90[j] <= rep.q90[j - 1];
    return rep;
}

}  // namespace marblesim
