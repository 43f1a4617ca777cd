#include "marblesim/vein.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace marblesim {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_bounded(const RateFunction& rate, const char* who) {
    if (!rate.bounded()) throw std::invalid_argument(std::string(who) + ": rate must be bounded (truncate first)");
}

// Central path C with gaps DU = U - C, DL = C - L reflected at 0. Each gap is
// driven by a variance-2 increment; the reflection inside a step uses the exact
// bridge minimum of the driver given its endpoints.
struct VeinRunner {
    const RateFunction& rate;
    RngStream& rng;
    double m;
    double c, du, dl;
    double t;
    double next = kInf;
    std::vector<double>* jump_times;
    std::vector<double>* jump_positions;
    std::size_t n_jumps = 0;
    double last_jump;

    VeinRunner(const RateFunction& r, RngStream& g, VeinState s, double t0, std::vector<double>* jt,
               std::vector<double>* jp)
        : rate(r), rng(g), m(r.bound()), c(s.C), du(s.U - s.C), dl(s.C - s.L), t(t0), jump_times(jt),
          jump_positions(jp), last_jump(t0) {
        if (m > 0.0) next = t + rng.exponential() / m;
    }

    void sub_step(double h) {
        if (!(h > 0.0)) return;
        double s = std::sqrt(h);
        double dc = s * rng.normal();
        double du_drv = s * rng.normal() - dc;
        double dl_drv = dc - s * rng.normal();
        double mu = bridge_minimum(du_drv, 2.0, h, rng);
        double ml = bridge_minimum(dl_drv, 2.0, h, rng);
        du = du + du_drv + std::max(0.0, -(du + mu));
        dl = dl + dl_drv + std::max(0.0, -(dl + ml));
        c += dc;
        t += h;
    }

    void advance(double target) {
        while (next <= target) {
            sub_step(next - t);
            bool accept = rng.uniform() * m <= rate(du + dl);
            next += rng.exponential() / m;
            if (accept) {
                du = dl = 0.0;
                last_jump = t;
                ++n_jumps;
                if (jump_times) jump_times->push_back(t);
                if (jump_positions) jump_positions->push_back(c);
            }
        }
        sub_step(target - t);
        t = target;
    }

    VeinState state() const { return {c - dl, c, c + du}; }
};

void check_start(VeinState s) {
    if (!(s.L <= s.C && s.C <= s.U)) throw std::invalid_argument("simulate_vein: start must satisfy l <= c <= u");
}

}  // namespace

VeinPath simulate_vein(const RateFunction& rate, VeinState start, const TimeGrid& grid, RngStream& rng) {
    require_bounded(rate, "simulate_vein");
    check_start(start);
    VeinPath p;
    p.grid = grid;
    p.L.resize(grid.size());
    p.C.resize(grid.size());
    p.U.resize(grid.size());
    p.L[0] = start.L;
    p.C[0] = start.C;
    p.U[0] = start.U;
    VeinRunner run(rate, rng, start, grid.t0, &p.jump_times, &p.jump_positions);
    for (std::size_t k = 1; k < grid.size(); ++k) {
        run.advance(grid.time(k));
        auto s = run.state();
        p.L[k] = s.L;
        p.C[k] = s.C;
        p.U[k] = s.U;
    }
    return p;
}

VeinEndpoint simulate_vein_endpoint(const RateFunction& rate, VeinState start, const TimeGrid& grid, RngStream& rng) {
    require_bounded(rate, "simulate_vein");
    check_start(start);
    VeinRunner run(rate, rng, start, grid.t0, nullptr, nullptr);
    for (std::size_t k = 1; k < grid.size(); ++k) run.advance(grid.time(k));
    return {run.state(), run.last_jump, run.n_jumps};
}

std::pair<VeinPath, Bubble> bubble_at_point(const RateFunction& rate, double t, double x, double dt, RngStream& rng,
                                            ContinuationOptions opts) {
    if (!(t > 0.0)) throw std::invalid_argument("bubble_at_point: t must be positive");
    require_bounded(rate, "bubble_at_point");
    auto grid = TimeGrid::with_max_step(0.0, t, dt);
    VeinPath path = simulate_vein(rate, {0.0, 0.0, 0.0}, grid, rng);

    double shift = x - path.C.back();
    for (auto* arr : {&path.L, &path.C, &path.U})
        for (double& v : *arr) v += shift;
    for (double& v : path.jump_positions) v += shift;

    // Continuation: L and U as independent Brownian motions until they meet or
    // the interval fragments.
    double hstep = opts.dt > 0.0 ? opts.dt : grid.dt;
    double t_cap = t + opts.max_duration * t;
    VeinContinuation cont;
    double lo = path.L.back(), up = path.U.back();
    double s = t;
    cont.times.push_back(s);
    cont.L.push_back(lo);
    cont.U.push_back(up);
    double m = rate.bound();
    double next = m > 0.0 ? s + rng.exponential() / m : kInf;
    bool dead = false;
    // gap is zero at t only when a jump fell exactly at t; then the bubble is empty
    if (!(up > lo)) {
        dead = true;
        cont.death = DeathKind::Coalesced;
    }
    auto sub = [&](double h) -> bool {
        double sq = std::sqrt(h);
        double l1 = lo + sq * rng.normal();
        double u1 = up + sq * rng.normal();
        double g0 = up - lo, g1 = u1 - l1;
        if (g1 <= 0.0) {
            double w = g0 / (g0 - g1);
            double mid = 0.5 * ((lo + w * (l1 - lo)) + (up + w * (u1 - up)));
            s += w * h;
            lo = up = mid;
            return true;
        }
        if (rng.uniform() < bridge_crossing_probability(g0, g1, 2.0, h)) {
            s += 0.5 * h;
            lo = up = 0.5 * (0.5 * (lo + l1) + 0.5 * (up + u1));
            return true;
        }
        lo = l1;
        up = u1;
        s += h;
        return false;
    };
    while (!dead && s < t_cap) {
        double target = std::min(s + hstep, t_cap);
        while (!dead && next <= target) {
            if (sub(next - s)) {
                dead = true;
                cont.death = DeathKind::Coalesced;
                break;
            }
            bool accept = rng.uniform() * m <= rate(up - lo);
            next += rng.exponential() / m;
            if (accept) {
                dead = true;
                cont.death = DeathKind::Fragmented;
            }
        }
        if (!dead && target > s) {
            if (sub(target - s)) {
                dead = true;
                cont.death = DeathKind::Coalesced;
            } else {
                s = target;
            }
        }
        cont.times.push_back(s);
        cont.L.push_back(lo);
        cont.U.push_back(up);
    }
    cont.tau = s;
    cont.censored = !dead;
    path.continuation = cont;

    Bubble b;
    b.sigma = path.jump_times.empty() ? 0.0 : path.jump_times.back();
    b.tau = cont.tau;
    b.death = cont.death;
    b.censored = cont.censored;
    double c_sigma = path.jump_positions.empty() ? path.C.front() : path.jump_positions.back();
    b.times.push_back(b.sigma);
    b.lower.push_back(c_sigma);
    b.upper.push_back(c_sigma);
    for (std::size_t k = 0; k < grid.size(); ++k) {
        double tk = grid.time(k);
        if (tk <= b.sigma) continue;
        b.times.push_back(tk);
        b.lower.push_back(path.L[k]);
        b.upper.push_back(path.U[k]);
    }
    for (std::size_t k = 1; k < cont.times.size(); ++k) {
        if (cont.times[k] <= b.times.back()) continue;
        b.times.push_back(cont.times[k]);
        b.lower.push_back(cont.L[k]);
        b.upper.push_back(cont.U[k]);
    }
    return {std::move(path), std::move(b)};
}

UniformityReport uniformity_check(std::span<const VeinState> states) {
    std::vector<double> ratio, gap;
    for (const auto& s : states) {
        double g = s.U - s.L;
        if (!(g > 0.0)) continue;
        ratio.push_back((s.C - s.L) / g);
        gap.push_back(g);
    }
    if (ratio.empty()) throw std::invalid_argument("uniformity_check: every state is degenerate");
    UniformityReport rep;
    rep.used = ratio.size();
    rep.ks.name = "uniformity_ks";
    rep.ks.statistic = ks_distance(ratio, uniform_cdf());
    rep.ks.threshold = 2.0 * ks_threshold(ratio.size());
    rep.ks.pass = rep.ks.statistic < rep.ks.threshold;
    rep.correlation = ratio.size() >= 2 ? pearson(ratio, gap) : 0.0;
    rep.ks.meta = {{"used", rep.used}, {"correlation", rep.correlation}};
    return rep;
}

Check conditioned_bessel_check(std::span<const ConditionedSample> samples, double lambda) {
    auto p = lambda_params(lambda);
    if (p.regime != Regime::Subcritical)
        throw std::invalid_argument("conditioned_bessel_check: lambda must be below 6");
    std::vector<double> v;
    for (const auto& s : samples) {
        double resid = s.t - s.sigma;
        if (!(resid > 0.0)) continue;
        double x = s.gap / std::sqrt(2.0);
        v.push_back(x * x / (2.0 * resid));
    }
    Check c;
    c.name = "conditioned_endpoint_ks";
    double shape = p.alpha / 2.0 + 1.0;
    c.statistic = ks_distance(v, gamma_cdf(shape));
    c.threshold = 0.03;
    c.pass = c.statistic < c.threshold;
    c.meta = {{"shape", shape}, {"used", v.size()}};
    return c;
}

}  // namespace marblesim
