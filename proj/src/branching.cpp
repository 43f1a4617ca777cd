#include "marblesim/branching.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>

#include "marblesim/parallel.hpp"

namespace marblesim {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

void require_bounded(const RateFunction& rate, const char* who) {
    if (!rate.bounded()) throw std::invalid_argument(std::string(who) + ": rate must be bounded (truncate first)");
}
}  // namespace

double PopulationState::total_mass() const {
    double s = 0.0;
    for (const auto& p : particles) s += p.mass;
    return s;
}

PopulationRun simulate_population(const RateFunction& rate, unsigned N, const std::vector<double>& initial_masses,
                                  const TimeGrid& grid, RngStream& rng, PopulationOptions opts) {
    require_bounded(rate, "simulate_population");
    if (N < 2) throw std::invalid_argument("simulate_population: N must be >= 2");
    if (!(opts.diffusivity > 0.0)) throw std::invalid_argument("simulate_population: diffusivity must be positive");
    const double m = rate.bound();
    const double d = opts.diffusivity;

    PopulationRun run;
    std::uint64_t next_id = 1;
    PopulationState cur;
    cur.time = grid.t0;
    for (double x : initial_masses) {
        if (!(x > 0.0)) throw std::invalid_argument("simulate_population: initial masses must be positive");
        cur.particles.push_back({x, next_id++, 0});
    }
    auto record = [&](const PopulationState& s) {
        run.series.push_back({s.time, s.particles.size(), s.total_mass()});
        if (opts.record_states) run.states.push_back(s);
    };
    record(cur);

    std::vector<std::pair<MassParticle, double>> work;
    for (std::size_t k = 1; k < grid.size() && !cur.particles.empty(); ++k) {
        double t_end = grid.time(k);
        PopulationState nxt;
        nxt.time = t_end;
        work.clear();
        for (auto it = cur.particles.rbegin(); it != cur.particles.rend(); ++it) work.emplace_back(*it, cur.time);
        while (!work.empty()) {
            auto [p, tau] = work.back();
            work.pop_back();
            for (;;) {
                double rem = t_end - tau;
                double e = m > 0.0 ? rng.exponential() / m : kInf;
                double h = std::min(e, rem);
                if (h > 0.0) {
                    double m1 = p.mass + std::sqrt(d * h) * rng.normal();
                    if (m1 <= 0.0 || rng.uniform() < std::exp(-2.0 * p.mass * m1 / (d * h))) break;  // killed
                    p.mass = m1;
                }
                if (e >= rem) {
                    nxt.particles.push_back(p);
                    break;
                }
                tau += e;
                if (!(rng.uniform() * m <= rate(p.mass))) continue;
                // split into N pieces; the last piece absorbs rounding so the sum is exact
                double g = p.mass;
                double piece = g / static_cast<double>(N);
                double acc = 0.0;
                std::uint64_t parent = p.id;
                for (unsigned i = 0; i + 1 < N; ++i) {
                    work.emplace_back(MassParticle{piece, next_id++, parent}, tau);
                    acc += piece;
                }
                double last = g - acc;
                ++run.n_splits;
                if (opts.record_splits) run.splits.push_back({tau, g, acc + last});
                p = MassParticle{last, next_id++, parent};
                if (nxt.particles.size() + work.size() + 1 > opts.cap) {
                    run.aborted = true;
                    break;
                }
            }
            if (run.aborted) break;
        }
        if (run.aborted) {
            for (auto& [q, tq] : work) nxt.particles.push_back(q);
            cur = std::move(nxt);
            break;
        }
        cur = std::move(nxt);
        record(cur);
    }
    if (!run.aborted) {
        // extinct populations stay empty; pad the series to the horizon
        while (run.series.size() < grid.size()) {
            double tk = grid.time(run.series.size());
            run.series.push_back({tk, 0, 0.0});
            if (opts.record_states) run.states.push_back({tk, {}});
        }
    }
    run.final_state = std::move(cur);
    return run;
}

namespace {

struct SpineRunner {
    const RateFunction& rate;
    RngStream& rng;
    double n_div;
    double m;
    double sd;  // sqrt(diffusivity)
    double x;
    double t;
    double next = kInf;
    std::vector<double>* jumps;
    std::size_t n_jumps = 0;

    void step_to(double target) {
        if (target > t) {
            x = sd * bessel3_step(x / sd, target - t, rng);
            t = target;
        }
    }

    void advance(double target) {
        while (next <= target) {
            step_to(next);
            bool accept = rng.uniform() * m <= rate(x);
            next += rng.exponential() / m;
            if (accept) {
                x /= n_div;
                ++n_jumps;
                if (jumps) jumps->push_back(t);
            }
        }
        step_to(target);
    }
};

}  // namespace

SpinePath simulate_spine(const RateFunction& rate, unsigned N, double x0, const TimeGrid& grid, RngStream& rng,
                         double diffusivity) {
    require_bounded(rate, "simulate_spine");
    if (!(x0 > 0.0)) throw std::invalid_argument("simulate_spine: x0 must be positive");
    if (N < 2) throw std::invalid_argument("simulate_spine: N must be >= 2");
    SpinePath p{grid, std::vector<double>(grid.size()), {}};
    p.mass[0] = x0;
    SpineRunner run{rate, rng, static_cast<double>(N), rate.bound(), std::sqrt(diffusivity), x0, grid.t0, kInf,
                    &p.jump_times};
    if (run.m > 0.0) run.next = grid.t0 + rng.exponential() / run.m;
    for (std::size_t k = 1; k < grid.size(); ++k) {
        run.advance(grid.time(k));
        p.mass[k] = run.x;
    }
    return p;
}

double spine_endpoint(const RateFunction& rate, unsigned N, double x0, double t, RngStream& rng, double diffusivity,
                      std::size_t* n_jumps) {
    require_bounded(rate, "simulate_spine");
    if (!(x0 > 0.0)) throw std::invalid_argument("simulate_spine: x0 must be positive");
    SpineRunner run{rate, rng, static_cast<double>(N), rate.bound(), std::sqrt(diffusivity), x0, 0.0, kInf, nullptr};
    if (run.m > 0.0) run.next = rng.exponential() / run.m;
    run.advance(t);
    if (n_jumps) *n_jumps = run.n_jumps;
    return run.x;
}

ManyToOneReport many_to_one_check(const RateFunction& rate, unsigned N, double y, double t,
                                  const std::function<double(double)>& f, std::uint64_t seed,
                                  ManyToOneOptions opts) {
    if (!(y > 0.0)) throw std::invalid_argument("many_to_one_check: y must be positive");
    if (!(t >= 0.0)) throw std::invalid_argument("many_to_one_check: t must be >= 0");
    if (opts.replicas < 2) throw std::invalid_argument("many_to_one_check: need at least two replicas");
    ManyToOneReport rep;
    if (t == 0.0) {
        rep.lhs = f(y);
        rep.rhs = y * f(y) / y;
        rep.mean_total_mass = y;
        return rep;
    }
    auto grid = TimeGrid::with_max_step(0.0, t, opts.dt);
    struct PopOut {
        double sum_f = 0.0;
        double mass = 0.0;
        bool aborted = false;
        std::vector<PopulationSample> series;
    };
    auto pop = run_replicas(opts.replicas, opts.workers, [&](std::size_t i) {
        RngStream rng(seed, i, StreamTag::Population);
        PopulationOptions po;
        po.diffusivity = opts.diffusivity;
        po.cap = opts.cap;
        auto r = simulate_population(rate, N, {y}, grid, rng, po);
        PopOut o;
        o.aborted = r.aborted;
        if (opts.keep_series) o.series = std::move(r.series);
        for (const auto& p : r.final_state.particles) {
            o.sum_f += f(p.mass);
            o.mass += p.mass;
        }
        return o;
    });
    auto spine = run_replicas(opts.replicas, opts.workers, [&](std::size_t i) {
        RngStream rng(seed, i, StreamTag::Spine);
        double x = spine_endpoint(rate, N, y, t, rng, opts.diffusivity);
        return y * f(x) / x;
    });
    std::vector<double> lhs, mass, rhs;
    std::size_t aborted = 0;
    for (auto& o : pop) {
        if (opts.keep_series) rep.series.push_back(std::move(o.series));
        if (o.aborted) {
            ++aborted;
            continue;
        }
        lhs.push_back(o.sum_f);
        mass.push_back(o.mass);
    }
    rhs = std::move(spine);
    rep.aborted_fraction = static_cast<double>(aborted) / static_cast<double>(opts.replicas);
    rep.valid = rep.aborted_fraction <= 0.01 && lhs.size() >= 2;
    if (lhs.size() >= 2) {
        rep.lhs = mean(lhs);
        rep.lhs_se = std::sqrt(sample_variance(lhs) / static_cast<double>(lhs.size()));
        rep.mean_total_mass = mean(mass);
        rep.total_mass_se = std::sqrt(sample_variance(mass) / static_cast<double>(mass.size()));
    }
    rep.rhs = mean(rhs);
    rep.rhs_se = std::sqrt(sample_variance(rhs) / static_cast<double>(rhs.size()));
    rep.pooled_se = std::hypot(rep.lhs_se, rep.rhs_se);
    rep.rel_diff = rep.lhs != 0.0 ? std::fabs(rep.lhs - rep.rhs) / std::fabs(rep.lhs) : INFINITY;
    rep.z = rep.pooled_se > 0.0 ? (rep.lhs - rep.rhs) / rep.pooled_se : 0.0;
    return rep;
}

}  // namespace marblesim
