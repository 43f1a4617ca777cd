#include "marblesim/marble.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "marblesim/parallel.hpp"
#include "marblesim/vein.hpp"

namespace marblesim {

long ParticleFront::gap_index(double x) const {
    auto it = std::upper_bound(positions.begin(), positions.end(), x);
    if (it == positions.begin() || it == positions.end()) return -1;
    auto i = static_cast<long>(it - positions.begin()) - 1;
    if (positions[static_cast<std::size_t>(i)] == x) return -1;
    return i;
}

std::size_t ParticleFront::count_in(double a, double b) const {
    auto lo = std::lower_bound(positions.begin(), positions.end(), a);
    auto hi = std::upper_bound(positions.begin(), positions.end(), b);
    return static_cast<std::size_t>(hi - lo);
}

namespace {

struct Front {
    std::vector<double> x;
    std::vector<std::uint64_t> id;
    std::vector<std::uint64_t> gid;

    void clear() {
        x.clear();
        id.clear();
        gid.clear();
    }
};

}  // namespace

MarbleTrace simulate_marble(const RateFunction& rate, std::pair<double, double> window, const TimeGrid& grid,
                            double delta, RngStream& rng, MarbleOptions opts) {
    if (!(delta > 0.0)) throw std::invalid_argument("simulate_marble: delta must be positive");
    if (!(window.second > window.first)) throw std::invalid_argument("simulate_marble: empty window");
    if (!rate.bounded()) throw std::invalid_argument("simulate_marble: rate must be bounded (truncate first)");
    const double m = rate.bound();
    const double dt = grid.dt;
    if (opts.enforce_step_bound && m * dt > 0.1 + 1e-12)
        throw std::invalid_argument("simulate_marble: M*dt exceeds 0.1; reduce dt");

    MarbleTrace tr;
    tr.grid = grid;
    tr.rate = rate;
    tr.delta = delta;
    tr.x_min = window.first;
    tr.x_max = window.second;
    tr.margin = opts.margin >= 0.0 ? opts.margin : 4.0 * std::sqrt(grid.t1() - grid.t0);
    tr.seed = rng.seed();

    std::uint64_t next_pid = 0;
    auto new_bubble = [&](double t, double lo, double up) {
        BubbleLife b;
        b.birth = t;
        b.lower0 = lo;
        b.upper0 = up;
        tr.lives.push_back(b);
        return static_cast<std::uint64_t>(tr.lives.size() - 1);
    };

    Front cur, nxt;
    {
        double a = tr.x_min - tr.margin, b = tr.x_max + tr.margin;
        auto count = static_cast<std::size_t>(std::floor((b - a) / delta)) + 1;
        for (std::size_t i = 0; i < count; ++i) {
            cur.x.push_back(a + static_cast<double>(i) * delta);
            cur.id.push_back(next_pid++);
        }
        for (std::size_t i = 0; i + 1 < count; ++i) cur.gid.push_back(new_bubble(grid.t0, cur.x[i], cur.x[i + 1]));
    }
    auto record = [&](double t) {
        ParticleFront f;
        f.time = t;
        f.positions = cur.x;
        f.ids = cur.id;
        f.gap_ids = cur.gid;
        tr.fronts.push_back(std::move(f));
    };
    record(grid.t0);

    const double sdt = std::sqrt(dt);
    std::vector<double> old_gap;
    std::vector<double> sog;  // old width of each stacked gap
    Front st;
    for (std::size_t k = 1; k < grid.size(); ++k) {
        const double tn = grid.time(k);
        const std::size_t n = cur.x.size();
        old_gap.resize(n > 0 ? n - 1 : 0);
        for (std::size_t i = 0; i + 1 < n; ++i) old_gap[i] = cur.x[i + 1] - cur.x[i];
        for (double& v : cur.x) v += sdt * rng.normal();

        // coalescence sweep
        st.clear();
        sog.clear();
        for (std::size_t i = 0; i < n; ++i) {
            if (!st.x.empty()) {
                st.gid.push_back(cur.gid[i - 1]);
                sog.push_back(old_gap[i - 1]);
            }
            st.x.push_back(cur.x[i]);
            st.id.push_back(cur.id[i]);
            bool first = true;
            while (st.x.size() >= 2) {
                std::size_t top = st.x.size() - 1;
                double xa = st.x[top - 1], xb = st.x[top];
                double g1 = xb - xa;
                bool met = g1 <= 0.0;
                if (!met && first && sog.back() > 0.0) {
                    double p = std::exp(-sog.back() * g1 / dt);
                    if (p > 1e-16) met = rng.uniform() < p;
                }
                first = false;
                if (!met) break;
                double pos = opts.merge == MergeRule::Midpoint ? 0.5 * (xa + xb) : xa;
                std::uint64_t b = st.gid.back();
                auto& life = tr.lives[b];
                life.alive = false;
                life.death = tn;
                life.kind = DeathKind::Coalesced;
                life.lowerD = life.upperD = pos;
                if (opts.record_coalescence)
                    tr.coalescence_events.push_back({tn, xa, xb, pos, st.id[top - 1], st.id[top], b});
                st.x.pop_back();
                st.id.pop_back();
                st.gid.pop_back();
                sog.pop_back();
                st.x.back() = pos;
            }
        }

        // fragmentation pass
        nxt.clear();
        const std::size_t sn = st.x.size();
        for (std::size_t j = 0; j < sn; ++j) {
            nxt.x.push_back(st.x[j]);
            nxt.id.push_back(st.id[j]);
            if (j + 1 == sn) break;
            double lo = st.x[j], up = st.x[j + 1];
            double g = up - lo;
            std::uint64_t b = st.gid[j];
            double r = m > 0.0 ? rate(g) : 0.0;
            bool frag = r > 0.0 && rng.uniform() < -std::expm1(-r * dt);
            if (!frag) {
                nxt.gid.push_back(b);
                continue;
            }
            auto& life = tr.lives[b];
            life.alive = false;
            life.death = tn;
            life.kind = DeathKind::Fragmented;
            life.lowerD = lo;
            life.upperD = up;
            auto kk = static_cast<std::size_t>(std::ceil(g / delta));
            if (kk < 1) kk = 1;
            double h = g / static_cast<double>(kk);
            double prev = lo;
            std::size_t inserted = 0;
            for (std::size_t q = 1; q < kk; ++q) {
                double p = lo + static_cast<double>(q) * h;
                if (!(p > prev) || !(p < up)) continue;
                nxt.gid.push_back(new_bubble(tn, prev, p));
                nxt.x.push_back(p);
                nxt.id.push_back(next_pid++);
                prev = p;
                ++inserted;
            }
            nxt.gid.push_back(new_bubble(tn, prev, up));
            tr.fragmentation_events.push_back({tn, lo, up, b, inserted});
        }
        std::swap(cur, nxt);

        bool last = k + 1 == grid.size();
        if (last || (opts.record_stride > 0 && k % opts.record_stride == 0)) record(tn);
    }
    return tr;
}

std::vector<std::size_t> BubbleSet::containing(double s, double x) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < bubbles.size(); ++i)
        if (bubbles[i].contains(s, x)) out.push_back(i);
    return out;
}

BubbleSet extract_bubbles(const MarbleTrace& trace) {
    BubbleSet set;
    set.bubbles.resize(trace.lives.size());
    const double horizon = trace.fronts.empty() ? trace.grid.t0 : trace.fronts.back().time;
    for (std::size_t b = 0; b < trace.lives.size(); ++b) {
        const auto& life = trace.lives[b];
        auto& bb = set.bubbles[b];
        bb.id = b;
        bb.sigma = life.birth;
        bb.tau = life.alive ? horizon : life.death;
        bb.death = life.kind;
        bb.censored = life.alive;
        bb.times.push_back(life.birth);
        bb.lower.push_back(life.lower0);
        bb.upper.push_back(life.upper0);
    }
    for (const auto& f : trace.fronts) {
        for (std::size_t j = 0; j < f.gap_ids.size(); ++j) {
            auto& bb = set.bubbles[f.gap_ids[j]];
            if (f.time <= bb.times.back()) continue;
            bb.times.push_back(f.time);
            bb.lower.push_back(f.positions[j]);
            bb.upper.push_back(f.positions[j + 1]);
        }
    }
    for (std::size_t b = 0; b < trace.lives.size(); ++b) {
        const auto& life = trace.lives[b];
        auto& bb = set.bubbles[b];
        if (life.alive || life.death <= bb.times.back()) continue;
        bb.times.push_back(life.death);
        bb.lower.push_back(life.lowerD);
        bb.upper.push_back(life.upperD);
    }
    return set;
}

PointBubble bubble_at(const MarbleTrace& trace, double x) {
    PointBubble pb;
    if (trace.fronts.empty()) return pb;
    const auto& f = trace.fronts.back();
    long i = f.gap_index(x);
    if (i < 0) return pb;
    auto j = static_cast<std::size_t>(i);
    pb.found = true;
    pb.lower = f.positions[j];
    pb.upper = f.positions[j + 1];
    pb.height = pb.upper - pb.lower;
    pb.bubble_id = f.gap_ids[j];
    pb.sigma = trace.lives[pb.bubble_id].birth;
    return pb;
}

double area_fraction(const MarbleTrace& trace, const std::vector<double>& slice_times, double threshold) {
    if (trace.fronts.empty() || slice_times.empty()) throw std::invalid_argument("area_fraction: nothing to measure");
    double width = trace.x_max - trace.x_min;
    double total = 0.0;
    for (double s : slice_times) {
        auto it = std::min_element(trace.fronts.begin(), trace.fronts.end(), [s](const auto& a, const auto& b) {
            return std::fabs(a.time - s) < std::fabs(b.time - s);
        });
        double covered = 0.0;
        const auto& p = it->positions;
        for (std::size_t j = 0; j + 1 < p.size(); ++j) {
            if (p[j + 1] - p[j] <= threshold) continue;
            double lo = std::max(p[j], trace.x_min), up = std::min(p[j + 1], trace.x_max);
            if (up > lo) covered += up - lo;
        }
        total += covered / width;
    }
    return total / static_cast<double>(slice_times.size());
}

namespace {

RateFunction ladder_rate(double lambda, double n) {
    return lambda > 0.0 ? RateFunction::truncated_power_law(lambda, n) : RateFunction::constant(0.0);
}

}  // namespace

ConvergenceReport truncation_convergence(double lambda, const std::vector<double>& levels, std::uint64_t seed,
                                         ConvergenceOptions opts) {
    if (!(lambda >= 0.0)) throw std::invalid_argument("truncation_convergence: lambda must be >= 0");
    if (levels.size() < 2) throw std::invalid_argument("truncation_convergence: need at least two levels");
    if (opts.replicas == 0) throw std::invalid_argument("truncation_convergence: need replicas");
    double nmax = *std::max_element(levels.begin(), levels.end());
    double dt = opts.dt > 0.0 ? opts.dt : std::min(0.1 / nmax, 1e-3 * opts.t);
    auto grid = TimeGrid::with_max_step(0.0, opts.t, dt);
    MarbleOptions mo;
    mo.record_coalescence = false;
    mo.record_stride = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(0.01 * opts.t / grid.dt)));
    std::vector<double> slices;
    for (double s : opts.slices) slices.push_back(s * opts.t);
    double z = 0.5 * (opts.window.first + opts.window.second);

    ConvergenceReport rep;
    rep.lambda = lambda;
    for (double n : levels) {
        auto rate = ladder_rate(lambda, n);
        struct Out {
            double area = 0.0, height = 0.0;
            std::size_t frags = 0;
        };
        auto outs = run_replicas(opts.replicas, opts.workers, [&](std::size_t i) {
            RngStream rng(seed, i, StreamTag::Marble);
            auto tr = simulate_marble(rate, opts.window, grid, opts.delta, rng, mo);
            Out o;
            o.area = area_fraction(tr, slices, opts.height_threshold);
            o.height = bubble_at(tr, z).height;
            o.frags = tr.fragmentation_events.size();
            return o;
        });
        ConvergenceLevel lv;
        lv.n = n;
        std::size_t frags = 0;
        for (auto& o : outs) {
            lv.area_fraction += o.area;
            lv.heights.push_back(o.height);
            frags += o.frags;
        }
        lv.area_fraction /= static_cast<double>(outs.size());
        lv.fragmentations = frags / outs.size();
        rep.levels.push_back(std::move(lv));
    }
    rep.area_strictly_decreasing = true;
    for (std::size_t j = 1; j < rep.levels.size(); ++j)
        rep.area_strictly_decreasing =
            rep.area_strictly_decreasing && rep.levels[j].area_fraction < rep.levels[j - 1].area_fraction;
    const auto& a = rep.levels[rep.levels.size() - 2];
    const auto& b = rep.levels.back();
    rep.last_relative_change =
        a.area_fraction > 0.0 ? std::fabs(b.area_fraction - a.area_fraction) / a.area_fraction : INFINITY;
    rep.last_height_ks = ks_two_sample(a.heights, b.heights);
    if (lambda >= 6.0) {
        rep.verdict.name = "area_fraction_strictly_decreasing";
        rep.verdict.statistic = b.area_fraction;
        rep.verdict.threshold = a.area_fraction;
        rep.verdict.pass = rep.area_strictly_decreasing;
    } else {
        rep.verdict.name = "area_fraction_relative_change";
        rep.verdict.statistic = rep.last_relative_change;
        rep.verdict.threshold = 0.2;
        rep.verdict.pass = rep.last_relative_change < 0.2;
    }
    rep.verdict.meta = {{"height_ks_last_two", rep.last_height_ks}, {"dt", grid.dt}, {"replicas", opts.replicas}};
    return rep;
}

CrossCheckReport marble_vs_vein_crosscheck(double lambda, double n, double t, double z, std::uint64_t seed,
                                           CrossCheckOptions opts) {
    if (!(lambda >= 0.0 && lambda < 6.0)) throw std::invalid_argument("marble_vs_vein_crosscheck: need 0 <= lambda < 6");
    if (!(t > 0.0)) throw std::invalid_argument("marble_vs_vein_crosscheck: t must be positive");
    auto rate = ladder_rate(lambda, n);
    double dt = opts.dt > 0.0 ? opts.dt : std::min(0.1 / std::max(rate.bound(), 1e-300), 1e-3 * t);
    auto grid = TimeGrid::with_max_step(0.0, t, dt);
    MarbleOptions mo;
    mo.record_stride = 0;
    mo.record_coalescence = false;
    CrossCheckReport rep;
    rep.marble_heights = run_replicas(opts.replicas, opts.workers, [&](std::size_t i) {
        RngStream rng(seed, i, StreamTag::Marble);
        auto tr = simulate_marble(rate, opts.window, grid, opts.delta, rng, mo);
        return bubble_at(tr, z).height;
    });
    auto vgrid = TimeGrid::with_max_step(0.0, t, std::min(grid.dt, 1e-3 * t));
    rep.vein_heights = run_replicas(opts.replicas, opts.workers, [&](std::size_t i) {
        RngStream rng(seed, i, StreamTag::Vein);
        return simulate_vein_endpoint(rate, {0.0, 0.0, 0.0}, vgrid, rng).state.gap();
    });
    rep.ks.name = "marble_vs_vein_height_ks";
    rep.ks.statistic = ks_two_sample(rep.marble_heights, rep.vein_heights);
    rep.ks.threshold = 0.05;
    rep.ks.pass = rep.ks.statistic < rep.ks.threshold;
    rep.ks.meta = {{"lambda", lambda}, {"n", n}, {"t", t}, {"z", z}, {"delta", opts.delta}, {"dt", grid.dt},
                   {"replicas", opts.replicas}};
    return rep;
}

}  // namespace marblesim
