#include "marblesim/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <CLI11.hpp>
#include <json.hpp>

#include "marblesim/analysis.hpp"
#include "marblesim/branching.hpp"
#include "marblesim/marble.hpp"
#include "marblesim/parallel.hpp"
#include "marblesim/rbessel.hpp"
#include "marblesim/render.hpp"
#include "marblesim/vein.hpp"

namespace marblesim::cli {

using nlohmann::json;

namespace {

// Population cap exceeded in too many runs.
struct RuntimeAbort : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::string join(const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + format_double(v[i]);
    return s;
}

RateFunction make_rate(const ExperimentConfig& c) {
    if (c.rate == "constant") return RateFunction::constant(c.r0);
    if (c.rate == "half") return RateFunction::half_lambda_trunc(c.lambda);
    return c.lambda > 0.0 ? RateFunction::truncated_power_law(c.lambda, c.n) : RateFunction::constant(0.0);
}

bool power_family(const ExperimentConfig& c) { return c.rate == "trunc" || c.rate == "half"; }

double law_threshold(std::size_t n) { return std::max(0.03, ks_threshold(n)); }

Check ks_check(std::string name, std::span<const double> v, const Cdf& cdf, json meta = json::object()) {
    Check c;
    c.name = std::move(name);
    c.statistic = ks_distance(v, cdf);
    c.threshold = law_threshold(v.size());
    c.pass = c.statistic < c.threshold;
    meta["used"] = v.size();
    c.meta = std::move(meta);
    return c;
}

Check bound_check(std::string name, double statistic, double threshold, json meta = json::object()) {
    return {std::move(name), statistic, threshold, statistic < threshold, std::move(meta)};
}

class Outputs {
public:
    explicit Outputs(const ExperimentConfig& cfg) : cfg_(cfg), dir_(cfg.out) {
        csv_ = std::find(cfg.formats.begin(), cfg.formats.end(), "csv") != cfg.formats.end();
        json_ = std::find(cfg.formats.begin(), cfg.formats.end(), "json") != cfg.formats.end();
        std::error_code ec;
        std::filesystem::create_directories(dir_, ec);
        if (ec) throw std::runtime_error("cannot create output directory " + dir_.string() + ": " + ec.message());
    }

    bool csv() const { return csv_; }
    std::filesystem::path path(const std::string& name) const { return dir_ / name; }

    // Opens a CSV file with the provenance header and the column row written.
    std::ofstream open_csv(const std::string& name, const std::vector<std::string>& columns) const {
        auto p = path(name);
        std::ofstream f(p, std::ios::binary);
        if (!f) throw std::runtime_error("cannot open " + p.string());
        f << "# marblesim " << kVersion << "\r\n";
        for (const auto& [k, v] : provenance(cfg_)) f << "# " << k << '=' << v << "\r\n";
        for (std::size_t i = 0; i < columns.size(); ++i) f << (i ? "," : "") << csv_field(columns[i]);
        f << "\r\n";
        return f;
    }

    void write_json(const std::string& name, json body) const {
        if (!json_) return;
        json prov = json::object();
        for (const auto& [k, v] : provenance(cfg_)) prov[k] = v;
        body["tool"] = "marblesim";
        body["version"] = kVersion;
        body["provenance"] = prov;
        auto p = path(name);
        std::ofstream f(p, std::ios::binary);
        if (!f) throw std::runtime_error("cannot open " + p.string());
        f << body.dump(2) << '\n';
        if (!f) throw std::runtime_error("write failed for " + p.string());
    }

private:
    const ExperimentConfig& cfg_;
    std::filesystem::path dir_;
    bool csv_ = true, json_ = true;
};

void row(std::ostream& f, std::initializer_list<std::string> cells) {
    bool first = true;
    for (const auto& c : cells) {
        f << (first ? "" : ",") << csv_field(c);
        first = false;
    }
    f << "\r\n";
}

std::string fd(double v) { return format_double(v); }
std::string fu(std::size_t v) { return std::to_string(v); }

int finish(const Outputs& out, const std::string& name, const std::vector<Check>& checks, json summary,
           std::ostream& log) {
    bool pass = true;
    json arr = json::array();
    for (const auto& c : checks) {
        pass = pass && c.pass;
        arr.push_back(to_json(c));
        log << c.name << ": statistic " << fd(c.statistic) << " threshold " << fd(c.threshold) << ' '
            << (c.pass ? "PASS" : "FAIL") << '\n';
    }
    json body;
    body["command"] = name;
    body["checks"] = arr;
    body["summary"] = std::move(summary);
    body["pass"] = pass;
    out.write_json(name + ".json", std::move(body));
    return pass ? kPass : kAcceptanceFail;
}

int cmd_bessel(const ExperimentConfig& cfg, std::ostream& log) {
    Outputs out(cfg);
    auto rate = make_rate(cfg);
    auto rows = run_replicas(cfg.replicas, cfg.workers, [&](std::size_t i) {
        RngStream rng(cfg.seed, i, StreamTag::Bessel);
        return simulate_rbessel_endpoint(rate, cfg.x0, cfg.t, rng);
    });
    if (out.csv()) {
        auto f = out.open_csv("bessel.csv", {"replica", "n", "lambda", "t", "X_t", "sigma_t", "n_jumps", "max_excursion"});
        double n = cfg.rate == "trunc" ? cfg.n : 0.0;
        double lam = power_family(cfg) ? cfg.lambda : 0.0;
        for (std::size_t i = 0; i < rows.size(); ++i)
            row(f, {fu(i), fd(n), fd(lam), fd(cfg.t), fd(rows[i].x_t), fd(rows[i].sigma_t), fu(rows[i].n_jumps),
                    fd(rows[i].max_excursion)});
    }
    std::vector<double> birth, height, cond, jumps, xs;
    for (const auto& r : rows) {
        birth.push_back(r.sigma_t / cfg.t);
        height.push_back(r.x_t * r.x_t / (2.0 * cfg.t));
        if (cfg.t > r.sigma_t) cond.push_back(r.x_t * r.x_t / (2.0 * (cfg.t - r.sigma_t)));
        jumps.push_back(static_cast<double>(r.n_jumps));
        xs.push_back(r.x_t);
    }
    std::vector<Check> checks;
    json summary = {{"median_X_t", median(xs)}, {"mean_jumps", mean(jumps)}, {"replicas", rows.size()}};
    if (power_family(cfg) && cfg.x0 == 0.0) {
        auto p = lambda_params(cfg.lambda);
        summary["alpha"] = p.alpha;
        summary["beta"] = p.beta;
        summary["c"] = p.c;
        summary["regime"] = regime_name(p.regime);
        if (p.regime == Regime::Subcritical) {
            if (cfg.lambda > 0.0)
                checks.push_back(ks_check("ks_beta", birth, beta_cdf(p.beta, 1.0 - p.beta), {{"target", "Beta(beta,1-beta)"}}));
            checks.push_back(ks_check("ks_gamma", height, gamma_cdf(p.c), {{"target", "Gamma(c)"}}));
            checks.push_back(ks_check("ks_conditional", cond, gamma_cdf(p.alpha / 2.0 + 1.0),
                                      {{"target", "Gamma(alpha/2+1)"}}));
        }
    } else if (cfg.rate == "constant") {
        double mu = cfg.r0 * cfg.t;
        double se = std::sqrt(std::max(mu, 1e-300) / static_cast<double>(rows.size()));
        checks.push_back(bound_check("jump_count_mean", std::fabs(mean(jumps) - mu) / se, 3.0, {{"target", mu}}));
    }
    return finish(out, "bessel", checks, summary, log);
}

int cmd_vein(const ExperimentConfig& cfg, std::ostream& log) {
    Outputs out(cfg);
    auto rate = make_rate(cfg);
    struct Out {
        VeinState s;
        double sigma = 0.0, tau = 0.0;
        DeathKind death = DeathKind::Coalesced;
        bool censored = false;
        std::size_t jumps = 0;
    };
    auto rows = run_replicas(cfg.replicas, cfg.workers, [&](std::size_t i) {
        RngStream rng(cfg.seed, i, StreamTag::Vein);
        auto [path, b] = bubble_at_point(rate, cfg.t, cfg.point, cfg.dt, rng);
        return Out{path.final_state(), b.sigma, b.tau, b.death, b.censored, path.jump_times.size()};
    });
    if (out.csv()) {
        auto f = out.open_csv("vein.csv",
                              {"replica", "lambda", "n", "t", "L_t", "C_t", "U_t", "sigma", "tau", "death_kind"});
        double n = cfg.rate == "trunc" ? cfg.n : 0.0;
        double lam = power_family(cfg) ? cfg.lambda : 0.0;
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const auto& r = rows[i];
            row(f, {fu(i), fd(lam), fd(n), fd(cfg.t), fd(r.s.L), fd(r.s.C), fd(r.s.U), fd(r.sigma), fd(r.tau),
                    r.censored ? "censored" : death_kind_name(r.death)});
        }
    }
    std::vector<VeinState> states;
    std::vector<ConditionedSample> cs;
    std::vector<double> birth, height, gaps;
    std::size_t coalesced = 0, fragmented = 0, censored = 0;
    for (const auto& r : rows) {
        states.push_back(r.s);
        cs.push_back({r.s.gap(), r.sigma, cfg.t});
        birth.push_back(r.sigma / cfg.t);
        double x = r.s.gap() / std::sqrt(2.0);
        height.push_back(x * x / (2.0 * cfg.t));
        gaps.push_back(r.s.gap());
        if (r.censored)
            ++censored;
        else if (r.death == DeathKind::Coalesced)
            ++coalesced;
        else
            ++fragmented;
    }
    std::vector<Check> checks;
    json summary = {{"median_gap", median(gaps)}, {"coalesced", coalesced}, {"fragmented", fragmented},
                    {"censored", censored}, {"replicas", rows.size()}};
    bool any_gap = std::any_of(gaps.begin(), gaps.end(), [](double g) { return g > 0.0; });
    if (any_gap) {
        auto u = uniformity_check(states);
        checks.push_back(u.ks);
        checks.push_back(bound_check("uniformity_correlation", std::fabs(u.correlation),
                                     std::max(0.05, 3.0 / std::sqrt(static_cast<double>(u.used)))));
    }
    if (power_family(cfg)) {
        auto p = lambda_params(cfg.lambda);
        summary["regime"] = regime_name(p.regime);
        if (p.regime == Regime::Subcritical) {
            if (cfg.lambda > 0.0)
                checks.push_back(ks_check("ks_birth", birth, beta_cdf(p.beta, 1.0 - p.beta), {{"target", "Beta(beta,1-beta)"}}));
            checks.push_back(ks_check("ks_height", height, gamma_cdf(p.c),
                                      {{"target", "Gamma(c)"}, {"variable", "(U-L)^2/(4t)"}}));
            auto c = conditioned_bessel_check(cs, cfg.lambda);
            c.threshold = law_threshold(rows.size());
            c.pass = c.statistic < c.threshold;
            checks.push_back(c);
        }
    }
    return finish(out, "vein", checks, summary, log);
}

int cmd_marble(const ExperimentConfig& cfg, std::ostream& log) {
    Outputs out(cfg);
    auto rate = make_rate(cfg);
    auto grid = TimeGrid::with_max_step(0.0, cfg.t, cfg.dt);
    std::pair<double, double> window{cfg.window[0], cfg.window[1]};
    double z = cfg.z ? *cfg.z : 0.5 * (window.first + window.second);
    struct Ev {
        bool frag;
        double time, L, U;
    };
    struct Out {
        std::size_t clusters = 0;
        PointBubble pb;
        std::size_t frags = 0, coals = 0;
        bool sorted = true, conserved = true;
        std::vector<Ev> events;
    };
    auto rows = run_replicas(cfg.replicas, cfg.workers, [&](std::size_t i) {
        RngStream rng(cfg.seed, i, StreamTag::Marble);
        MarbleOptions mo;
        mo.record_stride = 0;
        auto tr = simulate_marble(rate, window, grid, cfg.delta, rng, mo);
        Out o;
        const auto& f = tr.fronts.back();
        o.clusters = f.count_in(window.first, window.second);
        o.pb = bubble_at(tr, z);
        o.frags = tr.fragmentation_events.size();
        o.coals = tr.coalescence_events.size();
        o.sorted = std::adjacent_find(f.positions.begin(), f.positions.end(), std::greater_equal<>()) == f.positions.end();
        std::size_t fragmented = 0;
        for (const auto& l : tr.lives) fragmented += !l.alive && l.kind == DeathKind::Fragmented;
        o.conserved = fragmented == o.frags;
        if (out.csv()) {
            std::size_t a = 0, b = 0;
            auto& ce = tr.coalescence_events;
            auto& fe = tr.fragmentation_events;
            while (a < ce.size() || b < fe.size()) {
                if (b >= fe.size() || (a < ce.size() && ce[a].time <= fe[b].time)) {
                    o.events.push_back({false, ce[a].time, ce[a].L, ce[a].U});
                    ++a;
                } else {
                    o.events.push_back({true, fe[b].time, fe[b].L, fe[b].U});
                    ++b;
                }
            }
        }
        return o;
    });
    if (out.csv()) {
        auto f = out.open_csv("marble.csv", {"replica", "clusters_in_window", "height_at_z", "sigma_at_z",
                                             "fragmentations", "coalescences"});
        for (std::size_t i = 0; i < rows.size(); ++i)
            row(f, {fu(i), fu(rows[i].clusters), fd(rows[i].pb.height), fd(rows[i].pb.sigma), fu(rows[i].frags),
                    fu(rows[i].coals)});
        auto e = out.open_csv("marble_events.csv", {"replica", "event_kind", "time", "L", "U"});
        for (std::size_t i = 0; i < rows.size(); ++i)
            for (const auto& ev : rows[i].events)
                row(e, {fu(i), ev.frag ? "fragment" : "coalesce", fd(ev.time), fd(ev.L), fd(ev.U)});
    }
    double width = window.second - window.first;
    std::vector<double> density, heights;
    std::size_t unsorted = 0, broken = 0;
    for (const auto& r : rows) {
        density.push_back(static_cast<double>(r.clusters) / width);
        heights.push_back(r.pb.height);
        unsorted += !r.sorted;
        broken += !r.conserved;
    }
    json summary = {{"cluster_density_mean", mean(density)},
                    {"height_at_z_mean", mean(heights)},
                    {"z", z},
                    {"dt", grid.dt},
                    {"delta", cfg.delta},
                    {"replicas", rows.size()}};
    if (rows.size() >= 2) summary["cluster_density_se"] = std::sqrt(sample_variance(density) / rows.size());
    if (rate.bound() == 0.0) {
        summary["density_coalescing_bm"] = 1.0 / std::sqrt(std::numbers::pi * cfg.t);
        summary["density_sqrt_2pi_t"] = 1.0 / std::sqrt(2.0 * std::numbers::pi * cfg.t);
    }
    std::vector<Check> checks{bound_check("front_strictly_sorted", static_cast<double>(unsorted), 1.0),
                              bound_check("fragmentation_log_conserved", static_cast<double>(broken), 1.0)};
    if (cfg.render || cfg.svg) {
        RngStream rng(cfg.seed, 0, StreamTag::Marble);
        MarbleOptions mo;
        mo.record_stride = std::max<std::size_t>(1, grid.n_steps / (2 * static_cast<std::size_t>(cfg.width)));
        auto tr = simulate_marble(rate, window, grid, cfg.delta, rng, mo);
        auto bubbles = extract_bubbles(tr);
        auto view = default_viewport(tr);
        if (cfg.render) {
            write_ppm(render_marble(tr, bubbles, view, cfg.width, cfg.height, cfg.palette_seed),
                      out.path("marble.ppm").string());
            log << "wrote " << out.path("marble.ppm").string() << '\n';
        }
        if (cfg.svg) {
            write_svg(tr, bubbles, view, cfg.width, cfg.height, cfg.palette_seed, out.path("marble.svg").string());
            log << "wrote " << out.path("marble.svg").string() << '\n';
        }
    }
    return finish(out, "marble", checks, summary, log);
}

int cmd_branching(const ExperimentConfig& cfg, std::ostream& log) {
    Outputs out(cfg);
    auto rate = make_rate(cfg);
    ManyToOneOptions mo;
    mo.replicas = cfg.replicas;
    mo.dt = cfg.dt;
    mo.cap = cfg.cap;
    mo.workers = cfg.workers;
    mo.keep_series = out.csv();
    auto f = [](double x) { return x * std::exp(-x); };
    auto rep = many_to_one_check(rate, cfg.split, cfg.y, cfg.t, f, cfg.seed, mo);
    if (out.csv()) {
        auto file = out.open_csv("branching.csv", {"replica", "time", "n_alive", "total_mass"});
        for (std::size_t i = 0; i < rep.series.size(); ++i)
            for (const auto& s : rep.series[i]) row(file, {fu(i), fd(s.time), fu(s.n_alive), fd(s.total_mass)});
    }
    json summary = {{"lhs", rep.lhs},
                    {"lhs_se", rep.lhs_se},
                    {"rhs", rep.rhs},
                    {"rhs_se", rep.rhs_se},
                    {"rel_diff", rep.rel_diff},
                    {"z", rep.z},
                    {"aborted_fraction", rep.aborted_fraction},
                    {"valid", rep.valid},
                    {"mean_total_mass", rep.mean_total_mass},
                    {"total_mass_se", rep.total_mass_se},
                    {"test_function", "x*exp(-x)"}};
    std::vector<Check> checks;
    checks.push_back(bound_check("many_to_one", std::fabs(rep.z), 3.0, {{"rel_diff", rep.rel_diff}}));
    double mz = rep.total_mass_se > 0.0 ? std::fabs(rep.mean_total_mass - cfg.y) / rep.total_mass_se : 0.0;
    checks.push_back(bound_check("mass_conservation", mz, 3.0));
    int code = finish(out, "branching", checks, summary, log);
    if (!rep.valid)
        throw RuntimeAbort("population cap exceeded in " + fd(100.0 * rep.aborted_fraction) + "% of runs");
    return code;
}

int cmd_sweep(const ExperimentConfig& cfg, std::ostream& log) {
    Outputs out(cfg);
    const bool super = cfg.lambda >= 6.0;
    const double extend = super ? 100.0 * cfg.t : 0.0;
    auto rows = run_replicas(cfg.replicas, cfg.workers, [&](std::size_t i) {
        RngStream rng(cfg.seed, i, StreamTag::Ladder);
        return ladder_endpoint(cfg.lambda, 0.0, cfg.t, cfg.levels, rng, extend);
    });
    const std::size_t nl = cfg.levels.size();
    if (out.csv()) {
        auto f = out.open_csv("sweep.csv", {"replica", "n", "lambda", "t", "X_t", "sigma_t", "n_jumps", "max_excursion"});
        for (std::size_t i = 0; i < rows.size(); ++i)
            for (std::size_t j = 0; j < nl; ++j) {
                const auto& e = rows[i][j];
                row(f, {fu(i), fd(cfg.levels[j]), fd(cfg.lambda), fd(cfg.t), fd(e.x_t), fd(e.sigma_t), fu(e.n_jumps),
                        fd(e.max_excursion)});
            }
    }
    std::vector<double> med, q90;
    std::size_t censored = 0;
    json levels = json::array();
    for (std::size_t j = 0; j < nl; ++j) {
        std::vector<double> x, mx;
        for (const auto& r : rows) {
            x.push_back(r[j].x_t);
            mx.push_back(r[j].max_excursion);
            censored += r[j].censored;
        }
        med.push_back(median(x));
        q90.push_back(quantile(mx, 0.9));
        levels.push_back({{"n", cfg.levels[j]}, {"median_X_t", med.back()}, {"q90_max_excursion", q90.back()}});
    }
    auto violations = [](const std::vector<double>& v) {
        double k = 0;
        for (std::size_t j = 1; j < v.size(); ++j) k += !(v[j] < v[j - 1]);
        return k;
    };
    json summary = {{"levels", levels}, {"censored", censored}, {"replicas", rows.size()}};
    std::vector<Check> checks;
    if (super) {
        checks.push_back(bound_check("median_strictly_decreasing", violations(med), 1.0, {{"unit", "violations"}}));
        checks.push_back(bound_check("q90_max_excursion_strictly_decreasing", violations(q90), 1.0,
                                     {{"unit", "violations"}}));
    } else if (nl >= 2 && med[nl - 2] > 0.0) {
        double ratio = med[nl - 1] / med[nl - 2];
        checks.push_back(bound_check("two_level_median_ratio", std::fabs(ratio - 1.0), 0.2, {{"ratio", ratio}}));
    }
    return finish(out, "sweep", checks, summary, log);
}

void add_common(CLI::App* s, ExperimentConfig& c, std::string& config_path) {
    s->add_option("--config", config_path, "key=value config file (flags win)");
    s->add_option("--seed", c.seed, "root seed");
    s->add_option("--replicas", c.replicas, "independent replicas")->check(CLI::PositiveNumber);
    s->add_option("--t", c.t, "horizon")->check(CLI::PositiveNumber);
    s->add_option("--dt", c.dt, "time step (0: command default)")->check(CLI::NonNegativeNumber);
    s->add_option("--workers", c.workers, "worker threads (0: MARBLESIM_WORKERS or hardware)");
    s->add_option("--out", c.out, "output directory");
    s->add_option("--format", c.formats, "comma list of csv,json")->delimiter(',')->check(CLI::IsMember({"csv", "json"}));
}

void add_rate(CLI::App* s, ExperimentConfig& c) {
    s->add_option("--lambda", c.lambda, "power-law coefficient")->check(CLI::NonNegativeNumber);
    s->add_option("--n", c.n, "truncation level")->check(CLI::PositiveNumber);
    s->add_option("--rate", c.rate, "trunc | half | constant")->check(CLI::IsMember({"trunc", "half", "constant"}));
    s->add_option("--r0", c.r0, "constant rate")->check(CLI::NonNegativeNumber);
}

}  // namespace

std::vector<std::pair<std::string, std::string>> read_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot read config file " + path);
    std::vector<std::pair<std::string, std::string>> kv;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos || trim(line.substr(0, eq)).empty())
            throw std::invalid_argument(path + ":" + std::to_string(lineno) + ": expected key=value");
        kv.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return kv;
}

void resolve(ExperimentConfig& c) {
    const std::string& cmd = c.command;
    if (c.rate.empty()) c.rate = cmd == "branching" ? "constant" : "trunc";
    if (c.replicas == 0) c.replicas = cmd == "marble" ? 1 : 10000;
    if (!(c.t > 0.0)) throw std::invalid_argument("t must be positive");
    if (c.lambda < 0.0) throw std::invalid_argument("lambda must be >= 0");
    if (c.rate == "trunc" && !(c.n > 0.0)) throw std::invalid_argument("n must be positive");
    if (c.window.size() != 2 || !(c.window[1] > c.window[0]))
        throw std::invalid_argument("window must be two increasing numbers");
    if (c.palette_seed == 0) c.palette_seed = c.seed;
    if (c.workers == 0) c.workers = default_workers();
    if (cmd == "branching") {
        if (c.split < 2) throw std::invalid_argument("N must be >= 2");
        if (!(c.y > 0.0)) throw std::invalid_argument("y must be positive");
        if (c.rate == "half") throw std::invalid_argument("branching supports rate trunc or constant");
        if (c.dt == 0.0) c.dt = 0.01;
    } else if (c.dt == 0.0) {
        c.dt = 1e-3 * c.t;
    }
    if (cmd == "marble") {
        double m = make_rate(c).bound();
        if (m > 0.0 && c.dt > 0.1 / m) c.dt = std::min(c.dt, 0.1 / m);
        if (m * c.dt > 0.1 + 1e-12) throw std::invalid_argument("M*dt must not exceed 0.1");
        if (c.delta == 0.0) c.delta = std::sqrt(c.dt) / 10.0;
        if (!(c.delta > 0.0) || c.delta > std::sqrt(c.dt)) throw std::invalid_argument("delta must lie in (0, sqrt(dt)]");
        if (c.z && !(*c.z > c.window[0] && *c.z < c.window[1])) throw std::invalid_argument("z must lie inside the window");
        if (c.width <= 0 || c.height <= 0) throw std::invalid_argument("image size must be positive");
    }
    if (cmd == "sweep") {
        if (c.levels.empty()) throw std::invalid_argument("levels must be nonempty");
        for (std::size_t j = 0; j < c.levels.size(); ++j)
            if (!(c.levels[j] > 0.0) || (j && !(c.levels[j] > c.levels[j - 1])))
                throw std::invalid_argument("levels must be positive and strictly increasing");
    }
}

std::string format_double(double v) {
    char buf[64];
    auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char ch : s) {
        if (ch == '"') q += '"';
        q += ch;
    }
    return q + '"';
}

std::vector<std::pair<std::string, std::string>> provenance(const ExperimentConfig& c) {
    std::vector<std::pair<std::string, std::string>> p{{"command", c.command}, {"seed", std::to_string(c.seed)},
                                                        {"replicas", std::to_string(c.replicas)}, {"t", fd(c.t)},
                                                        {"dt", fd(c.dt)}};
    const std::string& cmd = c.command;
    if (cmd == "sweep") {
        p.emplace_back("lambda", fd(c.lambda));
        p.emplace_back("levels", join(c.levels));
    } else {
        p.emplace_back("rate", c.rate);
        if (c.rate == "constant") {
            p.emplace_back("r0", fd(c.r0));
        } else {
            p.emplace_back("lambda", fd(c.lambda));
            if (c.rate == "trunc") p.emplace_back("n", fd(c.n));
        }
    }
    if (cmd == "bessel") p.emplace_back("x0", fd(c.x0));
    if (cmd == "vein") p.emplace_back("x", fd(c.point));
    if (cmd == "marble") {
        p.emplace_back("delta", fd(c.delta));
        p.emplace_back("window", join(c.window));
        p.emplace_back("z", c.z ? fd(*c.z) : "centre");
        if (c.render || c.svg) {
            p.emplace_back("width", std::to_string(c.width));
            p.emplace_back("height", std::to_string(c.height));
            p.emplace_back("palette_seed", std::to_string(c.palette_seed));
        }
    }
    if (cmd == "branching") {
        p.emplace_back("N", std::to_string(c.split));
        p.emplace_back("y", fd(c.y));
        p.emplace_back("cap", std::to_string(c.cap));
    }
    return p;
}

int run_command(const ExperimentConfig& cfg, std::ostream& log) {
    if (cfg.command == "bessel") return cmd_bessel(cfg, log);
    if (cfg.command == "vein") return cmd_vein(cfg, log);
    if (cfg.command == "marble") return cmd_marble(cfg, log);
    if (cfg.command == "branching") return cmd_branching(cfg, log);
    if (cfg.command == "sweep") return cmd_sweep(cfg, log);
    throw std::invalid_argument("unknown command " + cfg.command);
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    static const std::vector<std::string> kCommands{"bessel", "vein", "marble", "branching", "sweep"};
    // config file first; its entries become flags placed before the real ones
    std::vector<std::string> tokens;
    std::string command;
    std::vector<std::string> rest;
    try {
        std::string config;
        for (std::size_t i = 0; i < args.size(); ++i) {
            if (args[i] == "--config" && i + 1 < args.size()) config = args[i + 1];
            if (args[i].rfind("--config=", 0) == 0) config = args[i].substr(9);
        }
        for (const auto& a : args) {
            if (command.empty() && std::find(kCommands.begin(), kCommands.end(), a) != kCommands.end())
                command = a;
            else
                rest.push_back(a);
        }
        if (!config.empty()) {
            for (const auto& [k, v] : read_config_file(config)) {
                if (k == "command") {
                    if (command.empty()) command = v;
                    continue;
                }
                tokens.push_back("--" + k + "=" + v);
            }
        }
    } catch (const std::exception& e) {
        err << "marblesim: " << e.what() << '\n';
        return kUsage;
    }

    ExperimentConfig cfg;
    std::string config_path;
    CLI::App app{"Monte Carlo simulator for coalescing-fragmenting Brownian systems", "marblesim"};
    app.set_version_flag("--version", std::string("marblesim ") + kVersion);
    app.require_subcommand(1);
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

    auto* bessel = app.add_subcommand("bessel", "R-Bessel endpoints and law checks");
    add_common(bessel, cfg, config_path);
    add_rate(bessel, cfg);
    bessel->add_option("--x0", cfg.x0, "start")->check(CLI::NonNegativeNumber);

    auto* vein = app.add_subcommand("vein", "vein to a point, its bubble and law checks");
    add_common(vein, cfg, config_path);
    add_rate(vein, cfg);
    vein->add_option("--x", cfg.point, "space coordinate of the query point");

    auto* marble = app.add_subcommand("marble", "finite-resolution marble");
    add_common(marble, cfg, config_path);
    add_rate(marble, cfg);
    marble->add_option("--delta", cfg.delta, "refill spacing (0: sqrt(dt)/10)")->check(CLI::NonNegativeNumber);
    marble->add_option("--window", cfg.window, "a,b")->delimiter(',')->expected(2);
    marble->add_option("--z", cfg.z, "query point inside the window");
    marble->add_flag("--render", cfg.render, "write marble.ppm");
    marble->add_flag("--svg", cfg.svg, "write marble.svg");
    marble->add_option("--width", cfg.width, "image width");
    marble->add_option("--height", cfg.height, "image height");
    marble->add_option("--palette-seed", cfg.palette_seed, "bubble palette seed (0: the root seed)");

    auto* branching = app.add_subcommand("branching", "growth-fragmentation population and many-to-one check");
    add_common(branching, cfg, config_path);
    add_rate(branching, cfg);
    branching->add_option("--N", cfg.split, "pieces per split");
    branching->add_option("--y", cfg.y, "initial mass");
    branching->add_option("--cap", cfg.cap, "particle cap per replica");

    auto* sweep = app.add_subcommand("sweep", "coupled truncation ladder");
    add_common(sweep, cfg, config_path);
    sweep->add_option("--lambda", cfg.lambda, "power-law coefficient")->check(CLI::NonNegativeNumber);
    sweep->add_option("--levels", cfg.levels, "comma list of truncation levels")->delimiter(',');

    std::vector<std::string> argv;
    if (!command.empty()) argv.push_back(command);
    argv.insert(argv.end(), tokens.begin(), tokens.end());
    argv.insert(argv.end(), rest.begin(), rest.end());
    std::reverse(argv.begin(), argv.end());
    try {
        app.parse(argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e, out, err);
        return code == 0 ? kPass : kUsage;
    }
    for (auto* s : {bessel, vein, marble, branching, sweep})
        if (s->parsed()) cfg.command = s->get_name();

    try {
        resolve(cfg);
    } catch (const std::invalid_argument& e) {
        err << "marblesim " << cfg.command << ": " << e.what() << '\n';
        return kUsage;
    }
    try {
        return run_command(cfg, out);
    } catch (const RuntimeAbort& e) {
        err << "marblesim " << cfg.command << ": aborted: " << e.what() << '\n';
        return kRuntimeAbort;
    } catch (const std::invalid_argument& e) {
        err << "marblesim " << cfg.command << ": " << e.what() << '\n';
        return kUsage;
    } catch (const std::exception& e) {
        err << "marblesim " << cfg.command << ": " << e.what() << '\n';
        return kRuntimeAbort;
    }
}

}  // namespace marblesim::cli
