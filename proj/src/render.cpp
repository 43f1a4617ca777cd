#include "marblesim/render.hpp"

#include <algorithm>
#include <cmath>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "marblesim/rng.hpp"

namespace marblesim {

Raster::Raster(int w, int h, Rgb fill) : width(w), height(h) {
    if (w <= 0 || h <= 0) throw std::invalid_argument("Raster: width and height must be positive");
    pixels.resize(static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * 3);
    for (std::size_t i = 0; i < pixels.size(); i += 3) {
        pixels[i] = fill[0];
        pixels[i + 1] = fill[1];
        pixels[i + 2] = fill[2];
    }
}

Rgb Raster::get(int x, int y) const {
    auto i = (static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)) * 3;
    return {pixels[i], pixels[i + 1], pixels[i + 2]};
}

void Raster::set(int x, int y, Rgb c) {
    if (x < 0 || y < 0 || x >= width || y >= height) return;
    auto i = (static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)) * 3;
    pixels[i] = c[0];
    pixels[i + 1] = c[1];
    pixels[i + 2] = c[2];
}

Viewport default_viewport(const MarbleTrace& trace) {
    return {trace.grid.t0, trace.grid.t1(), trace.x_min, trace.x_max};
}

Rgb bubble_color(std::uint64_t bubble_id, std::uint64_t palette_seed) {
    std::uint64_t s = bubble_id * 0x9E3779B97F4A7C15ULL ^ palette_seed;
    double hue = static_cast<double>(splitmix64(s) % 360) / 60.0;
    const double sat = 0.5, val = 0.95;
    double c = val * sat;
    double x = c * (1.0 - std::fabs(std::fmod(hue, 2.0) - 1.0));
    double r = 0, g = 0, b = 0;
    switch (static_cast<int>(hue)) {
        case 0: r = c, g = x; break;
        case 1: r = x, g = c; break;
        case 2: g = c, b = x; break;
        case 3: g = x, b = c; break;
        case 4: r = x, b = c; break;
        default: r = c, b = x; break;
    }
    double m = val - c;
    auto q = [&](double v) { return static_cast<std::uint8_t>(std::lround(255.0 * (v + m))); };
    return {q(r), q(g), q(b)};
}

namespace {

struct Mapper {
    Viewport v;
    int w, h;

    double col(double t) const { return (t - v.t0) / (v.t1 - v.t0) * w; }
    double row(double x) const { return (v.x1 - x) / (v.x1 - v.x0) * h; }
    double col_time(int i) const { return v.t0 + (i + 0.5) / w * (v.t1 - v.t0); }
};

int clampi(long v, int lo, int hi) { return static_cast<int>(std::clamp<long>(v, lo, hi)); }

// Liang-Barsky against [0,w]x[0,h] in pixel coordinates.
bool clip(double& x0, double& y0, double& x1, double& y1, double w, double h) {
    double t0 = 0.0, t1 = 1.0;
    double dx = x1 - x0, dy = y1 - y0;
    const double p[4] = {-dx, dx, -dy, dy};
    const double q[4] = {x0, w - x0, y0, h - y0};
    for (int i = 0; i < 4; ++i) {
        if (p[i] == 0.0) {
            if (q[i] < 0.0) return false;
            continue;
        }
        double r = q[i] / p[i];
        if (p[i] < 0.0) {
            if (r > t1) return false;
            t0 = std::max(t0, r);
        } else {
            if (r < t0) return false;
            t1 = std::min(t1, r);
        }
    }
    double ax = x0 + t0 * dx, ay = y0 + t0 * dy;
    x1 = x0 + t1 * dx;
    y1 = y0 + t1 * dy;
    x0 = ax;
    y0 = ay;
    return true;
}

void draw_line(Raster& r, double fx0, double fy0, double fx1, double fy1, Rgb c) {
    if (!clip(fx0, fy0, fx1, fy1, r.width, r.height)) return;
    int x0 = clampi(std::lround(std::floor(fx0)), 0, r.width - 1);
    int y0 = clampi(std::lround(std::floor(fy0)), 0, r.height - 1);
    int x1 = clampi(std::lround(std::floor(fx1)), 0, r.width - 1);
    int y1 = clampi(std::lround(std::floor(fy1)), 0, r.height - 1);
    int dx = std::abs(x1 - x0), sx = x0 < x1 ? 1 : -1;
    int dy = -std::abs(y1 - y0), sy = y0 < y1 ? 1 : -1;
    int err = dx + dy;
    for (;;) {
        r.set(x0, y0, c);
        if (x0 == x1 && y0 == y1) break;
        int e2 = 2 * err;
        if (e2 >= dy) {
            err += dy;
            x0 += sx;
        }
        if (e2 <= dx) {
            err += dx;
            y0 += sy;
        }
    }
}

void check_view(const Viewport& v, int width, int height) {
    if (!(v.t1 > v.t0) || !(v.x1 > v.x0)) throw std::invalid_argument("render: degenerate viewport");
    if (width <= 0 || height <= 0) throw std::invalid_argument("render: image size must be positive");
}

// Where absorbed particles end: id -> (time, merged position).
std::unordered_map<std::uint64_t, std::pair<double, double>> absorption_points(const MarbleTrace& trace) {
    std::unordered_map<std::uint64_t, std::pair<double, double>> out;
    for (const auto& e : trace.coalescence_events) out[e.absorbed] = {e.time, e.position};
    return out;
}

template <class Seg>
void for_each_segment(const MarbleTrace& trace, Seg&& seg) {
    auto absorbed = absorption_points(trace);
    std::unordered_map<std::uint64_t, double> next_pos;
    for (std::size_t k = 0; k + 1 < trace.fronts.size(); ++k) {
        const auto& a = trace.fronts[k];
        const auto& b = trace.fronts[k + 1];
        next_pos.clear();
        for (std::size_t i = 0; i < b.ids.size(); ++i) next_pos[b.ids[i]] = b.positions[i];
        for (std::size_t i = 0; i < a.ids.size(); ++i) {
            auto it = next_pos.find(a.ids[i]);
            if (it != next_pos.end()) {
                seg(a.ids[i], a.time, a.positions[i], b.time, it->second);
                continue;
            }
            auto ab = absorbed.find(a.ids[i]);
            if (ab != absorbed.end() && ab->second.first > a.time && ab->second.first <= b.time)
                seg(a.ids[i], a.time, a.positions[i], ab->second.first, ab->second.second);
        }
    }
}

}  // namespace

Raster render_marble(const MarbleTrace& trace, const BubbleSet& bubbles, const Viewport& view, int width, int height,
                     std::uint64_t palette_seed) {
    check_view(view, width, height);
    Raster r(width, height, kBackground);
    Mapper mp{view, width, height};

    for (const auto& b : bubbles.bubbles) {
        if (b.times.empty() || !(b.tau > view.t0) || !(b.sigma < view.t1)) continue;
        // columns whose centre time lies in the open interval (sigma, tau)
        int c0 = clampi(std::lround(std::floor(mp.col(b.sigma) - 0.5)) + 1, 0, width);
        int c1 = clampi(std::lround(std::ceil(mp.col(b.tau) - 0.5)) - 1, -1, width - 1);
        if (c0 > c1) continue;
        Rgb color = bubble_color(b.id, palette_seed);
        for (int i = c0; i <= c1; ++i) {
            double s = mp.col_time(i);
            double a = mp.row(b.upper_at(s)), z = mp.row(b.lower_at(s));
            int j0 = clampi(std::lround(std::floor(a - 0.5)) + 1, 0, height);
            int j1 = clampi(std::lround(std::ceil(z - 0.5)) - 1, -1, height - 1);
            for (int j = j0; j <= j1; ++j) r.set(i, j, color);
        }
    }

    for_each_segment(trace, [&](std::uint64_t, double t0, double x0, double t1, double x1) {
        draw_line(r, mp.col(t0), mp.row(x0), mp.col(t1), mp.row(x1), kPathColor);
    });

    for (const auto& e : trace.fragmentation_events) {
        double c = mp.col(e.time);
        if (c < 0.0 || c > width) continue;
        c = std::min(c, width - 0.5);
        draw_line(r, c, mp.row(e.U), c, mp.row(e.L), kFragmentColor);
    }
    return r;
}

void write_ppm(const Raster& r, const std::string& path) {
    if (r.width <= 0 || r.height <= 0) throw std::invalid_argument("write_ppm: zero-size raster");
    if (r.pixels.size() != static_cast<std::size_t>(r.width) * static_cast<std::size_t>(r.height) * 3)
        throw std::invalid_argument("write_ppm: pixel buffer does not match size");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_ppm: cannot open " + path);
    out << "P6\n" << r.width << ' ' << r.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(r.pixels.data()), static_cast<std::streamsize>(r.pixels.size()));
    if (!out) throw std::runtime_error("write_ppm: write failed for " + path);
}

Raster read_ppm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("read_ppm: cannot open " + path);
    auto token = [&]() {
        std::string s;
        char c;
        while (in.get(c)) {
            if (c == '#') {
                std::string skip;
                std::getline(in, skip);
                continue;
            }
            if (std::isspace(static_cast<unsigned char>(c))) {
                if (!s.empty()) break;
                continue;
            }
            s.push_back(c);
        }
        return s;
    };
    if (token() != "P6") throw std::runtime_error("read_ppm: not a binary PPM: " + path);
    int w = 0, h = 0, maxv = 0;
    try {
        w = std::stoi(token());
        h = std::stoi(token());
        maxv = std::stoi(token());
    } catch (const std::exception&) {
        throw std::runtime_error("read_ppm: malformed header in " + path);
    }
    if (maxv != 255) throw std::runtime_error("read_ppm: only maxval 255 is supported: " + path);
    Raster r(w, h);
    in.read(reinterpret_cast<char*>(r.pixels.data()), static_cast<std::streamsize>(r.pixels.size()));
    if (in.gcount() != static_cast<std::streamsize>(r.pixels.size()))
        throw std::runtime_error("read_ppm: truncated pixel data in " + path);
    return r;
}

namespace {

std::string hex(Rgb c) {
    char buf[8];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", c[0], c[1], c[2]);
    return buf;
}

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

}  // namespace

void write_svg(const MarbleTrace& trace, const BubbleSet& bubbles, const Viewport& view, int width, int height,
               std::uint64_t palette_seed, const std::string& path) {
    check_view(view, width, height);
    Mapper mp{view, width, height};
    std::ostringstream os;
    os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
       << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << width << "\" height=\"" << height
       << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n"
       << "<rect x=\"0\" y=\"0\" width=\"" << width << "\" height=\"" << height << "\" fill=\"" << hex(kBackground)
       << "\"/>\n";

    for (const auto& b : bubbles.bubbles) {
        if (b.times.size() < 2 || !(b.tau > view.t0) || !(b.sigma < view.t1)) continue;
        if (mp.col(b.tau) - mp.col(b.sigma) < 1.0) continue;
        os << "<polyline fill=\"" << hex(bubble_color(b.id, palette_seed)) << "\" stroke=\"none\" points=\"";
        for (std::size_t i = 0; i < b.times.size(); ++i)
            os << num(mp.col(b.times[i])) << ',' << num(mp.row(b.upper[i])) << ' ';
        for (std::size_t i = b.times.size(); i-- > 0;)
            os << num(mp.col(b.times[i])) << ',' << num(mp.row(b.lower[i])) << ' ';
        os << "\"/>\n";
    }

    // chain segments per particle id into polylines
    std::unordered_map<std::uint64_t, std::vector<std::pair<double, double>>> open;
    std::vector<std::uint64_t> order;
    auto flush = [&](std::uint64_t id) {
        auto& pts = open[id];
        if (pts.size() >= 2) {
            os << "<polyline fill=\"none\" stroke=\"" << hex(kPathColor) << "\" stroke-width=\"1\" points=\"";
            for (auto& [x, y] : pts) os << num(x) << ',' << num(y) << ' ';
            os << "\"/>\n";
        }
        pts.clear();
    };
    for_each_segment(trace, [&](std::uint64_t id, double t0, double x0, double t1, double x1) {
        auto& pts = open[id];
        std::pair<double, double> a{mp.col(t0), mp.row(x0)};
        if (pts.empty()) {
            order.push_back(id);
            pts.push_back(a);
        } else if (pts.back() != a) {
            flush(id);
            pts.push_back(a);
        }
        pts.emplace_back(mp.col(t1), mp.row(x1));
    });
    for (auto id : order) flush(id);

    for (const auto& e : trace.fragmentation_events) {
        double c = mp.col(e.time);
        if (c < 0.0 || c > width) continue;
        double top = mp.row(e.U), bot = mp.row(e.L);
        os << "<rect x=\"" << num(c) << "\" y=\"" << num(top) << "\" width=\"1\" height=\"" << num(bot - top)
           << "\" fill=\"" << hex(kFragmentColor) << "\"/>\n";
    }
    os << "</svg>\n";
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_svg: cannot open " + path);
    out << os.str();
    if (!out) throw std::runtime_error("write_svg: write failed for " + path);
}

}  // namespace marblesim
