#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "marblesim/marble.hpp"

namespace marblesim {

using Rgb = std::array<std::uint8_t, 3>;

struct Raster {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;  // row-major RGB, top row first

    Raster() = default;
    Raster(int w, int h, Rgb fill = {255, 255, 255});

    Rgb get(int x, int y) const;
    void set(int x, int y, Rgb c);
    bool operator==(const Raster&) const = default;
};

// Spacetime rectangle: time horizontal, space vertical (larger x at the top).
struct Viewport {
    double t0 = 0.0, t1 = 1.0;
    double x0 = 0.0, x1 = 1.0;
};

// Trace window over the whole time grid.
Viewport default_viewport(const MarbleTrace& trace);

inline constexpr Rgb kBackground{255, 255, 255};
inline constexpr Rgb kPathColor{0, 0, 0};
inline constexpr Rgb kFragmentColor{220, 0, 0};

// Fill colour of a bubble: hue from hash(id, seed) on a 360-step wheel.
Rgb bubble_color(std::uint64_t bubble_id, std::uint64_t palette_seed);

// Bubbles filled first, then particle paths as 1-px polylines, then
// fragmentation events as red vertical segments over [L, U].
Raster render_marble(const MarbleTrace& trace, const BubbleSet& bubbles, const Viewport& view, int width, int height,
                     std::uint64_t palette_seed);

void write_ppm(const Raster& r, const std::string& path);
Raster read_ppm(const std::string& path);

// SVG 1.1 with rect and polyline elements only.
void write_svg(const MarbleTrace& trace, const BubbleSet& bubbles, const Viewport& view, int width, int height,
               std::uint64_t palette_seed, const std::string& path);

}  // namespace marblesim
