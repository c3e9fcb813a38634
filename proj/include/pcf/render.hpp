#pragma once

// Binary PPM (P6) rendering of voxel maps as three orthographic
// maximum-intensity projections: axial (x,y), sagittal (y,z), coronal (x,z).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "pcf/core.hpp"

namespace pcf::render {

struct RenderOptions {
    int panel_px = 128;
    int gap_px = 4;
    double scale_percent = 95.0;  // colors saturate at this percent of the map maximum
};

using Rgb = std::array<std::uint8_t, 3>;

/// Black-red-yellow-white ramp over t in [0, 1].
inline Rgb hot_color(double t) {
    t = std::clamp(t, 0.0, 1.0);
    auto channel = [](double v) { return static_cast<std::uint8_t>(std::lround(255.0 * std::clamp(v, 0.0, 1.0))); };
    return {channel(3.0 * t), channel(3.0 * t - 1.0), channel(3.0 * t - 2.0)};
}

inline constexpr Rgb kBackground{40, 40, 64};

/// Value at which the color ramp saturates.
inline double saturation_level(const RVector& values, double scale_percent) {
    detail::require(values.size() > 0, ErrorCode::empty_input, "cannot render an empty map");
    detail::require(scale_percent > 0.0 && scale_percent <= 100.0, ErrorCode::invalid_argument,
                    "scale percent must lie in (0, 100]");
    return values.maxCoeff() * scale_percent / 100.0;
}

inline std::string render_ppm(const std::vector<Vec3>& positions, const RVector& values, double spacing,
                              const RenderOptions& opt = {}) {
    detail::require(!positions.empty() && static_cast<std::size_t>(values.size()) == positions.size(),
                    ErrorCode::empty_input, "cannot render an empty map");
    const double top = saturation_level(values, opt.scale_percent);

    double extent = 0.0;
    for (const Vec3& p : positions) extent = std::max(extent, p.cwiseAbs().maxCoeff());
    extent += 0.5 * spacing;
    const int n = opt.panel_px;
    auto to_px = [&](double c) { return (c + extent) / (2.0 * extent) * n; };
    const int half = std::max(0, static_cast<int>(std::floor(0.5 * spacing / (2.0 * extent) * n)));

    // (horizontal axis, vertical axis) per panel; vertical is drawn upward
    constexpr std::array<std::array<int, 2>, 3> axes{{{0, 1}, {1, 2}, {0, 2}}};
    const int width = 3 * n + 2 * opt.gap_px;
    std::vector<double> level(static_cast<std::size_t>(width) * n, -1.0);

    for (std::size_t panel = 0; panel < axes.size(); ++panel) {
        const int x0 = static_cast<int>(panel) * (n + opt.gap_px);
        for (std::size_t v = 0; v < positions.size(); ++v) {
            const int cx = static_cast<int>(std::floor(to_px(positions[v](axes[panel][0]))));
            const int cy = n - 1 - static_cast<int>(std::floor(to_px(positions[v](axes[panel][1]))));
            const double t = top > 0.0 ? std::clamp(values(static_cast<Eigen::Index>(v)) / top, 0.0, 1.0) : 0.0;
            for (int dy = -half; dy <= half; ++dy) {
                for (int dx = -half; dx <= half; ++dx) {
                    const int px = cx + dx;
                    const int py = cy + dy;
                    if (px < 0 || px >= n || py < 0 || py >= n) continue;
                    double& cell = level[static_cast<std::size_t>(py) * width + x0 + px];
                    cell = std::max(cell, t);
                }
            }
        }
    }

    std::string out = "P6\n" + std::to_string(width) + " " + std::to_string(n) + "\n255\n";
    out.reserve(out.size() + level.size() * 3);
    for (double t : level) {
        const Rgb c = t < 0.0 ? kBackground : hot_color(t);
        out.append(reinterpret_cast<const char*>(c.data()), 3);
    }
    return out;
}

}  // namespace pcf::render
