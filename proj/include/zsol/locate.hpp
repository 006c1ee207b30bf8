#pragma once

// Density map -> object points, and sliding-window inference over images
// larger than one encoder window.

#include <string_view>
#include <vector>

#include "zsol/align.hpp"
#include "zsol/grid.hpp"
#include "zsol/tssm.hpp"

namespace zsol {

enum class DensityRegime { dense, sparse };

DensityRegime parse_regime(std::string_view name);
std::string_view regime_name(DensityRegime r);

struct DecodeConfig {
    double alpha = 5.0 / 255.0;  ///< peak threshold on the pooled value
    double beta = 0.06;          ///< background threshold on the candidate value
    int pool_window = 7;

    /// alpha = 5/255 for dense scenes, 10/255 for sparse ones.
    static DecodeConfig for_regime(DensityRegime r);
    void validate() const;
};

/// Local maxima of a density map. A pixel is a candidate when it equals the
/// pool_window max filter and that pooled value exceeds alpha; candidates
/// below beta are dropped. Each 8-connected plateau of equal-valued candidates
/// yields one point at its row-major-first pixel. Points come back in
/// row-major order with confidence = density value.
PointSet decode_points(const DensityMap& density, const DecodeConfig& cfg);

struct WindowOrigin {
    std::size_t y = 0;
    std::size_t x = 0;
    friend bool operator==(const WindowOrigin&, const WindowOrigin&) = default;
};

struct WindowPlan {
    std::size_t image_height = 0;
    std::size_t image_width = 0;
    std::size_t window_height = 0;  ///< min(384, image height)
    std::size_t window_width = 0;   ///< min(384, image width)
    std::size_t stride = 128;
    std::vector<WindowOrigin> origins;  ///< y-major order

    std::size_t size() const { return origins.size(); }
};

inline constexpr std::size_t kWindowSize = 384;
inline constexpr std::size_t kWindowStride = 128;

/// Origins on the stride lattice along each axis, with the final origin
/// pulled back to keep the window inside the image.
WindowPlan plan_windows(std::size_t height, std::size_t width,
                        std::size_t window = kWindowSize, std::size_t stride = kWindowStride);

/// Per-pixel mean over all windows covering the pixel.
DensityMap fuse_windows(std::span<const DensityMap> windows, const WindowPlan& plan);

struct Localization {
    PointSet points;
    std::size_t count = 0;
    DensityMap density;
};

/// Runs the alignment head on every window, fuses the window densities
/// and decodes points from the fused map.
Localization localize(std::span<const PatchGrid> windows, const WindowPlan& plan,
                      const TextBundle& text, const ProjectionModel& model,
                      const DecodeConfig& cfg, unsigned threads = 1);

}  // namespace zsol
