#pragma once

// Dense 2-D grids, embedding matrices and point sets shared by every stage
// of the localization pipeline.

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace zsol {

/// Row-major single-channel float grid with no sign restriction. Used for
/// similarity scores, gradients and as the storage behind DensityMap.
class Grid {
public:
    Grid() = default;
    Grid(std::size_t height, std::size_t width, float fill = 0.0f);
    Grid(std::size_t height, std::size_t width, std::vector<float> values);

    std::size_t height() const { return height_; }
    std::size_t width() const { return width_; }
    std::size_t size() const { return values_.size(); }
    bool empty() const { return values_.empty(); }

    float& at(std::size_t y, std::size_t x) { return values_[y * width_ + x]; }
    float at(std::size_t y, std::size_t x) const { return values_[y * width_ + x]; }

    std::span<float> values() { return values_; }
    std::span<const float> values() const { return values_; }

    /// Sum of all cells accumulated at double precision in row-major order.
    double sum() const;

    bool same_shape(const Grid& other) const {
        return height_ == other.height_ && width_ == other.width_;
    }

    friend bool operator==(const Grid&, const Grid&) = default;

private:
    std::size_t height_ = 0;
    std::size_t width_ = 0;
    std::vector<float> values_;
};

/// Non-negative per-pixel object likelihood mass. Construction validates that
/// the grid is non-empty, finite and has no negative cell.
class DensityMap {
public:
    DensityMap() = default;
    DensityMap(std::size_t height, std::size_t width);
    explicit DensityMap(Grid grid);

    /// Copies `grid` with negative cells replaced by zero.
    static DensityMap clamped(const Grid& grid);

    std::size_t height() const { return grid_.height(); }
    std::size_t width() const { return grid_.width(); }
    float at(std::size_t y, std::size_t x) const { return grid_.at(y, x); }
    std::span<const float> values() const { return grid_.values(); }
    double sum() const { return grid_.sum(); }

    const Grid& grid() const { return grid_; }

    friend bool operator==(const DensityMap&, const DensityMap&) = default;

private:
    Grid grid_;
};

/// N x D row-major embeddings: token sequences, patch grids or single vectors.
class EmbeddingMatrix {
public:
    EmbeddingMatrix() = default;
    EmbeddingMatrix(std::size_t rows, std::size_t dim);
    EmbeddingMatrix(std::size_t rows, std::size_t dim, std::vector<float> values);

    static EmbeddingMatrix from_vector(std::span<const double> v);

    std::size_t rows() const { return rows_; }
    std::size_t dim() const { return dim_; }

    std::span<const float> row(std::size_t i) const {
        return std::span<const float>(values_).subspan(i * dim_, dim_);
    }
    std::span<float> row(std::size_t i) {
        return std::span<float>(values_).subspan(i * dim_, dim_);
    }
    std::span<const float> values() const { return values_; }

    /// Copy of row `i` widened to double.
    std::vector<double> row_as_double(std::size_t i) const;

    friend bool operator==(const EmbeddingMatrix&, const EmbeddingMatrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t dim_ = 0;
    std::vector<float> values_;
};

struct Point {
    float x = 0.0f;
    float y = 0.0f;
    friend bool operator==(const Point&, const Point&) = default;
};

/// Pixel-space points with optional per-point confidence.
struct PointSet {
    std::vector<Point> points;
    std::optional<std::vector<float>> confidences;

    std::size_t size() const { return points.size(); }
    bool empty() const { return points.empty(); }
    bool has_confidences() const { return confidences.has_value(); }

    /// Throws std::invalid_argument if confidences are mis-sized, negative or
    /// non-finite, or (when bounds are given) a point lies outside them.
    void validate(std::optional<std::size_t> height = std::nullopt,
                  std::optional<std::size_t> width = std::nullopt) const;

    friend bool operator==(const PointSet&, const PointSet&) = default;
};

/// Cosine similarity at double precision. Returns 0 when either norm is
/// below 1e-12. Throws std::invalid_argument on a dimension mismatch.
double cosine_similarity(std::span<const double> a, std::span<const double> b);
double cosine_similarity(std::span<const float> a, std::span<const float> b);

/// k x k max filter (k odd) with the window clamped to the grid.
Grid max_pool(const Grid& grid, int window);
DensityMap max_pool(const DensityMap& map, int window);

/// Integer-factor bilinear upsampling, half-pixel (align-corners false)
/// convention with edge clamping.
Grid bilinear_upsample(const Grid& grid, int factor);
DensityMap bilinear_upsample(const DensityMap& map, int factor);

/// Adjoint of bilinear_upsample: scatters an output-resolution gradient back
/// onto the input grid. Works at double precision.
std::vector<double> bilinear_upsample_adjoint(std::span<const double> grad_out,
                                              std::size_t in_height, std::size_t in_width,
                                              int factor);

/// Double-precision forward pass matching bilinear_upsample cell for cell.
std::vector<double> bilinear_upsample(std::span<const double> in, std::size_t in_height,
                                      std::size_t in_width, int factor);

enum class KernelNorm {
    unit_mass,  ///< each point contributes (truncated) mass ~1
    unit_peak,  ///< each point contributes a bump whose peak value is 1
};

/// Renders one isotropic Gaussian per point, truncated at 4 sigma.
///
/// unit_mass integrates the Gaussian over each pixel cell (pixel centers at
/// integer coordinates) with the integration limits clipped to +-4 sigma, so
/// an interior point carries mass erf(4/sqrt 2)^2 ~ 0.99987. unit_peak
/// samples exp(-r^2 / 2 sigma^2) at pixel centers inside the 4 sigma disk.
///
/// Contributions are rounded to float and accumulated point by point in
/// input order, so splat(P + {q}) == splat(P) + splat({q}) bit for bit.
DensityMap gaussian_splat(const PointSet& points, std::size_t height, std::size_t width,
                          double sigma, KernelNorm norm = KernelNorm::unit_mass);

}  // namespace zsol
