#include "zsol/grid.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace zsol {

namespace {

void require_dims(std::size_t height, std::size_t width) {
    if (height == 0 || width == 0) {
        throw std::invalid_argument("grid dimensions must be at least 1x1");
    }
}

constexpr double kMinNorm = 1e-12;

// Per-axis sampling table for half-pixel bilinear interpolation.
struct AxisTap {
    std::size_t i0;
    std::size_t i1;
    double frac;
};

std::vector<AxisTap> bilinear_taps(std::size_t in, int factor) {
    const std::size_t out = in * static_cast<std::size_t>(factor);
    std::vector<AxisTap> taps(out);
    const double scale = 1.0 / factor;
    for (std::size_t o = 0; o < out; ++o) {
        double src = (static_cast<double>(o) + 0.5) * scale - 0.5;
        src = std::max(src, 0.0);
        auto i0 = static_cast<std::size_t>(src);
        i0 = std::min(i0, in - 1);
        const std::size_t i1 = i0 + 1 < in ? i0 + 1 : i0;
        taps[o] = {i0, i1, i1 == i0 ? 0.0 : src - static_cast<double>(i0)};
    }
    return taps;
}

void check_factor(int factor) {
    if (factor < 1) {
        throw std::invalid_argument("upsample factor must be >= 1, got " + std::to_string(factor));
    }
}

double std_normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

}  // namespace

// ---------------------------------------------------------------------------
// Grid / DensityMap / EmbeddingMatrix
// ---------------------------------------------------------------------------

Grid::Grid(std::size_t height, std::size_t width, float fill)
    : height_(height), width_(width), values_(height * width, fill) {
    require_dims(height, width);
}

Grid::Grid(std::size_t height, std::size_t width, std::vector<float> values)
    : height_(height), width_(width), values_(std::move(values)) {
    require_dims(height, width);
    if (values_.size() != height * width) {
        throw std::invalid_argument("grid value count does not match dimensions");
    }
}

double Grid::sum() const {
    double total = 0.0;
    for (float v : values_) total += v;
    return total;
}

DensityMap::DensityMap(std::size_t height, std::size_t width) : grid_(height, width) {}

DensityMap::DensityMap(Grid grid) : grid_(std::move(grid)) {
    require_dims(grid_.height(), grid_.width());
    for (float v : grid_.values()) {
        if (!std::isfinite(v) || v < 0.0f) {
            throw std::invalid_argument("density map values must be finite and non-negative");
        }
    }
}

DensityMap DensityMap::clamped(const Grid& grid) {
    Grid out = grid;
    for (float& v : out.values()) {
        if (!std::isfinite(v)) throw std::invalid_argument("non-finite value in grid");
        v = std::max(v, 0.0f);
    }
    return DensityMap(std::move(out));
}

EmbeddingMatrix::EmbeddingMatrix(std::size_t rows, std::size_t dim)
    : rows_(rows), dim_(dim), values_(rows * dim, 0.0f) {
    if (rows == 0 || dim == 0) throw std::invalid_argument("embedding matrix must be at least 1x1");
}

EmbeddingMatrix::EmbeddingMatrix(std::size_t rows, std::size_t dim, std::vector<float> values)
    : rows_(rows), dim_(dim), values_(std::move(values)) {
    if (rows == 0 || dim == 0) throw std::invalid_argument("embedding matrix must be at least 1x1");
    if (values_.size() != rows * dim) {
        throw std::invalid_argument("embedding value count does not match dimensions");
    }
    for (float v : values_) {
        if (!std::isfinite(v)) throw std::invalid_argument("embedding matrix has non-finite entry");
    }
}

EmbeddingMatrix EmbeddingMatrix::from_vector(std::span<const double> v) {
    std::vector<float> values(v.begin(), v.end());
    return EmbeddingMatrix(1, v.size(), std::move(values));
}

std::vector<double> EmbeddingMatrix::row_as_double(std::size_t i) const {
    auto r = row(i);
    return {r.begin(), r.end()};
}

void PointSet::validate(std::optional<std::size_t> height, std::optional<std::size_t> width) const {
    if (confidences) {
        if (confidences->size() != points.size()) {
            throw std::invalid_argument("confidence count does not match point count");
        }
        for (float c : *confidences) {
            if (!std::isfinite(c) || c < 0.0f) {
                throw std::invalid_argument("confidences must be finite and non-negative");
            }
        }
    }
    for (const Point& p : points) {
        if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
            throw std::invalid_argument("point coordinates must be finite");
        }
        const bool out_x = width && (p.x < 0.0f || p.x >= static_cast<float>(*width));
        const bool out_y = height && (p.y < 0.0f || p.y >= static_cast<float>(*height));
        if (out_x || out_y) {
            throw std::invalid_argument("point (" + std::to_string(p.x) + ", " +
                                        std::to_string(p.y) + ") lies outside the image");
        }
    }
}

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw std::invalid_argument("cosine_similarity: dimension mismatch (" +
                                    std::to_string(a.size()) + " vs " + std::to_string(b.size()) +
                                    ")");
    }
    double dot = 0.0, aa = 0.0, bb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        aa += a[i] * a[i];
        bb += b[i] * b[i];
    }
    if (std::sqrt(aa) < kMinNorm || std::sqrt(bb) < kMinNorm) return 0.0;
    // sqrt(aa * bb) keeps cos(v, v) == 1 exactly.
    const double c = dot / std::sqrt(aa * bb);
    return std::clamp(c, -1.0, 1.0);
}

double cosine_similarity(std::span<const float> a, std::span<const float> b) {
    std::vector<double> da(a.begin(), a.end());
    std::vector<double> db(b.begin(), b.end());
    return cosine_similarity(std::span<const double>(da), std::span<const double>(db));
}

Grid max_pool(const Grid& grid, int window) {
    if (window < 1 || window % 2 == 0) {
        throw std::invalid_argument("max_pool window must be a positive odd integer, got " +
                                    std::to_string(window));
    }
    if (grid.empty()) throw std::invalid_argument("max_pool on empty grid");
    const auto h = static_cast<std::ptrdiff_t>(grid.height());
    const auto w = static_cast<std::ptrdiff_t>(grid.width());
    const std::ptrdiff_t r = window / 2;

    // A clamped rectangle max is the column max of row maxes.
    Grid rows(grid.height(), grid.width());
    for (std::ptrdiff_t y = 0; y < h; ++y) {
        for (std::ptrdiff_t x = 0; x < w; ++x) {
            float m = grid.at(y, x);
            for (std::ptrdiff_t xx = std::max<std::ptrdiff_t>(0, x - r);
                 xx <= std::min(w - 1, x + r); ++xx) {
                m = std::max(m, grid.at(y, xx));
            }
            rows.at(y, x) = m;
        }
    }
    Grid out(grid.height(), grid.width());
    for (std::ptrdiff_t y = 0; y < h; ++y) {
        for (std::ptrdiff_t x = 0; x < w; ++x) {
            float m = rows.at(y, x);
            for (std::ptrdiff_t yy = std::max<std::ptrdiff_t>(0, y - r);
                 yy <= std::min(h - 1, y + r); ++yy) {
                m = std::max(m, rows.at(yy, x));
            }
            out.at(y, x) = m;
        }
    }
    return out;
}

DensityMap max_pool(const DensityMap& map, int window) {
    return DensityMap(max_pool(map.grid(), window));
}

std::vector<double> bilinear_upsample(std::span<const double> in, std::size_t in_height,
                                      std::size_t in_width, int factor) {
    check_factor(factor);
    require_dims(in_height, in_width);
    if (in.size() != in_height * in_width) {
        throw std::invalid_argument("bilinear_upsample: input size mismatch");
    }
    const auto ty = bilinear_taps(in_height, factor);
    const auto tx = bilinear_taps(in_width, factor);
    std::vector<double> out(ty.size() * tx.size());
    for (std::size_t y = 0; y < ty.size(); ++y) {
        const double* r0 = in.data() + ty[y].i0 * in_width;
        const double* r1 = in.data() + ty[y].i1 * in_width;
        const double fy = ty[y].frac;
        for (std::size_t x = 0; x < tx.size(); ++x) {
            const double fx = tx[x].frac;
            const double top = (1.0 - fx) * r0[tx[x].i0] + fx * r0[tx[x].i1];
            const double bottom = (1.0 - fx) * r1[tx[x].i0] + fx * r1[tx[x].i1];
            out[y * tx.size() + x] = (1.0 - fy) * top + fy * bottom;
        }
    }
    return out;
}

std::vector<double> bilinear_upsample_adjoint(std::span<const double> grad_out,
                                              std::size_t in_height, std::size_t in_width,
                                              int factor) {
    check_factor(factor);
    require_dims(in_height, in_width);
    const auto ty = bilinear_taps(in_height, factor);
    const auto tx = bilinear_taps(in_width, factor);
    if (grad_out.size() != ty.size() * tx.size()) {
        throw std::invalid_argument("bilinear_upsample_adjoint: gradient size mismatch");
    }
    std::vector<double> grad_in(in_height * in_width, 0.0);
    for (std::size_t y = 0; y < ty.size(); ++y) {
        double* r0 = grad_in.data() + ty[y].i0 * in_width;
        double* r1 = grad_in.data() + ty[y].i1 * in_width;
        const double fy = ty[y].frac;
        for (std::size_t x = 0; x < tx.size(); ++x) {
            const double g = grad_out[y * tx.size() + x];
            if (g == 0.0) continue;
            const double fx = tx[x].frac;
            r0[tx[x].i0] += (1.0 - fy) * (1.0 - fx) * g;
            r0[tx[x].i1] += (1.0 - fy) * fx * g;
            r1[tx[x].i0] += fy * (1.0 - fx) * g;
            r1[tx[x].i1] += fy * fx * g;
        }
    }
    return grad_in;
}

Grid bilinear_upsample(const Grid& grid, int factor) {
    check_factor(factor);
    std::vector<double> in(grid.values().begin(), grid.values().end());
    const auto out = bilinear_upsample(in, grid.height(), grid.width(), factor);
    const auto f = static_cast<std::size_t>(factor);
    return Grid(grid.height() * f, grid.width() * f, std::vector<float>(out.begin(), out.end()));
}

DensityMap bilinear_upsample(const DensityMap& map, int factor) {
    return DensityMap::clamped(bilinear_upsample(map.grid(), factor));
}

DensityMap gaussian_splat(const PointSet& points, std::size_t height, std::size_t width,
                          double sigma, KernelNorm norm) {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) {
        throw std::invalid_argument("gaussian_splat: sigma must be positive");
    }
    require_dims(height, width);
    points.validate(height, width);

    const double reach = 4.0 * sigma;
    Grid acc(height, width);
    std::vector<double> wx, wy;

    // Pixel index range whose cell [j-0.5, j+0.5] meets [c - reach, c + reach].
    auto span_of = [](double c, double reach, std::size_t n) {
        const double lo = std::ceil(c - reach - 0.5);
        const double hi = std::floor(c + reach + 0.5);
        const auto first = static_cast<std::ptrdiff_t>(std::max(lo, 0.0));
        const auto last = static_cast<std::ptrdiff_t>(std::min(hi, static_cast<double>(n) - 1.0));
        return std::pair{first, last};
    };

    for (const Point& p : points.points) {
        const double cx = p.x, cy = p.y;
        const auto [x0, x1] = span_of(cx, reach, width);
        const auto [y0, y1] = span_of(cy, reach, height);
        if (norm == KernelNorm::unit_mass) {
            auto axis_mass = [&](double c, std::ptrdiff_t first, std::ptrdiff_t last,
                                 std::vector<double>& out) {
                out.clear();
                for (std::ptrdiff_t j = first; j <= last; ++j) {
                    const double a = std::max(static_cast<double>(j) - 0.5, c - reach);
                    const double b = std::min(static_cast<double>(j) + 0.5, c + reach);
                    out.push_back(b > a ? std_normal_cdf((b - c) / sigma) -
                                              std_normal_cdf((a - c) / sigma)
                                        : 0.0);
                }
            };
            axis_mass(cx, x0, x1, wx);
            axis_mass(cy, y0, y1, wy);
            for (std::ptrdiff_t y = y0; y <= y1; ++y) {
                for (std::ptrdiff_t x = x0; x <= x1; ++x) {
                    const auto v = static_cast<float>(wy[y - y0] * wx[x - x0]);
                    acc.at(y, x) += v;
                }
            }
        } else {
            const double inv = 1.0 / (2.0 * sigma * sigma);
            for (std::ptrdiff_t y = y0; y <= y1; ++y) {
                for (std::ptrdiff_t x = x0; x <= x1; ++x) {
                    const double dx = static_cast<double>(x) - cx;
                    const double dy = static_cast<double>(y) - cy;
                    const double r2 = dx * dx + dy * dy;
                    if (r2 > reach * reach) continue;
                    acc.at(y, x) += static_cast<float>(std::exp(-r2 * inv));
                }
            }
        }
    }
    return DensityMap(std::move(acc));
}

}  // namespace zsol
