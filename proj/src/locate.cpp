#include "zsol/locate.hpp"

#include <numeric>
#include <stdexcept>
#include <string>

#include "zsol/parallel.hpp"

namespace zsol {

DensityRegime parse_regime(std::string_view name) {
    if (name == "dense") return DensityRegime::dense;
    if (name == "sparse") return DensityRegime::sparse;
    throw std::invalid_argument("unknown density regime '" + std::string(name) +
                                "' (expected dense or sparse)");
}

std::string_view regime_name(DensityRegime r) {
    return r == DensityRegime::dense ? "dense" : "sparse";
}

DecodeConfig DecodeConfig::for_regime(DensityRegime r) {
    DecodeConfig cfg;
    cfg.alpha = (r == DensityRegime::dense ? 5.0 : 10.0) / 255.0;
    return cfg;
}

void DecodeConfig::validate() const {
    if (!(alpha >= 0.0)) throw std::invalid_argument("alpha must be >= 0");
    if (!(beta >= 0.0 && beta <= 1.0)) throw std::invalid_argument("beta must lie in [0, 1]");
    if (pool_window < 1 || pool_window % 2 == 0) {
        throw std::invalid_argument("pool window must be a positive odd integer");
    }
}

namespace {

// Union-find over pixel indices; the root is always the smallest index.
struct Plateaus {
    std::vector<std::size_t> parent;

    explicit Plateaus(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }

    std::size_t find(std::size_t i) {
        while (parent[i] != i) {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        return i;
    }
    void unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a == b) return;
        if (b < a) std::swap(a, b);
        parent[b] = a;
    }
};

}  // namespace

PointSet decode_points(const DensityMap& density, const DecodeConfig& cfg) {
    cfg.validate();
    const std::size_t h = density.height();
    const std::size_t w = density.width();
    const DensityMap pooled = max_pool(density, cfg.pool_window);

    std::vector<char> candidate(h * w, 0);
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            const float v = density.at(y, x);
            const float m = pooled.at(y, x);
            candidate[y * w + x] = v == m && m > cfg.alpha && v >= cfg.beta;
        }
    }

    // Merge 8-connected equal-valued candidates (forward half-neighbourhood).
    Plateaus sets(h * w);
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            const std::size_t i = y * w + x;
            if (!candidate[i]) continue;
            const float v = density.at(y, x);
            auto link = [&](std::size_t yy, std::size_t xx) {
                const std::size_t j = yy * w + xx;
                if (candidate[j] && density.at(yy, xx) == v) sets.unite(i, j);
            };
            if (x + 1 < w) link(y, x + 1);
            if (y + 1 < h) {
                if (x > 0) link(y + 1, x - 1);
                link(y + 1, x);
                if (x + 1 < w) link(y + 1, x + 1);
            }
        }
    }

    PointSet out;
    out.confidences.emplace();
    for (std::size_t i = 0; i < h * w; ++i) {
        if (!candidate[i] || sets.find(i) != i) continue;
        const std::size_t y = i / w, x = i % w;
        out.points.push_back({static_cast<float>(x), static_cast<float>(y)});
        out.confidences->push_back(density.at(y, x));
    }
    return out;
}

WindowPlan plan_windows(std::size_t height, std::size_t width, std::size_t window,
                        std::size_t stride) {
    if (height == 0 || width == 0) throw std::invalid_argument("plan_windows: empty image");
    if (window == 0 || stride == 0) throw std::invalid_argument("plan_windows: zero window or stride");

    auto axis = [&](std::size_t extent) {
        const std::size_t win = std::min(window, extent);
        std::vector<std::size_t> origins;
        for (std::size_t o = 0;; o += stride) {
            if (o + win >= extent) {
                const std::size_t last = extent - win;
                if (origins.empty() || origins.back() != last) origins.push_back(last);
                break;
            }
            origins.push_back(o);
        }
        return std::pair{win, origins};
    };

    WindowPlan plan;
    plan.image_height = height;
    plan.image_width = width;
    plan.stride = stride;
    auto [wh, ys] = axis(height);
    auto [ww, xs] = axis(width);
    plan.window_height = wh;
    plan.window_width = ww;
    for (auto y : ys) {
        for (auto x : xs) plan.origins.push_back({y, x});
    }
    return plan;
}

DensityMap fuse_windows(std::span<const DensityMap> windows, const WindowPlan& plan) {
    if (windows.size() != plan.size()) {
        throw std::invalid_argument("fuse_windows: " + std::to_string(windows.size()) +
                                    " maps for a plan of " + std::to_string(plan.size()) +
                                    " windows");
    }
    const std::size_t h = plan.image_height, w = plan.image_width;
    std::vector<double> acc(h * w, 0.0);
    std::vector<unsigned> hits(h * w, 0);
    for (std::size_t k = 0; k < windows.size(); ++k) {
        const auto& m = windows[k];
        if (m.height() != plan.window_height || m.width() != plan.window_width) {
            throw std::invalid_argument("fuse_windows: window map has the wrong size");
        }
        const auto [oy, ox] = plan.origins[k];
        for (std::size_t y = 0; y < m.height(); ++y) {
            for (std::size_t x = 0; x < m.width(); ++x) {
                const std::size_t i = (oy + y) * w + ox + x;
                acc[i] += m.at(y, x);
                ++hits[i];
            }
        }
    }
    std::vector<float> values(h * w);
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (hits[i] == 0) throw std::invalid_argument("fuse_windows: plan leaves a pixel uncovered");
        values[i] = static_cast<float>(acc[i] / hits[i]);
    }
    return DensityMap(Grid(h, w, std::move(values)));
}

Localization localize(std::span<const PatchGrid> windows, const WindowPlan& plan,
                      const TextBundle& text, const ProjectionModel& model,
                      const DecodeConfig& cfg, unsigned threads) {
    if (windows.size() != plan.size()) {
        throw std::invalid_argument("localize: patch grids do not match the window plan");
    }
    std::vector<DensityMap> maps(windows.size());
    parallel_for(windows.size(), threads, [&](std::size_t k) {
        const auto& g = windows[k];
        if (plan.window_height % g.grid_h != 0 ||
            plan.window_height / g.grid_h != plan.window_width / g.grid_w ||
            plan.window_width % g.grid_w != 0) {
            throw std::invalid_argument("localize: window size is not a multiple of the patch grid");
        }
        const int factor = static_cast<int>(plan.window_height / g.grid_h);
        maps[k] = predicted_density(model, g, text.self_support, factor);
    });
    Localization out;
    out.density = fuse_windows(maps, plan);
    out.points = decode_points(out.density, cfg);
    out.count = out.points.size();
    return out;
}

}  // namespace zsol
