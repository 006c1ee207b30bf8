#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "support.hpp"
#include "zsol/grid.hpp"

using namespace zsol;
using zsol::testing::Gen;

namespace {

Grid brute_max_pool(const Grid& g, int k) {
    const int r = k / 2;
    const int h = static_cast<int>(g.height()), w = static_cast<int>(g.width());
    Grid out(g.height(), g.width());
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            float m = -INFINITY;
            for (int dy = -r; dy <= r; ++dy) {
                for (int dx = -r; dx <= r; ++dx) {
                    const int yy = y + dy, xx = x + dx;
                    if (yy >= 0 && yy < h && xx >= 0 && xx < w) m = std::max(m, g.at(yy, xx));
                }
            }
            out.at(y, x) = m;
        }
    }
    return out;
}

// Half-pixel sampling written out per output pixel.
double bilinear_reference(const Grid& g, int f, int oy, int ox) {
    auto coord = [f](int o, std::size_t n, int& i0, int& i1, double& lam) {
        double s = (o + 0.5) / f - 0.5;
        if (s < 0) s = 0;
        i0 = static_cast<int>(std::floor(s));
        if (i0 > static_cast<int>(n) - 1) i0 = static_cast<int>(n) - 1;
        i1 = i0 + 1 < static_cast<int>(n) ? i0 + 1 : i0;
        lam = s - i0;
        if (i1 == i0) lam = 0;
    };
    int y0, y1, x0, x1;
    double ly, lx;
    coord(oy, g.height(), y0, y1, ly);
    coord(ox, g.width(), x0, x1, lx);
    return (1 - ly) * ((1 - lx) * g.at(y0, x0) + lx * g.at(y0, x1)) +
           ly * ((1 - lx) * g.at(y1, x0) + lx * g.at(y1, x1));
}

}  // namespace

TEST_SUITE("grid") {

TEST_CASE("cosine similarity closed-form values") {
    const std::vector<double> e1{1, 0}, e2{0, 1};
    CHECK(cosine_similarity(e1, e1) == 1.0);
    CHECK(cosine_similarity(e1, e2) == 0.0);
    const std::vector<double> a{1, 2, 3}, b{4, 5, 6};
    CHECK(cosine_similarity(a, b) == doctest::Approx(0.974631846).epsilon(1e-9));
}

TEST_CASE("cosine similarity edge cases") {
    const std::vector<double> z{0, 0, 0}, a{1, 2, 3}, tiny{1e-13, 0, 0};
    CHECK(cosine_similarity(z, a) == 0.0);
    CHECK(cosine_similarity(tiny, a) == 0.0);
    const std::vector<double> short_v{1, 2};
    CHECK_THROWS_AS(cosine_similarity(short_v, a), std::invalid_argument);
}

TEST_CASE("cosine similarity is bounded, symmetric and exact on self") {
    Gen g(11);
    for (int i = 0; i < 2000; ++i) {
        const std::size_t d = g.index(1, 40);
        const auto a = g.vec(d, g.uniform(1e-3, 1e3));
        const auto b = g.vec(d);
        const double c = cosine_similarity(a, b);
        CHECK(c >= -1.0);
        CHECK(c <= 1.0);
        CHECK(c == cosine_similarity(b, a));
        CHECK(cosine_similarity(a, a) == 1.0);
    }
}

TEST_CASE("max pool small examples") {
    Grid zeros(3, 3);
    CHECK(max_pool(zeros, 3) == zeros);
    Grid centre(3, 3);
    centre.at(1, 1) = 1.0f;
    CHECK(max_pool(centre, 3) == Grid(3, 3, 1.0f));
    CHECK_THROWS_AS(max_pool(zeros, 4), std::invalid_argument);
    CHECK_THROWS_AS(max_pool(zeros, 0), std::invalid_argument);
    CHECK_THROWS_AS(max_pool(Grid{}, 3), std::invalid_argument);
}

TEST_CASE("max pool equals brute-force neighbourhood max") {
    Gen g(12);
    for (int trial = 0; trial < 30; ++trial) {
        const Grid m = g.grid(g.index(1, 40), g.index(1, 40));
        for (int k : {1, 3, 7, 9}) CHECK(max_pool(m, k) == brute_max_pool(m, k));
    }
    const Grid big = g.grid(32, 32, 0.0, 1.0);
    CHECK(max_pool(big, 7) == brute_max_pool(big, 7));
}

TEST_CASE("max pool dominates its input and is idempotent at full coverage") {
    Gen g(13);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t h = g.index(1, 12), w = g.index(1, 12);
        const Grid m = g.grid(h, w);
        const Grid p = max_pool(m, 7);
        for (std::size_t i = 0; i < m.size(); ++i) CHECK(p.values()[i] >= m.values()[i]);
        const int cover = static_cast<int>(2 * std::max(h, w) + 1);
        const Grid once = max_pool(m, cover);
        CHECK(max_pool(once, cover) == once);
    }
}

TEST_CASE("bilinear upsample examples") {
    Gen g(14);
    const Grid m = g.grid(5, 4);
    CHECK(bilinear_upsample(m, 1) == m);
    CHECK(bilinear_upsample(Grid(1, 1, 0.7f), 4) == Grid(4, 4, 0.7f));
    CHECK_THROWS_AS(bilinear_upsample(m, 0), std::invalid_argument);

    const Grid cols(2, 2, std::vector<float>{0, 1, 0, 1});
    const Grid up = bilinear_upsample(cols, 2);
    const std::vector<float> row{0.0f, 0.25f, 0.75f, 1.0f};
    for (std::size_t y = 0; y < 4; ++y) {
        for (std::size_t x = 0; x < 4; ++x) CHECK(up.at(y, x) == row[x]);
    }
}

TEST_CASE("bilinear upsample matches the scalar sampling formula") {
    Gen g(15);
    for (int trial = 0; trial < 40; ++trial) {
        const Grid m = g.grid(g.index(1, 9), g.index(1, 9));
        const int f = static_cast<int>(g.index(1, 6));
        const Grid up = bilinear_upsample(m, f);
        REQUIRE(up.height() == m.height() * f);
        REQUIRE(up.width() == m.width() * f);
        for (std::size_t y = 0; y < up.height(); ++y) {
            for (std::size_t x = 0; x < up.width(); ++x) {
                CHECK(up.at(y, x) == doctest::Approx(bilinear_reference(m, f, int(y), int(x))).epsilon(1e-6));
            }
        }
    }
}

TEST_CASE("bilinear adjoint satisfies <Au, v> = <u, A^T v>") {
    Gen g(16);
    for (int trial = 0; trial < 40; ++trial) {
        const std::size_t h = g.index(1, 7), w = g.index(1, 7);
        const int f = static_cast<int>(g.index(1, 5));
        const auto u = g.vec(h * w);
        const auto v = g.vec(h * w * f * f);
        const auto au = bilinear_upsample(std::span<const double>(u), h, w, f);
        const auto atv = bilinear_upsample_adjoint(v, h, w, f);
        double lhs = 0, rhs = 0;
        for (std::size_t i = 0; i < au.size(); ++i) lhs += au[i] * v[i];
        for (std::size_t i = 0; i < u.size(); ++i) rhs += u[i] * atv[i];
        CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
    }
}

TEST_CASE("density map rejects negative or non-finite cells") {
    CHECK_THROWS_AS(DensityMap(Grid(2, 2, -0.1f)), std::invalid_argument);
    CHECK_THROWS_AS(DensityMap(Grid(2, 2, NAN)), std::invalid_argument);
    CHECK_THROWS_AS(DensityMap(Grid{}), std::invalid_argument);
    const Grid mixed(1, 3, std::vector<float>{-1.0f, 0.0f, 2.0f});
    const DensityMap c = DensityMap::clamped(mixed);
    CHECK(c.at(0, 0) == 0.0f);
    CHECK(c.at(0, 2) == 2.0f);
}

TEST_CASE("point set validation") {
    PointSet p;
    p.points = {{0.0f, 0.0f}, {9.5f, 4.9f}};
    CHECK_NOTHROW(p.validate(5, 10));
    CHECK_THROWS_AS(p.validate(4, 10), std::invalid_argument);
    p.confidences = std::vector<float>{0.5f};
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
    p.confidences = std::vector<float>{0.5f, -1.0f};
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
}

TEST_CASE("gaussian splat of nothing is zero") {
    const DensityMap d = gaussian_splat({}, 6, 7, 2.0);
    CHECK(d.height() == 6);
    CHECK(d.width() == 7);
    CHECK(d.sum() == 0.0);
    CHECK_THROWS_AS(gaussian_splat({}, 6, 7, 0.0), std::invalid_argument);
}

TEST_CASE("gaussian splat mass of an interior point") {
    // Box-truncated mass: (erf(4 / sqrt 2))^2.
    const double expected = std::pow(std::erf(4.0 / std::sqrt(2.0)), 2);
    Gen g(17);
    for (int trial = 0; trial < 60; ++trial) {
        const double sigma = g.uniform(0.3, 6.0);
        const double margin = 4.0 * sigma + 2.0;
        const auto side = static_cast<std::size_t>(2 * margin + 8);
        PointSet p;
        p.points.push_back({static_cast<float>(g.uniform(margin, side - margin)),
                            static_cast<float>(g.uniform(margin, side - margin))});
        const double mass = gaussian_splat(p, side, side, sigma).sum();
        CHECK(mass >= 0.99);
        CHECK(mass <= 1.0);
        CHECK(mass == doctest::Approx(expected).epsilon(1e-5));
    }
}

TEST_CASE("gaussian splat of two separated points carries two units") {
    PointSet p;
    p.points = {{10.0f, 10.0f}, {50.3f, 40.7f}};
    CHECK(gaussian_splat(p, 64, 64, 2.0).sum() == doctest::Approx(2.0).epsilon(0.01));
    p.points.push_back({64.0f, 1.0f});
    CHECK_THROWS_AS(gaussian_splat(p, 64, 64, 2.0), std::invalid_argument);
}

TEST_CASE("gaussian splat is exactly additive") {
    Gen g(18);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t h = 40, w = 48;
        const double sigma = g.uniform(0.5, 4.0);
        const PointSet base = g.points(g.index(0, 12), h, w);
        const PointSet extra = g.points(1, h, w);
        PointSet both = base;
        both.points.push_back(extra.points[0]);
        const DensityMap lhs = gaussian_splat(both, h, w, sigma);
        const DensityMap a = gaussian_splat(base, h, w, sigma);
        const DensityMap b = gaussian_splat(extra, h, w, sigma);
        for (std::size_t i = 0; i < lhs.values().size(); ++i) {
            CHECK(lhs.values()[i] == a.values()[i] + b.values()[i]);
        }
    }
}

TEST_CASE("gaussian splat unions agree to float rounding") {
    Gen g(19);
    for (int trial = 0; trial < 30; ++trial) {
        const PointSet p1 = g.points(g.index(0, 8), 32, 32);
        const PointSet p2 = g.points(g.index(0, 8), 32, 32);
        PointSet both = p1;
        both.points.insert(both.points.end(), p2.points.begin(), p2.points.end());
        const DensityMap u = gaussian_splat(both, 32, 32, 2.0);
        const DensityMap a = gaussian_splat(p1, 32, 32, 2.0);
        const DensityMap b = gaussian_splat(p2, 32, 32, 2.0);
        for (std::size_t i = 0; i < u.values().size(); ++i) {
            CHECK(u.values()[i] == doctest::Approx(a.values()[i] + b.values()[i]).epsilon(1e-6));
        }
    }
}

TEST_CASE("unit-peak kernel peaks at one on a pixel centre") {
    PointSet p;
    p.points = {{8.0f, 5.0f}};
    const DensityMap d = gaussian_splat(p, 12, 16, 2.0, KernelNorm::unit_peak);
    CHECK(d.at(5, 8) == 1.0f);
    CHECK(d.at(5, 9) == doctest::Approx(std::exp(-1.0 / 8.0)));
    CHECK(d.at(5, 0) == doctest::Approx(std::exp(-8.0)));
    CHECK(d.at(0, 0) == 0.0f);
}

}  // TEST_SUITE
