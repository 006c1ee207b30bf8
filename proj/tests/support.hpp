#pragma once

// Seeded generators and scratch directories shared by the unit and
// acceptance tests.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "zsol/grid.hpp"

namespace zsol::testing {

class Gen {
public:
    explicit Gen(std::uint64_t seed) : rng_(seed) {}

    double uniform(double lo = 0.0, double hi = 1.0) {
        return std::uniform_real_distribution<double>(lo, hi)(rng_);
    }
    double normal(double sd = 1.0) { return std::normal_distribution<double>(0.0, sd)(rng_); }
    std::size_t index(std::size_t lo, std::size_t hi) {
        return std::uniform_int_distribution<std::size_t>(lo, hi)(rng_);
    }
    bool coin(double p = 0.5) { return uniform() < p; }

    std::vector<double> vec(std::size_t n, double sd = 1.0) {
        std::vector<double> v(n);
        for (auto& x : v) x = normal(sd);
        return v;
    }
    std::vector<float> fvec(std::size_t n, double sd = 1.0) {
        std::vector<float> v(n);
        for (auto& x : v) x = static_cast<float>(normal(sd));
        return v;
    }

    Grid grid(std::size_t h, std::size_t w, double lo = -1.0, double hi = 1.0) {
        std::vector<float> v(h * w);
        for (auto& x : v) x = static_cast<float>(uniform(lo, hi));
        return Grid(h, w, std::move(v));
    }

    /// Non-negative map; with `levels` > 0 values snap to multiples of
    /// 1/levels so equal-valued plateaus are common.
    DensityMap density(std::size_t h, std::size_t w, int levels = 0) {
        std::vector<float> v(h * w);
        for (auto& x : v) {
            double u = uniform(0.0, 0.3);
            if (levels > 0) u = std::floor(u * levels) / levels;
            x = static_cast<float>(u);
        }
        return DensityMap(Grid(h, w, std::move(v)));
    }

    PointSet points(std::size_t n, std::size_t h, std::size_t w, bool confidences = false) {
        PointSet p;
        for (std::size_t i = 0; i < n; ++i) {
            p.points.push_back({static_cast<float>(uniform(0.0, static_cast<double>(w) - 1e-3)),
                                static_cast<float>(uniform(0.0, static_cast<double>(h) - 1e-3))});
        }
        if (confidences) {
            p.confidences.emplace();
            for (std::size_t i = 0; i < n; ++i) p.confidences->push_back(static_cast<float>(uniform()));
        }
        return p;
    }

    std::mt19937_64& engine() { return rng_; }

private:
    std::mt19937_64 rng_;
};

/// Fresh directory under the system temp dir, removed on destruction.
class ScratchDir {
public:
    explicit ScratchDir(const std::string& tag) {
        static std::uint64_t counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("zsol_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~ScratchDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    ScratchDir(const ScratchDir&) = delete;
    ScratchDir& operator=(const ScratchDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

}  // namespace zsol::testing
