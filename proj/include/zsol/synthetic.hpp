#pragma once

// Desk-scale scene generator standing in for frozen encoder outputs. Object
// patches carry the unit text self-support vector plus Gaussian noise scaled
// by 1/SNR; every other patch is pure noise with unit expected norm.

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace zsol {

struct SyntheticSceneSpec {
    std::size_t min_objects = 3;
    std::size_t max_objects = 8;
    std::size_t height = 384;
    std::size_t width = 384;
    std::size_t dim = 64;
    std::size_t patch_size = 16;
    double snr = 10.0;
    double jitter = 2.0;  ///< max offset (px) of a plant from its patch centre
    std::uint64_t seed = 0;
    std::vector<std::string> titles{"apples"};
    std::vector<std::pair<std::string, std::size_t>> splits{{"train", 20}, {"test", 10}};

    void validate() const;
};

/// Writes <out>/<split>/manifest.json and its artifacts for every split and
/// returns the manifest paths in split order.
std::vector<std::filesystem::path> gen_synthetic(const SyntheticSceneSpec& spec,
                                                 const std::filesystem::path& out);

}  // namespace zsol
