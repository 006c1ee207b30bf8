#pragma once

// Dataset manifest: a JSON file listing per-image artifacts, with paths
// relative to the manifest's directory.
//
// {
//   "version": 1,
//   "samples": [{
//     "id": "scene_000", "width": 384, "height": 384, "category": "apples",
//     "title": "apples",
//     "patch_embeddings": ["scene_000.w0.zsol", ...],   // one per window, plan order
//     "tokens": "scene_000.zstk",
//     "token_embeddings": "scene_000.tok.zsol",
//     "sentence_embedding": "scene_000.sent.zsol",
//     "points": "scene_000.zspt"
//   }]
// }

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "zsol/align.hpp"
#include "zsol/locate.hpp"
#include "zsol/tssm.hpp"

namespace zsol {

struct ManifestRecord {
    std::string id;
    std::size_t width = 0;
    std::size_t height = 0;
    std::optional<std::string> category;
    std::string title;
    std::vector<std::filesystem::path> patch_embeddings;
    std::filesystem::path tokens;
    std::filesystem::path token_embeddings;
    std::filesystem::path sentence_embedding;
    std::filesystem::path points;
};

struct Manifest {
    std::filesystem::path root;  ///< directory relative paths resolve against
    std::vector<ManifestRecord> records;
};

/// Parses the manifest and checks that every referenced file exists.
Manifest load_manifest(const std::filesystem::path& path);
std::string encode_manifest(const Manifest& m);
void save_manifest(const std::filesystem::path& path, const Manifest& m);

struct LoadedSample {
    const ManifestRecord* record = nullptr;
    WindowPlan plan;
    std::vector<PatchGrid> windows;
    TextBundle text;
    PointSet gt;
};

/// Reads and cross-checks one record's files: window count against the plan,
/// patch grids against the window size, points against the image bounds.
LoadedSample load_sample(const Manifest& m, const ManifestRecord& rec);

/// One training sample per window, with ground truth shifted into window
/// coordinates.
std::vector<TrainingSample> training_samples(const LoadedSample& s);

}  // namespace zsol
