#pragma once

// Tensor ("ZSOL") and point ("ZSPT") binary files.
//
// Tensor:  'Z' 'S' 'O' 'L' | version 0x01 | dtype 0x01 (f32 LE) | ndim | 0x00 |
//          ndim x u32 LE dims | row-major f32 LE payload
// Points:  'Z' 'S' 'P' 'T' | version 0x01 | u32 LE count | count x (x, y) f32 LE |
//          presence byte (0 or 1) | [count x f32 LE confidences]

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "zsol/grid.hpp"

namespace zsol {

struct Tensor {
    std::vector<std::uint32_t> dims;
    std::vector<float> data;

    std::size_t element_count() const;
    friend bool operator==(const Tensor&, const Tensor&) = default;
};

std::string encode_tensor(const Tensor& t);
Tensor decode_tensor(std::string_view bytes, const std::string& what = "tensor");

void write_tensor(const std::filesystem::path& path, const Tensor& t);
Tensor read_tensor(const std::filesystem::path& path);

Tensor to_tensor(const Grid& g);
Tensor to_tensor(const EmbeddingMatrix& m);
/// Patch grid of shape (grid_h, grid_w, dim).
Tensor to_tensor(const EmbeddingMatrix& m, std::size_t grid_h, std::size_t grid_w);

/// Accepts 2-D tensors only.
Grid grid_from_tensor(const Tensor& t);
/// Accepts (N, D), (D) as a single row, and (gh, gw, D) flattened to gh*gw rows.
EmbeddingMatrix embeddings_from_tensor(const Tensor& t);

std::string encode_points(const PointSet& p);
PointSet decode_points_file(std::string_view bytes, const std::string& what = "points");

void write_points(const std::filesystem::path& path, const PointSet& p);
PointSet read_points(const std::filesystem::path& path);

}  // namespace zsol
