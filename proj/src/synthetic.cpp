#include "zsol/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <stdexcept>

#include "zsol/locate.hpp"
#include "zsol/manifest.hpp"
#include "zsol/tensor_io.hpp"
#include "zsol/tssm.hpp"

namespace zsol {

void SyntheticSceneSpec::validate() const {
    if (min_objects > max_objects) throw std::invalid_argument("min_objects exceeds max_objects");
    if (patch_size == 0) throw std::invalid_argument("patch_size must be positive");
    if (height % patch_size != 0 || width % patch_size != 0) {
        throw std::invalid_argument("image size must be a multiple of patch_size");
    }
    if (height < 3 * patch_size || width < 3 * patch_size) {
        throw std::invalid_argument("image must span at least 3 x 3 patches");
    }
    if (kWindowStride % patch_size != 0) {
        throw std::invalid_argument("patch_size must divide the window stride");
    }
    if (dim == 0) throw std::invalid_argument("dim must be positive");
    if (!(snr > 0.0)) throw std::invalid_argument("snr must be positive");
    if (!(jitter >= 0.0) || 2.0 * jitter >= static_cast<double>(patch_size)) {
        throw std::invalid_argument("jitter must lie in [0, patch_size / 2)");
    }
    if (titles.empty()) throw std::invalid_argument("at least one title is required");
    if (splits.empty()) throw std::invalid_argument("at least one split is required");
    for (const auto& [name, n] : splits) {
        if (name.empty()) throw std::invalid_argument("split names must be non-empty");
    }
}

namespace {

std::vector<double> unit(std::vector<double> v) {
    double n = 0.0;
    for (double x : v) n += x * x;
    n = std::sqrt(n);
    if (n > 0.0) {
        for (double& x : v) x /= n;
    }
    return v;
}

// Interior patch cells, pairwise Chebyshev distance >= 2.
std::vector<std::pair<std::size_t, std::size_t>> place_objects(std::size_t gh, std::size_t gw,
                                                               std::size_t count,
                                                               std::mt19937_64& rng) {
    std::vector<std::pair<std::size_t, std::size_t>> cells;
    for (std::size_t r = 1; r + 1 < gh; ++r) {
        for (std::size_t c = 1; c + 1 < gw; ++c) cells.emplace_back(r, c);
    }
    std::shuffle(cells.begin(), cells.end(), rng);
    std::vector<std::pair<std::size_t, std::size_t>> chosen;
    for (const auto& cell : cells) {
        if (chosen.size() == count) break;
        const bool clear = std::none_of(chosen.begin(), chosen.end(), [&](const auto& o) {
            const auto dr = cell.first > o.first ? cell.first - o.first : o.first - cell.first;
            const auto dc = cell.second > o.second ? cell.second - o.second : o.second - cell.second;
            return std::max(dr, dc) < 2;
        });
        if (clear) chosen.push_back(cell);
    }
    if (chosen.size() < count) throw std::invalid_argument("scene too small for the object count");
    return chosen;
}

}  // namespace

std::vector<std::filesystem::path> gen_synthetic(const SyntheticSceneSpec& spec,
                                                 const std::filesystem::path& out) {
    spec.validate();
    const HashTokenizer tokenizer;
    const HashEmbedder embedder(spec.dim, 0);
    const std::size_t gh = spec.height / spec.patch_size;
    const std::size_t gw = spec.width / spec.patch_size;
    const WindowPlan plan = plan_windows(spec.height, spec.width);
    const std::size_t wgh = plan.window_height / spec.patch_size;
    const std::size_t wgw = plan.window_width / spec.patch_size;
    const double noise_sd = 1.0 / std::sqrt(static_cast<double>(spec.dim));

    std::vector<std::filesystem::path> manifests;
    for (std::size_t s = 0; s < spec.splits.size(); ++s) {
        const auto& [split, scenes] = spec.splits[s];
        const auto dir = out / split;
        std::filesystem::create_directories(dir);
        Manifest manifest;
        manifest.root = dir;
        std::mt19937_64 rng(spec.seed * 0x9E3779B97F4A7C15ULL + s + 1);
        std::normal_distribution<double> noise(0.0, noise_sd);
        std::uniform_real_distribution<double> offset(-spec.jitter, spec.jitter);

        for (std::size_t i = 0; i < scenes; ++i) {
            char id[32];
            std::snprintf(id, sizeof id, "scene_%03zu", i);
            const std::string& title = spec.titles[i % spec.titles.size()];

            const TokenSequence seq = tokenize_prompt(tokenizer, title);
            EmbeddingMatrix tok = embedder.token_embeddings(seq);
            const EmbeddingMatrix sent = EmbeddingMatrix::from_vector(embedder.sentence_embedding(seq));
            const TextBundle text = build_text_bundle(seq, tok, sent.row_as_double(0));
            const std::vector<double> target = unit(text.self_support);

            std::uniform_int_distribution<std::size_t> count_dist(spec.min_objects, spec.max_objects);
            const auto cells = place_objects(gh, gw, count_dist(rng), rng);
            std::vector<char> occupied(gh * gw, 0);
            PointSet gt;
            for (const auto& [r, c] : cells) {
                occupied[r * gw + c] = 1;
                const double centre = (static_cast<double>(spec.patch_size) - 1.0) / 2.0;
                gt.points.push_back({static_cast<float>(c * spec.patch_size + centre + offset(rng)),
                                     static_cast<float>(r * spec.patch_size + centre + offset(rng))});
            }

            EmbeddingMatrix patches(gh * gw, spec.dim);
            for (std::size_t p = 0; p < gh * gw; ++p) {
                auto row = patches.row(p);
                for (std::size_t d = 0; d < spec.dim; ++d) {
                    const double g = noise(rng);
                    row[d] = static_cast<float>(occupied[p] ? target[d] + g / spec.snr : g);
                }
            }

            ManifestRecord rec;
            rec.id = id;
            rec.width = spec.width;
            rec.height = spec.height;
            rec.category = title;
            rec.title = title;
            for (std::size_t k = 0; k < plan.size(); ++k) {
                const std::size_t r0 = plan.origins[k].y / spec.patch_size;
                const std::size_t c0 = plan.origins[k].x / spec.patch_size;
                EmbeddingMatrix win(wgh * wgw, spec.dim);
                for (std::size_t r = 0; r < wgh; ++r) {
                    for (std::size_t c = 0; c < wgw; ++c) {
                        const auto src = patches.row((r0 + r) * gw + c0 + c);
                        std::copy(src.begin(), src.end(), win.row(r * wgw + c).begin());
                    }
                }
                const std::string name = rec.id + ".w" + std::to_string(k) + ".zsol";
                write_tensor(dir / name, to_tensor(win, wgh, wgw));
                rec.patch_embeddings.emplace_back(name);
            }
            rec.tokens = rec.id + ".zstk";
            rec.token_embeddings = rec.id + ".tok.zsol";
            rec.sentence_embedding = rec.id + ".sent.zsol";
            rec.points = rec.id + ".zspt";
            write_tokens(dir / rec.tokens, seq);
            write_tensor(dir / rec.token_embeddings, to_tensor(tok));
            write_tensor(dir / rec.sentence_embedding, to_tensor(sent));
            write_points(dir / rec.points, gt);
            manifest.records.push_back(std::move(rec));
        }
        const auto path = dir / "manifest.json";
        save_manifest(path, manifest);
        manifests.push_back(path);
    }
    return manifests;
}

}  // namespace zsol
