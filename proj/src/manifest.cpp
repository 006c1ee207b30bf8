#include "zsol/manifest.hpp"

#include <json.hpp>

#include "zsol/detail/bytes.hpp"
#include "zsol/errors.hpp"
#include "zsol/tensor_io.hpp"

namespace zsol {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

template <class T>
T field(const json& j, const char* key, const std::string& where) {
    if (!j.contains(key)) throw DataError(where + ": missing field '" + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw DataError(where + ": field '" + key + "': " + e.what());
    }
}

}  // namespace

Manifest load_manifest(const fs::path& path) {
    const std::string text = detail::read_file(path);
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw DataError(path.string() + ": " + e.what());
    }
    const std::string where = path.string();
    if (!doc.is_object() || field<int>(doc, "version", where) != 1) {
        throw DataError(where + ": expected a version 1 manifest object");
    }
    Manifest m;
    m.root = path.parent_path();
    const auto samples = field<json>(doc, "samples", where);
    if (!samples.is_array()) throw DataError(where + ": 'samples' must be an array");
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const json& s = samples[i];
        const std::string at = where + ": samples[" + std::to_string(i) + "]";
        ManifestRecord r;
        r.id = field<std::string>(s, "id", at);
        r.width = field<std::size_t>(s, "width", at);
        r.height = field<std::size_t>(s, "height", at);
        if (r.width == 0 || r.height == 0) throw DataError(at + ": image size must be positive");
        if (s.contains("category") && !s["category"].is_null()) {
            r.category = field<std::string>(s, "category", at);
        }
        r.title = s.value("title", std::string());
        for (const auto& p : field<std::vector<std::string>>(s, "patch_embeddings", at)) {
            r.patch_embeddings.emplace_back(p);
        }
        if (r.patch_embeddings.empty()) throw DataError(at + ": no patch embedding files");
        r.tokens = field<std::string>(s, "tokens", at);
        r.token_embeddings = field<std::string>(s, "token_embeddings", at);
        r.sentence_embedding = field<std::string>(s, "sentence_embedding", at);
        r.points = field<std::string>(s, "points", at);

        std::vector<fs::path> files = r.patch_embeddings;
        files.insert(files.end(), {r.tokens, r.token_embeddings, r.sentence_embedding, r.points});
        for (const auto& f : files) {
            if (!fs::is_regular_file(m.root / f)) {
                throw DataError(at + ": referenced file does not exist: " + (m.root / f).string());
            }
        }
        m.records.push_back(std::move(r));
    }
    return m;
}

std::string encode_manifest(const Manifest& m) {
    json samples = json::array();
    for (const auto& r : m.records) {
        json s;
        s["id"] = r.id;
        s["width"] = r.width;
        s["height"] = r.height;
        s["category"] = r.category ? json(*r.category) : json(nullptr);
        s["title"] = r.title;
        json windows = json::array();
        for (const auto& p : r.patch_embeddings) windows.push_back(p.generic_string());
        s["patch_embeddings"] = windows;
        s["tokens"] = r.tokens.generic_string();
        s["token_embeddings"] = r.token_embeddings.generic_string();
        s["sentence_embedding"] = r.sentence_embedding.generic_string();
        s["points"] = r.points.generic_string();
        samples.push_back(std::move(s));
    }
    json doc;
    doc["version"] = 1;
    doc["samples"] = std::move(samples);
    return doc.dump(2) + "\n";
}

void save_manifest(const fs::path& path, const Manifest& m) {
    detail::write_file(path, encode_manifest(m));
}

LoadedSample load_sample(const Manifest& m, const ManifestRecord& rec) {
    LoadedSample s;
    s.record = &rec;
    s.plan = plan_windows(rec.height, rec.width);
    const std::string where = "sample '" + rec.id + "'";
    if (rec.patch_embeddings.size() != s.plan.size()) {
        throw DataError(where + ": " + std::to_string(rec.patch_embeddings.size()) +
                        " patch embedding files but the window plan has " +
                        std::to_string(s.plan.size()) + " windows");
    }
    for (const auto& f : rec.patch_embeddings) {
        const Tensor t = read_tensor(m.root / f);
        if (t.dims.size() != 3) throw DataError((m.root / f).string() + ": expected (gh, gw, D) tensor");
        PatchGrid g(t.dims[0], t.dims[1], embeddings_from_tensor(t));
        if (s.plan.window_height % g.grid_h != 0 || s.plan.window_width % g.grid_w != 0 ||
            s.plan.window_height / g.grid_h != s.plan.window_width / g.grid_w) {
            throw DataError((m.root / f).string() + ": patch grid does not tile the window");
        }
        if (!s.windows.empty() && (g.grid_h != s.windows.front().grid_h ||
                                   g.embeddings.dim() != s.windows.front().embeddings.dim())) {
            throw DataError(where + ": windows disagree on patch grid or dimension");
        }
        s.windows.push_back(std::move(g));
    }
    const TokenSequence seq = read_tokens(m.root / rec.tokens);
    EmbeddingMatrix tok = embeddings_from_tensor(read_tensor(m.root / rec.token_embeddings));
    if (tok.rows() != kContextLength) throw DataError(where + ": token embeddings must have 77 rows");
    const EmbeddingMatrix sent = embeddings_from_tensor(read_tensor(m.root / rec.sentence_embedding));
    if (sent.rows() != 1 || sent.dim() != tok.dim()) {
        throw DataError(where + ": sentence embedding must be a single row matching token width");
    }
    s.text = build_text_bundle(seq, std::move(tok), sent.row_as_double(0));
    s.gt = read_points(m.root / rec.points);
    try {
        s.gt.validate(rec.height, rec.width);
    } catch (const std::invalid_argument& e) {
        throw DataError(where + ": " + e.what());
    }
    return s;
}

std::vector<TrainingSample> training_samples(const LoadedSample& s) {
    std::vector<TrainingSample> out;
    for (std::size_t k = 0; k < s.plan.size(); ++k) {
        const auto [oy, ox] = s.plan.origins[k];
        TrainingSample t;
        t.patches = s.windows[k];
        t.text = s.text.self_support;
        t.height = s.plan.window_height;
        t.width = s.plan.window_width;
        for (const Point& p : s.gt.points) {
            const float x = p.x - static_cast<float>(ox);
            const float y = p.y - static_cast<float>(oy);
            if (x >= 0.0f && y >= 0.0f && x < static_cast<float>(t.width) &&
                y < static_cast<float>(t.height)) {
                t.points.points.push_back({x, y});
            }
        }
        out.push_back(std::move(t));
    }
    return out;
}

}  // namespace zsol
