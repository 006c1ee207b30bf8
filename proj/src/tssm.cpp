#include "zsol/tssm.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <random>
#include <stdexcept>

#include "zsol/detail/bytes.hpp"

namespace zsol {

namespace {

constexpr std::string_view kPromptPrefix = "A photo of";

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

bool is_blank(std::string_view s) {
    return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

}  // namespace

void TokenSequence::validate() const {
    if (end_index >= kContextLength || class_index >= end_index) {
        throw std::invalid_argument("token sequence: invalid class/end marker positions");
    }
    if (content_length() == 0) throw std::invalid_argument("token sequence: no content tokens");
    for (std::size_t i = end_index + 1; i < kContextLength; ++i) {
        if (ids[i] != 0) throw std::invalid_argument("token sequence: non-zero id after end marker");
    }
    if (title.length < 1 || title.length > kMaxTitleTokens) {
        throw std::invalid_argument("token sequence: title span length must be 1..3");
    }
    if (title.start <= class_index || title.start + title.length > end_index) {
        throw std::invalid_argument("token sequence: title span outside content");
    }
}

std::string build_prompt(std::string_view title) {
    if (title.empty() || is_blank(title)) throw std::invalid_argument("prompt title is empty");
    return std::string(kPromptPrefix) + " " + std::string(title);
}

TokenSequence pad_tokens(std::span<const std::uint32_t> raw_ids, TitleSpan raw_title) {
    if (raw_ids.empty()) throw std::invalid_argument("pad_tokens: no content tokens");
    if (raw_ids.size() > kMaxContentTokens) {
        throw std::invalid_argument("pad_tokens: " + std::to_string(raw_ids.size()) +
                                    " content tokens exceed the limit of 75");
    }
    if (raw_title.length == 0 || raw_title.start + raw_title.length > raw_ids.size()) {
        throw std::invalid_argument("pad_tokens: title span outside content");
    }
    TokenSequence seq;
    seq.ids[0] = kStartOfText;
    std::copy(raw_ids.begin(), raw_ids.end(), seq.ids.begin() + 1);
    seq.class_index = 0;
    seq.end_index = raw_ids.size() + 1;
    seq.ids[seq.end_index] = kEndOfText;
    seq.title = {raw_title.start + 1, std::min(raw_title.length, kMaxTitleTokens)};
    return seq;
}

std::vector<std::uint32_t> HashTokenizer::encode(std::string_view text) const {
    std::vector<std::uint32_t> ids;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        std::uint32_t h = 2166136261u;
        bool any = false;
        while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) {
            h ^= static_cast<std::uint8_t>(std::tolower(static_cast<unsigned char>(text[i])));
            h *= 16777619u;
            any = true;
            ++i;
        }
        if (any) {
            const std::uint32_t folded = (h >> 16) ^ (h & 0xffffu);
            ids.push_back(1 + folded % (kStartOfText - 1));
        }
    }
    return ids;
}

TokenSequence tokenize_prompt(const Tokenizer& tokenizer, std::string_view title) {
    const std::string prompt = build_prompt(title);
    const auto ids = tokenizer.encode(prompt);
    const auto prefix = tokenizer.encode(kPromptPrefix);
    const auto title_ids = tokenizer.encode(title);
    if (title_ids.empty() || prefix.size() + title_ids.size() != ids.size()) {
        throw std::invalid_argument("tokenizer is not prefix-consistent for the prompt template");
    }
    return pad_tokens(ids, {prefix.size(), title_ids.size()});
}

HashEmbedder::HashEmbedder(std::size_t dim, std::uint64_t seed) : dim_(dim), seed_(seed) {
    if (dim == 0) throw std::invalid_argument("embedding dimension must be >= 1");
}

std::vector<double> HashEmbedder::token_vector(std::uint32_t id) const {
    std::mt19937_64 rng(splitmix64(seed_ ^ (std::uint64_t{id} << 20)));
    std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(dim_)));
    std::vector<double> v(dim_);
    for (auto& x : v) x = normal(rng);
    return v;
}

EmbeddingMatrix HashEmbedder::token_embeddings(const TokenSequence& seq) const {
    seq.validate();
    EmbeddingMatrix m(kContextLength, dim_);
    for (std::size_t p = 0; p <= seq.end_index; ++p) {
        const auto v = token_vector(seq.ids[p]);
        std::copy(v.begin(), v.end(), m.row(p).begin());
    }
    return m;
}

std::vector<double> HashEmbedder::sentence_embedding(const TokenSequence& seq) const {
    const auto m = token_embeddings(seq);
    std::vector<double> mean(dim_, 0.0);
    for (std::size_t p = seq.class_index + 1; p < seq.end_index; ++p) {
        auto r = m.row(p);
        for (std::size_t d = 0; d < dim_; ++d) mean[d] += r[d];
    }
    double norm = 0.0;
    for (double v : mean) norm += v * v;
    norm = std::sqrt(norm);
    if (norm > 0.0) {
        for (double& v : mean) v /= norm;
    }
    return mean;
}

std::vector<double> title_embedding(const TokenSequence& seq, const EmbeddingMatrix& emb) {
    seq.validate();
    if (emb.rows() != kContextLength) {
        throw std::invalid_argument("title_embedding: expected 77 token embedding rows");
    }
    const std::size_t k = seq.title.length;
    const std::size_t dim = emb.dim();
    const std::size_t first = seq.class_index + 1;
    const std::size_t last = seq.end_index - k;  // last window start inside content

    std::vector<double> responses;
    std::vector<std::vector<double>> means;
    for (std::size_t p = first; p <= last; ++p) {
        double r = 0.0;
        std::vector<double> mean(dim, 0.0);
        for (std::size_t j = 0; j < k; ++j) {
            auto kernel = emb.row(seq.title.start + j);
            auto row = emb.row(p + j);
            for (std::size_t d = 0; d < dim; ++d) {
                r += static_cast<double>(kernel[d]) * row[d];
                mean[d] += row[d];
            }
        }
        for (double& m : mean) m /= static_cast<double>(k);
        responses.push_back(r);
        means.push_back(std::move(mean));
    }

    const double peak = *std::max_element(responses.begin(), responses.end());
    double z = 0.0;
    for (double& r : responses) {
        r = std::exp(r - peak);
        z += r;
    }
    std::vector<double> out(dim, 0.0);
    for (std::size_t w = 0; w < means.size(); ++w) {
        const double a = responses[w] / z;
        for (std::size_t d = 0; d < dim; ++d) out[d] += a * means[w][d];
    }
    return out;
}

TssmFusion tssm_fuse(std::span<const double> sentence, std::span<const double> title) {
    TssmFusion f;
    f.weight = cosine_similarity(sentence, title);
    f.self_support.resize(sentence.size());
    for (std::size_t i = 0; i < sentence.size(); ++i) {
        f.self_support[i] = f.weight * sentence[i] + title[i];
    }
    return f;
}

TextBundle build_text_bundle(const TokenSequence& seq, EmbeddingMatrix token_embeddings,
                             std::span<const double> sentence) {
    if (sentence.size() != token_embeddings.dim()) {
        throw std::invalid_argument("sentence embedding dimension does not match token embeddings");
    }
    TextBundle b;
    b.title = title_embedding(seq, token_embeddings);
    b.sentence.assign(sentence.begin(), sentence.end());
    auto fused = tssm_fuse(b.sentence, b.title);
    b.weight = fused.weight;
    b.self_support = std::move(fused.self_support);
    b.token_embeddings = std::move(token_embeddings);
    b.title_span = seq.title;
    return b;
}

std::string encode_tokens(const TokenSequence& seq) {
    seq.validate();
    detail::ByteWriter w;
    w.bytes("ZSTK");
    w.u8(0x01);
    for (auto id : seq.ids) w.u32(id);
    w.u16(static_cast<std::uint16_t>(seq.title.start));
    w.u16(static_cast<std::uint16_t>(seq.title.length));
    w.u16(static_cast<std::uint16_t>(seq.class_index));
    w.u16(static_cast<std::uint16_t>(seq.end_index));
    return w.str();
}

TokenSequence decode_tokens(std::string_view bytes, const std::string& what) {
    detail::ByteReader r(bytes, what);
    r.expect_magic("ZSTK");
    if (auto v = r.u8(); v != 0x01) r.fail("unsupported version " + std::to_string(v));
    TokenSequence seq;
    for (auto& id : seq.ids) id = r.u32();
    seq.title.start = r.u16();
    seq.title.length = r.u16();
    seq.class_index = r.u16();
    seq.end_index = r.u16();
    r.expect_end();
    try {
        seq.validate();
    } catch (const std::invalid_argument& e) {
        r.fail(e.what());
    }
    return seq;
}

void write_tokens(const std::filesystem::path& path, const TokenSequence& seq) {
    detail::write_file(path, encode_tokens(seq));
}

TokenSequence read_tokens(const std::filesystem::path& path) {
    return decode_tokens(detail::read_file(path), path.string());
}

}  // namespace zsol
