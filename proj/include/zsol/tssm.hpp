#pragma once

// Text self-similarity matching: turns a prompt title into a title embedding,
// weights the sentence embedding by its cosine similarity to that title
// embedding and produces the text self-support embedding used for alignment.

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "zsol/grid.hpp"

namespace zsol {

inline constexpr std::size_t kContextLength = 77;
inline constexpr std::size_t kMaxContentTokens = kContextLength - 2;
inline constexpr std::size_t kMaxTitleTokens = 3;
inline constexpr std::uint32_t kStartOfText = 49406;
inline constexpr std::uint32_t kEndOfText = 49407;

struct TitleSpan {
    std::size_t start = 0;
    std::size_t length = 0;
    friend bool operator==(const TitleSpan&, const TitleSpan&) = default;
};

/// Fixed-length token ids: class marker, content, end marker, zero padding.
struct TokenSequence {
    std::array<std::uint32_t, kContextLength> ids{};
    std::size_t class_index = 0;
    std::size_t end_index = 0;
    TitleSpan title;

    /// Number of content tokens between the markers.
    std::size_t content_length() const { return end_index - class_index - 1; }

    /// Throws std::invalid_argument when marker positions, padding or the
    /// title span are inconsistent.
    void validate() const;

    friend bool operator==(const TokenSequence&, const TokenSequence&) = default;
};

/// "A photo of {title}". Throws on an empty or all-whitespace title.
std::string build_prompt(std::string_view title);

/// Wraps raw content ids with the class/end markers and pads to 77. The span
/// is given relative to `raw_ids` and is clamped to kMaxTitleTokens.
TokenSequence pad_tokens(std::span<const std::uint32_t> raw_ids, TitleSpan raw_title);

class Tokenizer {
public:
    virtual ~Tokenizer() = default;
    virtual std::vector<std::uint32_t> encode(std::string_view text) const = 0;
};

/// Whitespace split, lower-casing, FNV-1a folded to 16 bits. Ids land in
/// [1, 49405] so they never collide with padding or the markers.
class HashTokenizer final : public Tokenizer {
public:
    std::vector<std::uint32_t> encode(std::string_view text) const override;
};

/// Tokenizes build_prompt(title) and locates the title inside it.
TokenSequence tokenize_prompt(const Tokenizer& tokenizer, std::string_view title);

/// Deterministic stand-in for a frozen text encoder: every token id maps to a
/// fixed pseudo-random N(0, 1/dim) vector.
class HashEmbedder {
public:
    explicit HashEmbedder(std::size_t dim, std::uint64_t seed = 0);

    std::size_t dim() const { return dim_; }
    std::vector<double> token_vector(std::uint32_t id) const;

    /// 77 x dim; padding rows are zero.
    EmbeddingMatrix token_embeddings(const TokenSequence& seq) const;
    /// Unit-norm mean of the content rows.
    std::vector<double> sentence_embedding(const TokenSequence& seq) const;

private:
    std::size_t dim_;
    std::uint64_t seed_;
};

/// Attention-pooled title vector. The title window (k <= 3 rows) slides over
/// the content positions as a 1-D kernel; window p gets response
/// r_p = sum_j <E[start + j], E[p + j]>, and the result is the softmax(r)
/// weighted sum of the window means.
std::vector<double> title_embedding(const TokenSequence& seq, const EmbeddingMatrix& token_embeddings);

struct TssmFusion {
    double weight = 0.0;
    std::vector<double> self_support;
};

/// weight = cos(sentence, title); self_support = weight * sentence + title.
TssmFusion tssm_fuse(std::span<const double> sentence, std::span<const double> title);

struct TextBundle {
    EmbeddingMatrix token_embeddings;
    std::vector<double> sentence;
    std::vector<double> title;
    std::vector<double> self_support;
    double weight = 0.0;
    TitleSpan title_span;
};

TextBundle build_text_bundle(const TokenSequence& seq, EmbeddingMatrix token_embeddings,
                             std::span<const double> sentence);

/// Token file: 'ZSTK' | 0x01 | 77 x u32 LE ids | start, length, class, end as u16 LE.
std::string encode_tokens(const TokenSequence& seq);
TokenSequence decode_tokens(std::string_view bytes, const std::string& what = "tokens");
void write_tokens(const std::filesystem::path& path, const TokenSequence& seq);
TokenSequence read_tokens(const std::filesystem::path& path);

}  // namespace zsol
