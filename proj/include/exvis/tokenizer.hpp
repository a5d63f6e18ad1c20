// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "exvis/errors.hpp"
#include "exvis/image.hpp"
#include "exvis/synth.hpp"

namespace exvis {

using TokenId = std::uint32_t;

enum class Role : std::uint8_t { Input, Output };

/// Token ids plus the per-token loss role.
struct TokenSequence {
    std::vector<TokenId> ids;
    std::vector<Role> role_mask;

    std::size_t size() const noexcept { return ids.size(); }
    std::size_t output_count() const noexcept;
    bool operator==(const TokenSequence&) const = default;
};

/// Unified id space, laid out as
///
///     [structural | RES_H 1..R | RES_W 1..R | 256 bytes | pieces | L^3 image codes]
///
/// Structural ids are fixed; everything after them is offset by the
/// resolution limit R and the word count.
class Vocab {
public:
    static constexpr TokenId kPad = 0;
    static constexpr TokenId kBos = 1;
    static constexpr TokenId kEos = 2;
    static constexpr TokenId kSep = 3;
    static constexpr TokenId kBoi = 4;
    static constexpr TokenId kEoi = 5;
    static constexpr TokenId kEol = 6;
    static constexpr TokenId kResBase = 7;

    /// Pieces must be unique and non-empty. Throws DimensionError for
    /// levels outside [2, 256] or max_resolution < 1.
    Vocab(std::vector<std::string> words, int levels = 8, int max_resolution = 32);

    int levels() const noexcept { return levels_; }
    int max_resolution() const noexcept { return max_res_; }

    TokenId res_h(int h) const;
    TokenId res_w(int w) const;
    /// Resolution carried by a RES_H / RES_W id, or nullopt.
    std::optional<int> res_h_value(TokenId id) const noexcept;
    std::optional<int> res_w_value(TokenId id) const noexcept;

    TokenId byte_base() const noexcept { return byte_base_; }
    TokenId word_base() const noexcept { return word_base_; }
    TokenId image_base() const noexcept { return image_base_; }
    std::size_t image_token_count() const noexcept;
    std::size_t size() const noexcept { return size_; }

    bool is_byte(TokenId id) const noexcept { return id >= byte_base_ && id < word_base_; }
    bool is_word(TokenId id) const noexcept { return id >= word_base_ && id < image_base_; }
    bool is_text(TokenId id) const noexcept { return id >= byte_base_ && id < image_base_; }
    bool is_image(TokenId id) const noexcept { return id >= image_base_ && id < size_; }

    const std::vector<std::string>& words() const noexcept { return words_; }
    std::optional<TokenId> word_id(std::string_view word) const;

    std::vector<TokenId> encode_text(std::string_view s) const;
    /// Throws UnknownIdError for ids outside the text ranges.
    std::string decode_text(const std::vector<TokenId>& ids) const;

    TokenId pixel_token(Rgb c) const noexcept;
    /// Throws UnknownIdError for non-image ids.
    Rgb token_pixel(TokenId id) const;

    std::string to_json() const;
    static Vocab from_json(std::string_view text);
    void save(const std::filesystem::path& path) const;
    static Vocab load(const std::filesystem::path& path);

    bool operator==(const Vocab& other) const noexcept {
        return words_ == other.words_ && levels_ == other.levels_ && max_res_ == other.max_res_;
    }

private:
    std::vector<std::string> words_;
    std::unordered_map<std::string, TokenId> word_index_;
    int levels_;
    int max_res_;
    TokenId byte_base_;
    TokenId word_base_;
    TokenId image_base_;
    std::size_t size_;
};

/// Splits text into pieces: a letter/digit run or a punctuation run, each
/// optionally led by one space, or a whitespace run. Concatenating the pieces
/// gives back the input.
std::vector<std::string_view> pretokenize_text(std::string_view s);

/// Piece vocabulary, most frequent first, ties by first appearance.
/// `max_words` caps the number of piece entries; anything else falls back to
/// byte tokens. Throws EmptyDatasetError for an empty corpus.
Vocab build_text_vocab(const std::vector<std::string>& corpus, std::size_t max_words,
                       int levels = 8, int max_resolution = 32);

/// Row-major grid of image ids.
std::vector<TokenId> quantize_image(const Vocab& v, const Image& img);
Image dequantize_image(const Vocab& v, const std::vector<TokenId>& grid, int width, int height);

/// BOS, image block, SEP, instruction, SEP, [image block]. The output block,
/// BOI through EOI, is the only Output-flagged span. Throws OversizeError when
/// an image exceeds the vocab's resolution limit.
TokenSequence assemble_sequence(const Vocab& v, const Image& input, std::string_view instruction,
                                const std::optional<Image>& output);

struct ParsedSequence {
    Image input;
    std::string instruction;
    std::optional<Image> output;
};

/// Throws MalformedSequenceError naming the first offending index; a truncated
/// sequence reports the index one past its end.
ParsedSequence parse_sequence(const Vocab& v, const std::vector<TokenId>& ids);

/// Role mask implied by the layout of a well-formed sequence.
std::vector<Role> derive_role_mask(const Vocab& v, const std::vector<TokenId>& ids);

/// Sequence indices grouped by floor(length / bucket_width), input order kept.
std::map<std::size_t, std::vector<std::size_t>> bucket_by_length(
    const std::vector<TokenSequence>& seqs, std::size_t bucket_width);

/// (A, a, B) + (B, b, C) -> (A, "a b", C). Throws ChainMismatchError unless
/// t1.target equals t2.source.
Triplet collapse_multiturn(const Triplet& t1, const Triplet& t2);

/// u32 length then u32 ids, all little-endian, per sequence.
void write_sequences(const std::filesystem::path& path, const std::vector<TokenSequence>& seqs);
std::vector<TokenSequence> read_sequences(const std::filesystem::path& path, const Vocab& v);

}  // namespace exvis
