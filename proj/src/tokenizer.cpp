// SPDX-License-Identifier: Apache-2.0
#include "exvis/tokenizer.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace exvis {

namespace {

bool is_space(unsigned char c) noexcept {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
}

/// Letters, digits and every non-ASCII byte (so UTF-8 words stay whole).
bool is_wordish(unsigned char c) noexcept {
    return c >= 0x80 || (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}

bool is_punct(unsigned char c) noexcept { return !is_space(c) && !is_wordish(c); }

}  // namespace

std::vector<std::string_view> pretokenize_text(std::string_view s) {
    std::vector<std::string_view> out;
    const auto n = s.size();
    auto at = [&](std::size_t i) { return static_cast<unsigned char>(s[i]); };
    auto run = [&](std::size_t i, auto pred) {
        while (i < n && pred(at(i))) {
            ++i;
        }
        return i;
    };
    std::size_t i = 0;
    while (i < n) {
        std::size_t start = i;
        if (at(i) == ' ' && i + 1 < n && !is_space(at(i + 1))) {
            ++i;  // a single space leads the following piece
        }
        if (is_wordish(at(i))) {
            i = run(i, is_wordish);
        } else if (is_punct(at(i))) {
            i = run(i, is_punct);
        } else {
            std::size_t j = run(i, is_space);
            // leave a final plain space to lead the next piece
            if (j < n && j - i > 1 && at(j - 1) == ' ') {
                --j;
            }
            i = j;
        }
        out.push_back(s.substr(start, i - start));
    }
    return out;
}

std::size_t TokenSequence::output_count() const noexcept {
    return static_cast<std::size_t>(std::count(role_mask.begin(), role_mask.end(), Role::Output));
}

Vocab::Vocab(std::vector<std::string> words, int levels, int max_resolution)
    : words_(std::move(words)), levels_(levels), max_res_(max_resolution) {
    if (levels < 2 || levels > 256) {
        throw DimensionError("quantizer levels must be in [2, 256]");
    }
    if (max_resolution < 1) {
        throw DimensionError("max resolution must be >= 1");
    }
    byte_base_ = kResBase + 2 * static_cast<TokenId>(max_res_);
    word_base_ = byte_base_ + 256;
    image_base_ = word_base_ + static_cast<TokenId>(words_.size());
    size_ = image_base_ + image_token_count();
    for (std::size_t i = 0; i < words_.size(); ++i) {
        const auto& w = words_[i];
        if (w.empty()) {
            throw ConfigError("vocab pieces must be non-empty");
        }
        if (!word_index_.emplace(w, word_base_ + static_cast<TokenId>(i)).second) {
            throw ConfigError("duplicate vocab word '" + w + "'");
        }
    }
}

std::size_t Vocab::image_token_count() const noexcept {
    const auto l = static_cast<std::size_t>(levels_);
    return l * l * l;
}

TokenId Vocab::res_h(int h) const {
    if (h < 1 || h > max_res_) {
        throw OversizeError("height " + std::to_string(h) + " outside [1, " +
                            std::to_string(max_res_) + "]");
    }
    return kResBase + static_cast<TokenId>(h - 1);
}

TokenId Vocab::res_w(int w) const {
    if (w < 1 || w > max_res_) {
        throw OversizeError("width " + std::to_string(w) + " outside [1, " +
                            std::to_string(max_res_) + "]");
    }
    return kResBase + static_cast<TokenId>(max_res_ + w - 1);
}

std::optional<int> Vocab::res_h_value(TokenId id) const noexcept {
    if (id >= kResBase && id < kResBase + static_cast<TokenId>(max_res_)) {
        return static_cast<int>(id - kResBase) + 1;
    }
    return std::nullopt;
}

std::optional<int> Vocab::res_w_value(TokenId id) const noexcept {
    const TokenId base = kResBase + static_cast<TokenId>(max_res_);
    if (id >= base && id < byte_base_) {
        return static_cast<int>(id - base) + 1;
    }
    return std::nullopt;
}

std::optional<TokenId> Vocab::word_id(std::string_view word) const {
    const auto it = word_index_.find(std::string(word));
    if (it == word_index_.end()) {
        return std::nullopt;
    }
    return it->second;
}

std::vector<TokenId> Vocab::encode_text(std::string_view s) const {
    std::vector<TokenId> out;
    for (const auto piece : pretokenize_text(s)) {
        if (const auto id = word_id(piece)) {
            out.push_back(*id);
        } else {
            for (const char c : piece) {
                out.push_back(byte_base_ + static_cast<unsigned char>(c));
            }
        }
    }
    return out;
}

std::string Vocab::decode_text(const std::vector<TokenId>& ids) const {
    std::string out;
    for (const auto id : ids) {
        if (is_byte(id)) {
            out.push_back(static_cast<char>(id - byte_base_));
        } else if (is_word(id)) {
            out += words_[id - word_base_];
        } else {
            throw UnknownIdError("id " + std::to_string(id) + " is not a text token");
        }
    }
    return out;
}

TokenId Vocab::pixel_token(Rgb c) const noexcept {
    const auto l = static_cast<TokenId>(levels_);
    auto bin = [l](std::uint8_t v) { return static_cast<TokenId>(v) * l / 256; };
    return image_base_ + bin(c.r) * l * l + bin(c.g) * l + bin(c.b);
}

Rgb Vocab::token_pixel(TokenId id) const {
    if (!is_image(id)) {
        throw UnknownIdError("id " + std::to_string(id) + " is not an image token");
    }
    const auto l = static_cast<TokenId>(levels_);
    const TokenId code = id - image_base_;
    auto center = [l](TokenId bin) {
        return static_cast<std::uint8_t>((2 * bin + 1) * 256 / (2 * l));
    };
    return {center(code / (l * l)), center((code / l) % l), center(code % l)};
}

std::string Vocab::to_json() const {
    nlohmann::ordered_json j;
    nlohmann::ordered_json tokens = nlohmann::ordered_json::object();
    for (std::size_t i = 0; i < words_.size(); ++i) {
        tokens[words_[i]] = word_base_ + i;
    }
    j["text_tokens"] = tokens;
    j["L"] = levels_;
    j["max_resolution"] = max_res_;
    j["structural"] = {{"PAD", kPad},          {"BOS", kBos},
                       {"EOS", kEos},          {"SEP", kSep},
                       {"BOI", kBoi},          {"EOI", kEoi},
                       {"EOL", kEol},          {"RES_H_1", kResBase},
                       {"RES_W_1", kResBase + static_cast<TokenId>(max_res_)}};
    j["byte_base"] = byte_base_;
    j["image_base"] = image_base_;
    j["size"] = size_;
    return j.dump(2);
}

Vocab Vocab::from_json(std::string_view text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("vocab json: ") + e.what());
    }
    try {
        std::vector<std::pair<TokenId, std::string>> entries;
        for (const auto& [word, id] : j.at("text_tokens").items()) {
            entries.emplace_back(id.get<TokenId>(), word);
        }
        std::sort(entries.begin(), entries.end());
        std::vector<std::string> words;
        for (auto& e : entries) {
            words.push_back(std::move(e.second));
        }
        Vocab v(std::move(words), j.at("L").get<int>(), j.at("max_resolution").get<int>());
        for (std::size_t i = 0; i < entries.size(); ++i) {
            if (entries[i].first != v.word_base_ + i) {
                throw DataError("vocab json: word ids are not contiguous");
            }
        }
        if (j.at("size").get<std::size_t>() != v.size()) {
            throw DataError("vocab json: size field disagrees with layout");
        }
        return v;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("vocab json: ") + e.what());
    }
}

void Vocab::save(const std::filesystem::path& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) {
        throw DataError("cannot write " + path.string());
    }
    f << to_json() << '\n';
}

Vocab Vocab::load(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) {
        throw DataError("cannot read " + path.string());
    }
    std::stringstream ss;
    ss << f.rdbuf();
    return from_json(ss.str());
}

Vocab build_text_vocab(const std::vector<std::string>& corpus, std::size_t max_words, int levels,
                       int max_resolution) {
    if (corpus.empty()) {
        throw EmptyDatasetError("cannot build a vocabulary from an empty corpus");
    }
    struct Stat {
        std::size_t count{0};
        std::size_t first{0};
    };
    std::unordered_map<std::string, Stat> stats;
    std::size_t order = 0;
    for (const auto& line : corpus) {
        for (const auto piece : pretokenize_text(line)) {
            auto [it, inserted] = stats.try_emplace(std::string(piece));
            if (inserted) {
                it->second.first = order++;
            }
            ++it->second.count;
        }
    }
    std::vector<std::pair<std::string, Stat>> ranked(stats.begin(), stats.end());
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.second.count != b.second.count) {
            return a.second.count > b.second.count;
        }
        return a.second.first < b.second.first;
    });
    if (ranked.size() > max_words) {
        ranked.resize(max_words);
    }
    std::vector<std::string> words;
    words.reserve(ranked.size());
    for (auto& r : ranked) {
        words.push_back(std::move(r.first));
    }
    return Vocab(std::move(words), levels, max_resolution);
}

std::vector<TokenId> quantize_image(const Vocab& v, const Image& img) {
    std::vector<TokenId> grid;
    grid.reserve(static_cast<std::size_t>(img.width()) * static_cast<std::size_t>(img.height()));
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
            grid.push_back(v.pixel_token(img.at(x, y)));
        }
    }
    return grid;
}

Image dequantize_image(const Vocab& v, const std::vector<TokenId>& grid, int width, int height) {
    if (width < 0 || height < 0 ||
        grid.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
        throw DimensionError("grid size does not match " + std::to_string(width) + "x" +
                             std::to_string(height));
    }
    Image img(width, height);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            img.set(x, y, v.token_pixel(grid[static_cast<std::size_t>(y * width + x)]));
        }
    }
    return img;
}

namespace {

void append_image_block(const Vocab& v, const Image& img, std::vector<TokenId>& out) {
    out.push_back(Vocab::kBoi);
    out.push_back(v.res_h(img.height()));
    out.push_back(v.res_w(img.width()));
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
            out.push_back(v.pixel_token(img.at(x, y)));
        }
        out.push_back(Vocab::kEol);
    }
    out.push_back(Vocab::kEoi);
}

struct Cursor {
    const std::vector<TokenId>& ids;
    std::size_t pos{0};

    TokenId peek(const char* expected) const {
        if (pos >= ids.size()) {
            throw MalformedSequenceError(pos, std::string("truncated, expected ") + expected);
        }
        return ids[pos];
    }
    void expect(TokenId id, const char* name) {
        if (peek(name) != id) {
            throw MalformedSequenceError(pos, std::string("expected ") + name);
        }
        ++pos;
    }
};

/// Parses BOI..EOI starting at the cursor; returns the block's pixel ids.
std::vector<TokenId> parse_image_block(const Vocab& v, Cursor& c, int& width, int& height) {
    c.expect(Vocab::kBoi, "BOI");
    const auto h = v.res_h_value(c.peek("RES_H"));
    if (!h) {
        throw MalformedSequenceError(c.pos, "expected RES_H");
    }
    ++c.pos;
    const auto w = v.res_w_value(c.peek("RES_W"));
    if (!w) {
        throw MalformedSequenceError(c.pos, "expected RES_W");
    }
    ++c.pos;
    std::vector<TokenId> grid;
    grid.reserve(static_cast<std::size_t>(*h) * static_cast<std::size_t>(*w));
    for (int y = 0; y < *h; ++y) {
        for (int x = 0; x < *w; ++x) {
            const auto id = c.peek("image token");
            if (!v.is_image(id)) {
                throw MalformedSequenceError(c.pos, "expected image token (row " +
                                                        std::to_string(y) + " shorter than RES_W)");
            }
            grid.push_back(id);
            ++c.pos;
        }
        c.expect(Vocab::kEol, "EOL");
    }
    c.expect(Vocab::kEoi, "EOI (row count disagrees with RES_H)");
    width = *w;
    height = *h;
    return grid;
}

struct Layout {
    ParsedSequence parsed;
    std::size_t output_begin{0};
    std::size_t output_end{0};
};

Layout parse_layout(const Vocab& v, const std::vector<TokenId>& ids) {
    Layout out;
    Cursor c{ids};
    c.expect(Vocab::kBos, "BOS");
    int w = 0;
    int h = 0;
    auto grid = parse_image_block(v, c, w, h);
    out.parsed.input = dequantize_image(v, grid, w, h);
    c.expect(Vocab::kSep, "SEP");
    std::vector<TokenId> text;
    while (c.peek("SEP") != Vocab::kSep) {
        if (!v.is_text(ids[c.pos])) {
            throw MalformedSequenceError(c.pos, "non-text token inside instruction");
        }
        text.push_back(ids[c.pos++]);
    }
    ++c.pos;
    out.parsed.instruction = v.decode_text(text);
    out.output_begin = out.output_end = c.pos;
    if (c.pos < ids.size()) {
        grid = parse_image_block(v, c, w, h);
        out.parsed.output = dequantize_image(v, grid, w, h);
        out.output_end = c.pos;
        if (c.pos != ids.size()) {
            throw MalformedSequenceError(c.pos, "trailing tokens after output image");
        }
    }
    return out;
}

}  // namespace

TokenSequence assemble_sequence(const Vocab& v, const Image& input, std::string_view instruction,
                                const std::optional<Image>& output) {
    TokenSequence seq;
    auto& ids = seq.ids;
    ids.push_back(Vocab::kBos);
    append_image_block(v, input, ids);
    ids.push_back(Vocab::kSep);
    const auto text = v.encode_text(instruction);
    ids.insert(ids.end(), text.begin(), text.end());
    ids.push_back(Vocab::kSep);
    const std::size_t begin = ids.size();
    if (output) {
        append_image_block(v, *output, ids);
    }
    seq.role_mask.assign(ids.size(), Role::Input);
    std::fill(seq.role_mask.begin() + static_cast<std::ptrdiff_t>(begin), seq.role_mask.end(),
              Role::Output);
    return seq;
}

ParsedSequence parse_sequence(const Vocab& v, const std::vector<TokenId>& ids) {
    return parse_layout(v, ids).parsed;
}

std::vector<Role> derive_role_mask(const Vocab& v, const std::vector<TokenId>& ids) {
    const auto layout = parse_layout(v, ids);
    std::vector<Role> mask(ids.size(), Role::Input);
    std::fill(mask.begin() + static_cast<std::ptrdiff_t>(layout.output_begin),
              mask.begin() + static_cast<std::ptrdiff_t>(layout.output_end), Role::Output);
    return mask;
}

std::map<std::size_t, std::vector<std::size_t>> bucket_by_length(
    const std::vector<TokenSequence>& seqs, std::size_t bucket_width) {
    if (bucket_width < 1) {
        throw DimensionError("bucket width must be >= 1");
    }
    std::map<std::size_t, std::vector<std::size_t>> buckets;
    for (std::size_t i = 0; i < seqs.size(); ++i) {
        buckets[seqs[i].size() / bucket_width].push_back(i);
    }
    return buckets;
}

Triplet collapse_multiturn(const Triplet& t1, const Triplet& t2) {
    if (!(t1.target == t2.source)) {
        throw ChainMismatchError("first target and second source differ");
    }
    Triplet out = t1;
    out.target = t2.target;
    if (t1.instruction.empty()) {
        out.instruction = t2.instruction;
    } else if (!t2.instruction.empty()) {
        out.instruction = t1.instruction + " " + t2.instruction;
    }
    out.bindings.clear();
    return out;
}

namespace {

void put_u32(std::ostream& os, std::uint32_t x) {
    const char b[4] = {static_cast<char>(x & 0xFF), static_cast<char>((x >> 8) & 0xFF),
                       static_cast<char>((x >> 16) & 0xFF), static_cast<char>((x >> 24) & 0xFF)};
    os.write(b, 4);
}

bool get_u32(std::istream& is, std::uint32_t& x) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4)) {
        return false;
    }
    x = static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
        (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
    return true;
}

}  // namespace

void write_sequences(const std::filesystem::path& path, const std::vector<TokenSequence>& seqs) {
    std::ofstream f(path, std::ios::binary);
    if (!f) {
        throw DataError("cannot write " + path.string());
    }
    for (const auto& s : seqs) {
        put_u32(f, static_cast<std::uint32_t>(s.ids.size()));
        for (const auto id : s.ids) {
            put_u32(f, id);
        }
    }
    if (!f) {
        throw DataError("write failed for " + path.string());
    }
}

std::vector<TokenSequence> read_sequences(const std::filesystem::path& path, const Vocab& v) {
    std::ifstream f(path, std::ios::binary);
    if (!f) {
        throw DataError("cannot read " + path.string());
    }
    std::vector<TokenSequence> out;
    std::uint32_t n = 0;
    while (get_u32(f, n)) {
        TokenSequence s;
        s.ids.resize(n);
        for (auto& id : s.ids) {
            if (!get_u32(f, id)) {
                throw CorruptionError("truncated sequence file " + path.string());
            }
        }
        try {
            s.role_mask = derive_role_mask(v, s.ids);
        } catch (const MalformedSequenceError& e) {
            throw CorruptionError(path.string() + ": " + e.what());
        }
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace exvis
