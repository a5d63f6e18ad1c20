// SPDX-License-Identifier: Apache-2.0
#include "exvis/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace exvis {

void SampleConfig::validate() const {
    if (top_k_text < 1 || top_k_image < 1) {
        throw ConfigError("top-k values must be >= 1");
    }
    if (!(temperature > 0.0) || !std::isfinite(temperature)) {
        throw ConfigError("temperature must be finite and > 0");
    }
}

TokenId top_k_sample(const Vec& logits, std::size_t k, double temperature, Rng& rng) {
    const auto n = static_cast<std::size_t>(logits.size());
    if (k < 1 || k > n) {
        throw RangeError("top-k " + std::to_string(k) + " outside [1, " + std::to_string(n) + "]");
    }
    if (!(temperature > 0.0)) {
        throw RangeError("temperature must be > 0");
    }
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    auto better = [&](std::size_t a, std::size_t b) {
        const auto la = logits[static_cast<Eigen::Index>(a)];
        const auto lb = logits[static_cast<Eigen::Index>(b)];
        return la > lb || (la == lb && a < b);
    };
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(), better);
    if (k == 1) {
        return static_cast<TokenId>(idx[0]);
    }
    const double top = logits[static_cast<Eigen::Index>(idx[0])];
    std::vector<double> w(k);
    double sum = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        w[i] = std::exp((logits[static_cast<Eigen::Index>(idx[i])] - top) / temperature);
        sum += w[i];
    }
    double u = rng.uniform() * sum;
    for (std::size_t i = 0; i < k; ++i) {
        u -= w[i];
        if (u < 0.0) {
            return static_cast<TokenId>(idx[i]);
        }
    }
    return static_cast<TokenId>(idx[k - 1]);
}

TokenId top_k_sample(const Vec& logits, std::size_t k, double temperature, std::uint64_t seed) {
    Rng rng(seed);
    return top_k_sample(logits, k, temperature, rng);
}

namespace {

Image generate_forced(InferenceSession& sess, Vec logits, const Vocab& v, int height, int width,
                      const SampleConfig& cfg, Rng& rng) {
    const auto base = static_cast<Eigen::Index>(v.image_base());
    const auto count = static_cast<Eigen::Index>(v.image_token_count());
    const std::size_t k = std::min<std::size_t>(cfg.top_k_image, v.image_token_count());
    for (const TokenId id : {Vocab::kBoi, v.res_h(height), v.res_w(width)}) {
        logits = sess.step(id);
    }
    std::vector<TokenId> grid;
    grid.reserve(static_cast<std::size_t>(height) * static_cast<std::size_t>(width));
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const Vec pixel_logits = logits.segment(base, count);
            const TokenId id = v.image_base() + top_k_sample(pixel_logits, k, cfg.temperature, rng);
            grid.push_back(id);
            logits = sess.step(id);
        }
        if (y + 1 < height) {
            logits = sess.step(Vocab::kEol);
        }
    }
    return dequantize_image(v, grid, width, height);
}

Image generate_free(InferenceSession& sess, Vec logits, const Vocab& v,
                    const std::vector<TokenId>& prefix, std::size_t max_len,
                    const SampleConfig& cfg, Rng& rng) {
    std::vector<TokenId> ids = prefix;
    const std::size_t k = std::min<std::size_t>(cfg.top_k_text, v.size());
    while (ids.size() < max_len) {
        // image positions use the wider image cutoff
        const bool in_grid = ids.size() > prefix.size() + 2 && ids.back() != Vocab::kEoi;
        const std::size_t kk = in_grid ? std::max(k, std::min(cfg.top_k_image, v.size())) : k;
        const TokenId id = top_k_sample(logits, kk, cfg.temperature, rng);
        ids.push_back(id);
        if (id == Vocab::kEoi || ids.size() >= max_len) {
            break;
        }
        logits = sess.step(id);
    }
    auto parsed = parse_sequence(v, ids);
    if (!parsed.output) {
        throw MalformedSequenceError(ids.size(), "free decoding produced no output image");
    }
    return std::move(*parsed.output);
}

}  // namespace

Image generate(const ModelParams& p, const ModelConfig& mcfg, const Vocab& v, const Image& input,
               std::string_view instruction, int height, int width, const SampleConfig& cfg) {
    cfg.validate();
    if (static_cast<std::size_t>(mcfg.vocab_size) != v.size()) {
        throw ShapeError("model vocab size does not match the vocabulary");
    }
    v.res_h(height);
    v.res_w(width);
    const auto prefix = assemble_sequence(v, input, instruction, std::nullopt).ids;
    const std::size_t block = 4 + static_cast<std::size_t>(height) * (static_cast<std::size_t>(width) + 1);
    const auto max_len = static_cast<std::size_t>(mcfg.max_seq_len);
    if (!cfg.free_structure && prefix.size() + block - 1 > max_len) {
        throw DimensionError("prefix plus output block exceed max_seq_len");
    }
    Rng rng(cfg.seed);
    InferenceSession sess(p, mcfg);
    Vec logits;
    for (const auto id : prefix) {
        logits = sess.step(id);
    }
    if (cfg.free_structure) {
        return generate_free(sess, logits, v, prefix, max_len, cfg, rng);
    }
    return generate_forced(sess, logits, v, height, width, cfg, rng);
}

std::vector<InferenceResult> batch_infer(const ModelParams& p, const ModelConfig& mcfg,
                                         const Vocab& v, const std::vector<Triplet>& triplets,
                                         const SampleConfig& cfg) {
    std::vector<InferenceResult> out;
    out.reserve(triplets.size());
    for (std::size_t i = 0; i < triplets.size(); ++i) {
        const auto& t = triplets[i];
        auto item_cfg = cfg;
        item_cfg.seed = cfg.seed + i;
        out.push_back({generate(p, mcfg, v, t.source, t.instruction, t.target.height(),
                                t.target.width(), item_cfg),
                       t.target, t.task, t.direction});
    }
    return out;
}

}  // namespace exvis
