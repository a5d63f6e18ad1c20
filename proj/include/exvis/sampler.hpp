// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "exvis/model.hpp"
#include "exvis/rng.hpp"
#include "exvis/synth.hpp"
#include "exvis/tokenizer.hpp"

namespace exvis {

struct SampleConfig {
    std::size_t top_k_text{5};
    /// Clamped to the number of image tokens.
    std::size_t top_k_image{2048};
    double temperature{1.0};
    std::uint64_t seed{0};
    /// Sample structural tokens instead of forcing the output layout.
    bool free_structure{false};

    /// Throws ConfigError for k < 1 or temperature <= 0.
    void validate() const;
};

/// Samples from softmax(logits / temperature) restricted to the k largest
/// logits (ties broken toward the lower index). Throws RangeError unless
/// 1 <= k <= logits.size().
TokenId top_k_sample(const Vec& logits, std::size_t k, double temperature, Rng& rng);
TokenId top_k_sample(const Vec& logits, std::size_t k, double temperature, std::uint64_t seed);

/// Decodes an output image for (input, instruction). With forced structure
/// the result is exactly height x width.
Image generate(const ModelParams& p, const ModelConfig& mcfg, const Vocab& v, const Image& input,
               std::string_view instruction, int height, int width, const SampleConfig& cfg);

struct InferenceResult {
    Image generated;
    Image reference;
    TaskKind task{};
    Direction direction{};
};

/// generate() over triplet sources at their target resolution; item i uses
/// seed cfg.seed + i.
std::vector<InferenceResult> batch_infer(const ModelParams& p, const ModelConfig& mcfg,
                                         const Vocab& v, const std::vector<Triplet>& triplets,
                                         const SampleConfig& cfg);

}  // namespace exvis
