// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "exvis/errors.hpp"
#include "exvis/tokenizer.hpp"

namespace exvis {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::VectorXd;

struct ModelConfig {
    int vocab_size{0};
    int d_model{64};
    int n_layers{2};
    int n_heads{2};
    int d_ff{176};
    int max_seq_len{512};
    double rope_base{10000.0};
    double rmsnorm_eps{1e-5};
    double z_loss_weight{1e-5};

    int head_dim() const noexcept { return d_model / n_heads; }
    /// Throws ConfigError when a field violates the invariants.
    void validate() const;
    bool operator==(const ModelConfig&) const = default;
};

/// Mutable view of one parameter tensor.
struct TensorRef {
    std::string name;
    std::vector<int> shape;
    double* data;
    std::size_t size;
};

struct LayerParams {
    Vec attn_norm;
    Mat wq, wk, wv, wo;  // d x d, applied as x * W
    Vec q_norm, k_norm;  // head_dim, shared by all heads
    Vec ffn_norm;
    Mat w1, w3;  // d x d_ff
    Mat w2;      // d_ff x d
};

struct ModelParams {
    Mat tok_emb;  // vocab x d
    std::vector<LayerParams> layers;
    Vec final_norm;
    Mat w_out;  // d x vocab

    /// Shapes from cfg, every entry zero.
    static ModelParams zeros(const ModelConfig& cfg);
    /// Matrices ~ N(0, std^2) from a seeded generator, gains one.
    static ModelParams init(const ModelConfig& cfg, std::uint64_t seed, double std = 0.02);

    /// Every tensor in a fixed canonical order.
    std::vector<TensorRef> tensors();
    std::size_t parameter_count() const;
    void set_zero();
    bool operator==(const ModelParams& other) const;
};

struct LossBreakdown {
    double ce{0.0};
    double z{0.0};
    double total{0.0};
    std::size_t n_output_tokens{0};
};

// ---- primitives --------------------------------------------------------------

/// y = gain * x / sqrt(mean(x^2) + eps). Throws ShapeError on length mismatch.
Vec rmsnorm(const Vec& x, const Vec& gain, double eps);
/// y = W2^T (swish(W1^T x) * (W3^T x)).
Vec swiglu(const Vec& x, const Mat& w1, const Mat& w3, const Mat& w2);
/// Rotates pairs (2j, 2j+1) by position * base^(-2j/n). Throws DimensionError for odd n.
Vec rope_apply(const Vec& x, double position, double base);
/// Independent RMS normalization of q and k with their gains.
std::pair<Vec, Vec> qk_norm(const Vec& q, const Vec& k, const Vec& q_gain, const Vec& k_gain,
                            double eps);

// ---- full model ----------------------------------------------------------------

/// seq_len x vocab logits.
Mat forward_logits(const ModelParams& p, const ModelConfig& cfg, const std::vector<TokenId>& ids);

/// Masked next-token loss: positions t whose target t+1 is Output-flagged.
/// Throws NoOutputTokenError when no such position exists.
LossBreakdown loss(const ModelParams& p, const ModelConfig& cfg, const TokenSequence& seq);

/// Loss and analytic gradient of `total`, accumulated into `grads` (same shapes as p).
LossBreakdown loss_and_grad(const ModelParams& p, const ModelConfig& cfg,
                            const TokenSequence& seq, ModelParams& grads, double scale = 1.0);

/// Fresh gradient set for one sequence.
ModelParams backward(const ModelParams& p, const ModelConfig& cfg, const TokenSequence& seq);

/// Incremental decoding with a key/value cache. Produces the same logits as
/// forward_logits row by row, up to floating-point reassociation.
class InferenceSession {
public:
    InferenceSession(const ModelParams& p, const ModelConfig& cfg);

    /// Appends one token and returns the logits predicting the next one.
    Vec step(TokenId id);
    std::size_t position() const noexcept { return pos_; }

private:
    const ModelParams& p_;
    const ModelConfig& cfg_;
    std::size_t pos_{0};
    std::vector<Mat> keys_;    // per layer: max_seq_len x d, post QK-norm and RoPE
    std::vector<Mat> values_;  // per layer: max_seq_len x d
};

// ---- checkpoints -------------------------------------------------------------

struct OptimizerState {
    ModelParams m;
    ModelParams v;
    std::uint64_t step{0};
};

struct Checkpoint {
    ModelConfig config;
    ModelParams params;
    OptimizerState opt;
};

/// "EVTCKPT1", u64 header length, JSON header, little-endian f64 payload.
void save_checkpoint(const std::filesystem::path& path, const ModelConfig& cfg,
                     const ModelParams& params, const OptimizerState& opt);
/// Throws CorruptionError on bad magic, truncation or a header that does not
/// describe `cfg`'s shapes (when an expected config is supplied).
Checkpoint load_checkpoint(const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path, const ModelConfig& expected);

std::string model_config_to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const std::string& text);

}  // namespace exvis
