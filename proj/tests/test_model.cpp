// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "exvis/model.hpp"
#include "exvis/rng.hpp"

namespace exvis {
namespace {

ModelConfig small_config() {
    ModelConfig cfg;
    cfg.vocab_size = 64;
    cfg.d_model = 16;
    cfg.n_layers = 2;
    cfg.n_heads = 2;
    cfg.d_ff = 24;
    cfg.max_seq_len = 64;
    return cfg;
}

TokenSequence random_sequence(std::size_t len, std::size_t first_output, std::uint64_t seed,
                              int vocab) {
    Rng rng(seed);
    TokenSequence s;
    for (std::size_t i = 0; i < len; ++i) {
        s.ids.push_back(static_cast<TokenId>(rng.below(static_cast<std::uint64_t>(vocab))));
        s.role_mask.push_back(i >= first_output ? Role::Output : Role::Input);
    }
    return s;
}

TEST(Primitives, RmsNormKnownValues) {
    Vec x(2);
    x << 3.0, 4.0;
    const Vec y = rmsnorm(x, Vec::Ones(2), 0.0);
    const double rms = std::sqrt(12.5);
    EXPECT_NEAR(y[0], 3.0 / rms, 1e-12);
    EXPECT_NEAR(y[1], 4.0 / rms, 1e-12);
    EXPECT_NEAR(y[0], 0.84853, 1e-5);
    EXPECT_NEAR(y[1], 1.13137, 1e-5);
}

TEST(Primitives, RmsNormZeroAndUnitRms) {
    EXPECT_EQ(rmsnorm(Vec::Zero(5), Vec::Ones(5), 1e-5), Vec::Zero(5));
    Rng rng(3);
    for (int i = 0; i < 100; ++i) {
        Vec x(17);
        for (auto& v : x) {
            v = rng.normal(0.0, 3.0);
        }
        const Vec y = rmsnorm(x, Vec::Ones(17), 0.0);
        EXPECT_NEAR(std::sqrt(y.squaredNorm() / 17.0), 1.0, 1e-9);
    }
    EXPECT_THROW(rmsnorm(Vec::Ones(3), Vec::Ones(2), 0.0), ShapeError);
}

TEST(Primitives, SwigluScalarCases) {
    Vec x(1);
    x << 1.0;
    Mat one = Mat::Ones(1, 1);
    Mat two = Mat::Constant(1, 1, 2.0);
    const double swish1 = 1.0 / (1.0 + std::exp(-1.0));
    EXPECT_NEAR(swiglu(x, one, one, one)[0], swish1, 1e-12);
    EXPECT_NEAR(swiglu(x, one, one, one)[0], 0.73106, 1e-5);
    EXPECT_NEAR(swiglu(x, one, two, one)[0], 1.46212, 1e-5);
    EXPECT_EQ(swiglu(Vec::Zero(1), one, one, one)[0], 0.0);
    EXPECT_THROW(swiglu(Vec::Zero(2), one, one, one), ShapeError);
}

TEST(Primitives, RopeRotation) {
    Vec x(4);
    x << 0.3, -1.2, 2.0, 0.5;
    EXPECT_EQ(rope_apply(x, 0.0, 10000.0), x);
    Vec e(4);
    e << 1.0, 0.0, 1.0, 0.0;
    const double m = 7.0;
    const Vec y = rope_apply(e, m, 10000.0);
    const double theta1 = std::pow(10000.0, -2.0 / 4.0);
    EXPECT_NEAR(y[0], std::cos(m), 1e-12);
    EXPECT_NEAR(y[1], std::sin(m), 1e-12);
    EXPECT_NEAR(y[2], std::cos(m * theta1), 1e-12);
    EXPECT_NEAR(y[3], std::sin(m * theta1), 1e-12);
    EXPECT_NEAR(rope_apply(x, 123.0, 10000.0).norm(), x.norm(), 1e-9);
    EXPECT_THROW(rope_apply(Vec::Ones(3), 1.0, 10000.0), DimensionError);
}

TEST(Primitives, QkNormScaleInvariance) {
    Vec q(4);
    q << 1.0, -2.0, 0.5, 3.0;
    Vec k(4);
    k << 0.2, 0.1, -0.4, 0.0;
    const Vec g = Vec::Ones(4);
    const auto [a, b] = qk_norm(q, k, g, g, 1e-12);
    const auto [a5, b5] = qk_norm(q * 5.0, k, g, g, 1e-12);
    EXPECT_LT((a - a5).cwiseAbs().maxCoeff(), 1e-9);
    Vec unit(4);
    unit << 1.0, -1.0, 1.0, -1.0;
    EXPECT_LT((qk_norm(unit, unit, g, g, 0.0).first - unit).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_EQ(qk_norm(Vec::Zero(4), k, g, g, 1e-5).first, Vec::Zero(4));
}

TEST(Model, CausalityIsBitExact) {
    const auto cfg = small_config();
    const auto p = ModelParams::init(cfg, 5, 0.3);
    auto seq = random_sequence(20, 10, 9, cfg.vocab_size);
    const Mat a = forward_logits(p, cfg, seq.ids);
    seq.ids[15] = (seq.ids[15] + 1) % 64;
    const Mat b = forward_logits(p, cfg, seq.ids);
    for (int s = 0; s < 15; ++s) {
        EXPECT_EQ(0, std::memcmp(a.row(s).data(), b.row(s).data(), sizeof(double) * 64)) << s;
    }
    EXPECT_NE(a.row(15), b.row(15));
}

TEST(Model, ZeroWeightsGiveUniformLogits) {
    auto cfg = small_config();
    cfg.n_layers = 1;
    cfg.n_heads = 1;
    const auto p = ModelParams::zeros(cfg);
    const auto seq = random_sequence(8, 4, 1, cfg.vocab_size);
    const Mat z = forward_logits(p, cfg, seq.ids);
    EXPECT_EQ(z.maxCoeff(), z.minCoeff());
    EXPECT_NEAR(loss(p, cfg, seq).ce, std::log(64.0), 1e-12);
}

TEST(Model, LogitsSoftmaxRowsSumToOne) {
    const auto cfg = small_config();
    const auto p = ModelParams::init(cfg, 2, 0.5);
    const auto seq = random_sequence(30, 1, 2, cfg.vocab_size);
    const Mat z = forward_logits(p, cfg, seq.ids);
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
        const auto e = (z.row(i).array() - z.row(i).maxCoeff()).exp();
        EXPECT_NEAR((e / e.sum()).sum(), 1.0, 1e-6);
    }
}

TEST(Model, ZLossOfZeroLogits) {
    auto cfg = small_config();
    cfg.vocab_size = 4;
    cfg.n_layers = 1;
    const auto p = ModelParams::zeros(cfg);
    TokenSequence s{{0, 1, 2}, {Role::Input, Role::Output, Role::Output}};
    const auto l = loss(p, cfg, s);
    const double lse = std::log(4.0);
    EXPECT_NEAR(l.z, lse * lse, 1e-12);
    EXPECT_NEAR(l.z, 1.9218, 1e-4);
    EXPECT_NEAR(l.total - l.ce, 1e-5 * lse * lse, 1e-15);
    EXPECT_EQ(l.n_output_tokens, 2u);
}

TEST(Model, NoOutputTokenIsAnError) {
    const auto cfg = small_config();
    const auto p = ModelParams::zeros(cfg);
    auto s = random_sequence(6, 6, 0, cfg.vocab_size);
    EXPECT_THROW(loss(p, cfg, s), NoOutputTokenError);
    // an Output flag on position 0 is never a target
    s.role_mask[0] = Role::Output;
    EXPECT_THROW(loss(p, cfg, s), NoOutputTokenError);
}

TEST(Model, TokenAfterLastTargetAddsNoLoss) {
    const auto cfg = small_config();
    const auto p = ModelParams::init(cfg, 8, 0.2);
    auto s = random_sequence(12, 6, 4, cfg.vocab_size);
    const auto before = loss(p, cfg, s);
    s.ids.push_back(17);
    s.role_mask.push_back(Role::Input);
    const auto after = loss(p, cfg, s);
    EXPECT_EQ(before.ce, after.ce);
    EXPECT_EQ(before.z, after.z);
    // gradient of the appended token's embedding is zero
    const auto g = backward(p, cfg, s);
    bool other_use = std::count(s.ids.begin(), s.ids.end() - 1, 17) > 0;
    if (!other_use) {
        EXPECT_EQ(g.tok_emb.row(17).cwiseAbs().maxCoeff(), 0.0);
    }
}

TEST(Model, ZLossWeightIsLinear) {
    auto cfg = small_config();
    const auto p = ModelParams::init(cfg, 11, 0.3);
    const auto s = random_sequence(16, 8, 6, cfg.vocab_size);
    cfg.z_loss_weight = 0.0;
    auto g0 = backward(p, cfg, s);
    cfg.z_loss_weight = 1e-2;
    auto g1 = backward(p, cfg, s);
    cfg.z_loss_weight = 2e-2;
    auto g2 = backward(p, cfg, s);
    auto t0 = g0.tensors();
    auto t1 = g1.tensors();
    auto t2 = g2.tensors();
    double worst = 0.0;
    for (std::size_t i = 0; i < t0.size(); ++i) {
        for (std::size_t j = 0; j < t0[i].size; ++j) {
            const double d1 = t1[i].data[j] - t0[i].data[j];
            const double d2 = t2[i].data[j] - t0[i].data[j];
            worst = std::max(worst, std::abs(d2 - 2.0 * d1) / std::max(std::abs(d2), 1e-12));
        }
    }
    EXPECT_LT(worst, 1e-6);
}

TEST(Model, GradientMatchesFiniteDifferences) {
    const auto cfg = small_config();
    auto p = ModelParams::init(cfg, 21, 0.3);
    const auto s = random_sequence(24, 12, 13, cfg.vocab_size);
    auto g = backward(p, cfg, s);
    auto params = p.tensors();
    auto grads = g.tensors();
    Rng rng(99);
    double worst = 0.0;
    for (std::size_t ti = 0; ti < params.size(); ++ti) {
        for (int k = 0; k < 4; ++k) {
            std::size_t j = rng.below(params[ti].size);
            if (params[ti].name == "tok_emb") {
                j = s.ids[rng.below(s.ids.size())] * static_cast<std::size_t>(cfg.d_model) +
                    rng.below(static_cast<std::uint64_t>(cfg.d_model));
            }
            const double orig = params[ti].data[j];
            const double h = 1e-4;
            params[ti].data[j] = orig + h;
            const double up = loss(p, cfg, s).total;
            params[ti].data[j] = orig - h;
            const double down = loss(p, cfg, s).total;
            params[ti].data[j] = orig;
            const double numeric = (up - down) / (2.0 * h);
            const double analytic = grads[ti].data[j];
            const double rel = std::abs(numeric - analytic) /
                               std::max({std::abs(numeric), std::abs(analytic), 1e-7});
            worst = std::max(worst, rel);
            EXPECT_LT(rel, 1e-3) << params[ti].name << "[" << j << "] analytic " << analytic
                                 << " numeric " << numeric;
        }
    }
    RecordProperty("max_rel_err", std::to_string(worst));
}

TEST(Model, InferenceSessionMatchesForward) {
    const auto cfg = small_config();
    const auto p = ModelParams::init(cfg, 4, 0.3);
    const auto s = random_sequence(20, 1, 8, cfg.vocab_size);
    const Mat full = forward_logits(p, cfg, s.ids);
    InferenceSession sess(p, cfg);
    for (std::size_t t = 0; t < s.ids.size(); ++t) {
        const Vec z = sess.step(s.ids[t]);
        EXPECT_LT((z.transpose() - full.row(static_cast<Eigen::Index>(t))).cwiseAbs().maxCoeff(),
                  1e-10);
    }
}

TEST(Model, ForwardBackwardAreDeterministic) {
    const auto cfg = small_config();
    const auto p = ModelParams::init(cfg, 4, 0.3);
    const auto s = random_sequence(20, 10, 8, cfg.vocab_size);
    EXPECT_TRUE(backward(p, cfg, s) == backward(p, cfg, s));
}

TEST(Checkpoint, RoundTripAndErrors) {
    const auto cfg = small_config();
    const auto p = ModelParams::init(cfg, 4, 0.02);
    OptimizerState opt{ModelParams::init(cfg, 5, 1.0), ModelParams::init(cfg, 6, 1.0), 17};
    const auto path = std::filesystem::temp_directory_path() / "exvis_ckpt_test.bin";
    save_checkpoint(path, cfg, p, opt);
    const auto ck = load_checkpoint(path, cfg);
    EXPECT_EQ(ck.config, cfg);
    EXPECT_TRUE(ck.params == p);
    EXPECT_TRUE(ck.opt.m == opt.m);
    EXPECT_TRUE(ck.opt.v == opt.v);
    EXPECT_EQ(ck.opt.step, 17u);

    auto other = cfg;
    other.d_ff = 32;
    EXPECT_THROW(load_checkpoint(path, other), ShapeError);

    const auto size = std::filesystem::file_size(path);
    std::filesystem::resize_file(path, size - 8);
    EXPECT_THROW(load_checkpoint(path), CorruptionError);
    {
        std::ofstream f(path, std::ios::binary);
        f << "NOTACKPT-garbage";
    }
    EXPECT_THROW(load_checkpoint(path), CorruptionError);
    std::filesystem::remove(path);
}

}  // namespace
}  // namespace exvis
