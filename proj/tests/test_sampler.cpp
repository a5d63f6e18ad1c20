// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "exvis/sampler.hpp"

namespace exvis {
namespace {

Vec random_logits(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    Vec v(static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        v[i] = rng.normal(0.0, 3.0);
    }
    return v;
}

TEST(TopK, SupportLaw) {
    const Vec logits = random_logits(200, 11);
    std::vector<Eigen::Index> order(200);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return logits[a] > logits[b]; });
    std::vector<bool> top(200, false);
    for (int i = 0; i < 16; ++i) {
        top[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = true;
    }
    Rng rng(5);
    int violations = 0;
    for (int t = 0; t < 10000; ++t) {
        violations += !top[static_cast<std::size_t>(top_k_sample(logits, 16, 1.0, rng))];
    }
    EXPECT_EQ(violations, 0);
}

TEST(TopK, ArgmaxAtAnyTemperature) {
    for (std::uint64_t s = 0; s < 50; ++s) {
        const Vec logits = random_logits(37, s);
        Eigen::Index best = 0;
        logits.maxCoeff(&best);
        for (const double temp : {0.01, 1.0, 100.0}) {
            EXPECT_EQ(top_k_sample(logits, 1, temp, s * 7 + 1), best);
        }
    }
}

TEST(TopK, TiesGoToLowerIndex) {
    Vec logits = Vec::Zero(6);
    logits[2] = 1.0;
    logits[4] = 1.0;
    EXPECT_EQ(top_k_sample(logits, 1, 1.0, 0), 2);
    Rng rng(1);
    for (int t = 0; t < 1000; ++t) {
        const auto id = top_k_sample(logits, 2, 1.0, rng);
        EXPECT_TRUE(id == 2 || id == 4);
    }
}

TEST(TopK, UniformChiSquare) {
    constexpr int kBins = 10;
    constexpr int kDraws = 100000;
    const Vec logits = Vec::Constant(kBins, 0.25);
    std::vector<int> counts(kBins, 0);
    Rng rng(2024);
    for (int t = 0; t < kDraws; ++t) {
        ++counts[static_cast<std::size_t>(top_k_sample(logits, kBins, 1.0, rng))];
    }
    const double expect = double(kDraws) / kBins;
    const double sigma = std::sqrt(kDraws * (1.0 / kBins) * (1.0 - 1.0 / kBins));
    double chi2 = 0.0;
    for (const int c : counts) {
        EXPECT_LE(std::abs(c - expect), 3 * sigma);
        chi2 += (c - expect) * (c - expect) / expect;
    }
    // 0.999 quantile of chi-square with 9 degrees of freedom
    EXPECT_LT(chi2, 27.877);
}

TEST(TopK, TemperatureScaledProportions) {
    Vec logits(3);
    logits << 0.0, std::log(2.0), std::log(4.0);
    constexpr int kDraws = 70000;
    for (const double temp : {1.0, 2.0}) {
        std::vector<double> p(3);
        for (int i = 0; i < 3; ++i) {
            p[static_cast<std::size_t>(i)] = std::exp(logits[i] / temp);
        }
        const double z = p[0] + p[1] + p[2];
        std::vector<int> counts(3, 0);
        Rng rng(static_cast<std::uint64_t>(temp * 10));
        for (int t = 0; t < kDraws; ++t) {
            ++counts[static_cast<std::size_t>(top_k_sample(logits, 3, temp, rng))];
        }
        double chi2 = 0.0;
        for (std::size_t i = 0; i < 3; ++i) {
            const double e = kDraws * p[i] / z;
            chi2 += (counts[i] - e) * (counts[i] - e) / e;
        }
        // 0.999 quantile, 2 degrees of freedom
        EXPECT_LT(chi2, 13.816) << "temperature " << temp;
    }
}

TEST(TopK, Errors) {
    const Vec logits = Vec::Zero(4);
    EXPECT_THROW(top_k_sample(logits, 0, 1.0, 0), RangeError);
    EXPECT_THROW(top_k_sample(logits, 5, 1.0, 0), RangeError);
    EXPECT_NO_THROW(top_k_sample(logits, 4, 1.0, 0));
    SampleConfig cfg;
    cfg.temperature = 0.0;
    EXPECT_THROW(cfg.validate(), ConfigError);
    cfg.temperature = 1.0;
    cfg.top_k_image = 0;
    EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(TopK, SeedDeterminism) {
    const Vec logits = random_logits(50, 3);
    for (std::uint64_t s = 0; s < 20; ++s) {
        EXPECT_EQ(top_k_sample(logits, 10, 1.0, s), top_k_sample(logits, 10, 1.0, s));
    }
}

struct Tiny {
    Vocab vocab{std::vector<std::string>{"Trace", " edges", "."}, 4, 8};
    ModelConfig cfg;
    ModelParams params;

    Tiny() {
        cfg.vocab_size = static_cast<int>(vocab.size());
        cfg.d_model = 16;
        cfg.n_layers = 1;
        cfg.n_heads = 2;
        cfg.d_ff = 24;
        cfg.max_seq_len = 256;
        params = ModelParams::init(cfg, 9, 0.5);
    }
};

Image random_image(int w, int h, Rng& rng) {
    Image img(w, h);
    for (auto& b : img.bytes()) {
        b = static_cast<std::uint8_t>(rng.below(256));
    }
    return img;
}

TEST(Generate, ForcedStructureResolution) {
    const Tiny t;
    Rng rng(17);
    for (int run = 0; run < 100; ++run) {
        const int h = 1 + static_cast<int>(rng.below(8));
        const int w = 1 + static_cast<int>(rng.below(8));
        const Image in = random_image(1 + static_cast<int>(rng.below(8)), 1 + static_cast<int>(rng.below(8)), rng);
        SampleConfig sc;
        sc.seed = static_cast<std::uint64_t>(run);
        const Image out = generate(t.params, t.cfg, t.vocab, in, "Trace edges.", h, w, sc);
        EXPECT_EQ(out.height(), h);
        EXPECT_EQ(out.width(), w);
    }
}

TEST(Generate, SeedDeterminism) {
    const Tiny t;
    Rng rng(4);
    const Image in = random_image(6, 5, rng);
    SampleConfig sc;
    sc.seed = 77;
    const Image a = generate(t.params, t.cfg, t.vocab, in, "Trace edges.", 7, 6, sc);
    const Image b = generate(t.params, t.cfg, t.vocab, in, "Trace edges.", 7, 6, sc);
    EXPECT_EQ(a, b);
}

TEST(Generate, ResolutionOutsideLimitsThrows) {
    const Tiny t;
    const Image in(4, 4);
    EXPECT_THROW(generate(t.params, t.cfg, t.vocab, in, "x", 9, 4, SampleConfig{}), std::exception);
    EXPECT_THROW(generate(t.params, t.cfg, t.vocab, in, "x", 4, 0, SampleConfig{}), std::exception);
}

TEST(BatchInfer, EmptyInEmptyOut) {
    const Tiny t;
    EXPECT_TRUE(batch_infer(t.params, t.cfg, t.vocab, {}, SampleConfig{}).empty());
}

}  // namespace
}  // namespace exvis
