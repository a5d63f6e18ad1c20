// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <set>
#include <vector>

#include "exvis/model.hpp"
#include "exvis/synth.hpp"
#include "exvis/tokenizer.hpp"

namespace exvis {

struct TrainConfig {
    double lr{4e-5};
    double weight_decay{0.01};
    double beta1{0.9};
    double beta2{0.95};
    double adam_eps{1e-8};
    std::size_t batch_size{4};
    std::size_t epochs{1};
    std::size_t bucket_width{16};
    std::uint64_t seed{0};
    std::set<TaskDirection> excluded_tasks;
    /// Stop after this many optimizer steps (0: run all epochs).
    std::uint64_t max_steps{0};
    /// Global gradient-norm clip (0: off).
    double grad_clip{0.0};

    /// Throws ConfigError on invalid hyper-parameters.
    void validate() const;
};

/// Triplets whose (task, direction) is not excluded, in input order.
std::vector<Triplet> exclusion_filter(const std::vector<Triplet>& triplets,
                                      const std::set<TaskDirection>& excluded);

OptimizerState make_optimizer_state(const ModelConfig& cfg);

/// One AdamW update with decoupled decay: theta *= (1 - lr wd), then
/// theta -= lr m_hat / (sqrt(v_hat) + eps). Throws ShapeError on shape
/// disagreement and NonFiniteError for a non-finite gradient.
void adamw_step(ModelParams& params, const ModelParams& grads, OptimizerState& state,
                const TrainConfig& cfg);

struct StepRecord {
    std::uint64_t step{0};
    double ce{0.0};
    double z{0.0};
    double total{0.0};
    std::size_t tokens{0};
};

/// Batches in training order: epoch by epoch, buckets in key order, each
/// bucket shuffled with a seed derived from (seed, epoch, bucket).
std::vector<std::vector<std::size_t>> batch_schedule(const std::vector<TokenSequence>& seqs,
                                                     const TrainConfig& cfg);

struct TrainCallbacks {
    /// Called after every optimizer step; returning false stops training.
    std::function<bool(const StepRecord&)> on_step;
};

struct TrainResult {
    ModelParams params;
    OptimizerState opt;
    std::vector<StepRecord> log;
};

/// Trains on pre-tokenized sequences. Starting from `opt.step > 0` skips the
/// first opt.step batches of the schedule, so a resumed run reproduces an
/// uninterrupted one. Throws EmptyDatasetError for an empty dataset.
TrainResult train(const ModelConfig& mcfg, ModelParams params, OptimizerState opt,
                  const std::vector<TokenSequence>& seqs, const TrainConfig& cfg,
                  const TrainCallbacks& callbacks = {});

/// Pre-tokenizes triplets (after exclusion) into sequences.
std::vector<TokenSequence> pretokenize(const Vocab& v, const std::vector<Triplet>& triplets);

void write_metrics_csv(const std::filesystem::path& path, const std::vector<StepRecord>& log);

}  // namespace exvis
