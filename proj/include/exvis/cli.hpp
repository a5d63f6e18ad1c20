// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "exvis/dataset.hpp"
#include "exvis/metrics.hpp"
#include "exvis/model.hpp"
#include "exvis/sampler.hpp"
#include "exvis/trainer.hpp"

namespace exvis {

inline constexpr const char* kToolVersion = "0.1.0";

// Every command takes its options as one JSON object (the config file with
// command-line overrides applied). The resolved object is echoed into the
// manifest, so a manifest's "config" is enough to replay the command.

struct GenDataOptions {
    DatasetSpec spec;
    std::filesystem::path out;
};
GenDataOptions gen_data_options(const std::string& json);
/// Returns the number of triplet lines written.
std::size_t cmd_gen_data(const std::string& config_json);

struct TrainOptions {
    std::filesystem::path dataset;
    std::filesystem::path out;
    std::size_t max_words{4096};
    int levels{8};
    int max_resolution{16};
    ModelConfig model;  // vocab_size is filled in from the vocabulary
    double init_std{0.02};
    TrainConfig train;
    double target_ce{0.0};       // 0: off; otherwise stop once the full-set ce drops below
    std::size_t eval_every{50};  // full-set ce cadence for target_ce
    std::size_t checkpoint_every{0};
    bool resume{false};
};
TrainOptions train_options(const std::string& json);
struct TrainSummary {
    std::uint64_t steps{0};
    double final_ce{0.0};
    std::size_t sequences{0};
};
TrainSummary cmd_train(const std::string& config_json);

struct InferOptions {
    std::filesystem::path checkpoint;
    std::filesystem::path vocab;  // defaults to vocab.json beside the checkpoint
    std::filesystem::path image;
    std::string instruction;
    std::filesystem::path instruction_file;
    int height{0};  // 0: input height
    int width{0};
    SampleConfig sample;
    std::filesystem::path out;
};
InferOptions infer_options(const std::string& json);
void cmd_infer(const std::string& config_json);

struct EvalOptions {
    std::filesystem::path run;  // training output directory
    std::filesystem::path dataset;
    std::string protocol{"seen"};
    SampleConfig sample;
    std::size_t max_pairs{0};  // 0: all
    std::filesystem::path out;
};
EvalOptions eval_options(const std::string& json);
MetricReport cmd_eval(const std::string& config_json);

struct PcaOptions {
    std::filesystem::path dataset;
    std::size_t per_task{100};
    std::uint64_t seed{0};
    std::filesystem::path out;
};
PcaOptions pca_options(const std::string& json);
void cmd_diag_pca(const std::string& config_json);

/// Triplets an evaluation protocol runs on, with their instructions as used.
/// Throws ConfigError for unknown protocols and for unseen-task without an
/// exclusion list in the training manifest.
std::vector<Triplet> protocol_triplets(const std::vector<Triplet>& dataset,
                                       const std::string& protocol,
                                       const std::string& training_manifest_json,
                                       std::uint64_t seed);

/// Entry point of the `exvis` binary. Exit codes: 0 ok, 2 config error,
/// 3 data error, 4 any other failure.
int run_cli(int argc, char** argv);

}  // namespace exvis
