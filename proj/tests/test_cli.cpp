// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "exvis/cli.hpp"
#include "exvis/dataset.hpp"
#include "exvis/errors.hpp"
#include "exvis/image.hpp"

namespace fs = std::filesystem;

namespace exvis {
namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

void spit(const fs::path& p, const std::string& s) {
    std::ofstream(p, std::ios::binary) << s;
}

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        dir_ = fs::temp_directory_path() / (std::string("exvis_cli_") + info->name());
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    int run(std::vector<std::string> args) {
        args.insert(args.begin(), "exvis");
        std::vector<char*> argv;
        for (auto& a : args) {
            argv.push_back(a.data());
        }
        return run_cli(static_cast<int>(argv.size()), argv.data());
    }

    fs::path file(const std::string& name, const std::string& text) {
        const auto p = dir_ / name;
        spit(p, text);
        return p;
    }

    std::string gen_config(const fs::path& out, int scenes, const std::string& tasks = R"(["edge","depth","normal"])") {
        return R"({"scenes": )" + std::to_string(scenes) + R"(, "tasks": )" + tasks +
               R"(, "width": 8, "height": 8, "seed": 5, "out": ")" + out.string() + "\"}";
    }

    std::string train_config(const fs::path& data, const fs::path& out, const std::string& extra = "") {
        return R"({"dataset": ")" + data.string() + R"(", "out": ")" + out.string() + R"(", "seed": 1,
            "vocab": {"max_resolution": 8},
            "model": {"d_model": 16, "n_layers": 1, "n_heads": 2, "d_ff": 24, "max_seq_len": 320},
            "train": {"lr": 1e-3, "batch_size": 2, "max_steps": 6, "epochs": 5})" + extra + "}";
    }

    fs::path dir_;
};

std::size_t count_lines(const fs::path& p) {
    std::istringstream in(slurp(p));
    std::size_t n = 0;
    for (std::string line; std::getline(in, line);) {
        n += !line.empty();
    }
    return n;
}

TEST_F(Cli, GenDataCountLaw) {
    const auto out = dir_ / "data";
    EXPECT_EQ(run({"gen-data", "--config", file("gen.json", gen_config(out, 100)).string()}), 0);
    EXPECT_EQ(count_lines(out / "triplets.jsonl"), 600u);
    EXPECT_TRUE(fs::exists(out / "manifest.json"));
}

TEST_F(Cli, GenDataRerunIsByteIdentical) {
    const auto cfg = file("gen.json", gen_config(dir_ / "a", 6)).string();
    ASSERT_EQ(run({"gen-data", "--config", cfg}), 0);
    ASSERT_EQ(run({"gen-data", "--config", cfg, "--out", (dir_ / "b").string()}), 0);
    std::size_t compared = 0;
    for (const auto& e : fs::recursive_directory_iterator(dir_ / "a")) {
        if (!e.is_regular_file() || e.path().filename() == "manifest.json") {
            continue;
        }
        const auto rel = fs::relative(e.path(), dir_ / "a");
        EXPECT_EQ(slurp(e.path()), slurp(dir_ / "b" / rel)) << rel;
        ++compared;
    }
    EXPECT_GT(compared, 6u);
}

TEST_F(Cli, UnknownTaskNamedInError) {
    try {
        cmd_gen_data(gen_config(dir_ / "x", 2, R"(["edge","sharpen"])"));
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("sharpen"), std::string::npos);
    }
    EXPECT_EQ(run({"gen-data", "--config", file("g.json", gen_config(dir_ / "x", 2, R"(["sharpen"])")).string()}),
              2);
}

TEST_F(Cli, ExitCodes) {
    // unknown key
    EXPECT_EQ(run({"gen-data", "--config", file("g.json", R"({"scenes": 2, "colour": 1, "out": "x"})").string()}), 2);
    // malformed JSON
    EXPECT_EQ(run({"gen-data", "--config", file("bad.json", "{").string()}), 2);
    // missing config file
    EXPECT_EQ(run({"gen-data", "--config", (dir_ / "nope.json").string()}), 2);
    // bad flag
    EXPECT_EQ(run({"gen-data", "--no-such-flag"}), 2);
    // missing dataset
    EXPECT_EQ(run({"train", "--config", file("t.json", train_config(dir_ / "missing", dir_ / "run")).string()}), 3);
    // corrupt dataset
    fs::create_directories(dir_ / "corrupt");
    spit(dir_ / "corrupt" / "triplets.jsonl", "{not json}\n");
    EXPECT_EQ(run({"train", "--config", file("t2.json", train_config(dir_ / "corrupt", dir_ / "run")).string()}), 3);
}

TEST_F(Cli, SeedFlagOverridesConfig) {
    const auto cfg = file("gen.json", gen_config(dir_ / "a", 3)).string();
    ASSERT_EQ(run({"gen-data", "--config", cfg}), 0);
    ASSERT_EQ(run({"gen-data", "--config", cfg, "--seed", "99", "--out", (dir_ / "b").string()}), 0);
    EXPECT_NE(slurp(dir_ / "a" / "triplets.jsonl"), slurp(dir_ / "b" / "triplets.jsonl"));
    EXPECT_NE(slurp(dir_ / "b" / "manifest.json").find("\"seed\": 99"), std::string::npos);
}

class CliPipeline : public Cli {
protected:
    void SetUp() override {
        Cli::SetUp();
        data_ = dir_ / "data";
        ASSERT_EQ(cmd_gen_data(gen_config(data_, 2)), 12u);
    }
    fs::path data_;
};

TEST_F(CliPipeline, TrainEchoesExclusionsAndResumesBitExactly) {
    const std::string ex = R"(, "excluded_tasks": ["edge:inv", "depth:fwd"])";
    const auto full = cmd_train(train_config(data_, dir_ / "full", ex));
    EXPECT_EQ(full.sequences, 8u);
    const auto manifest = slurp(dir_ / "full" / "manifest.json");
    EXPECT_NE(manifest.find("edge:inv"), std::string::npos);
    EXPECT_NE(manifest.find("depth:fwd"), std::string::npos);

    auto half = train_config(data_, dir_ / "split", ex);
    half.replace(half.find("\"max_steps\": 6"), 14, "\"max_steps\": 3");
    cmd_train(half);
    const auto resumed = cmd_train(train_config(data_, dir_ / "split", ex + R"(, "resume": true)"));
    EXPECT_EQ(resumed.steps, full.steps);
    EXPECT_EQ(slurp(dir_ / "full" / "checkpoint.bin"), slurp(dir_ / "split" / "checkpoint.bin"));
    EXPECT_EQ(slurp(dir_ / "full" / "metrics.csv"), slurp(dir_ / "split" / "metrics.csv"));
}

TEST_F(CliPipeline, InferInstructionFileMatchesFlagAndIsSeeded) {
    cmd_train(train_config(data_, dir_ / "run"));
    const auto triplets = read_dataset(data_);
    write_png(triplets[0].source, dir_ / "in.png");
    const auto ckpt = (dir_ / "run" / "checkpoint.bin").string();
    const auto img = (dir_ / "in.png").string();
    const auto ifile = file("instr.txt", triplets[0].instruction + "\n").string();
    ASSERT_EQ(run({"infer", "--checkpoint", ckpt, "--image", img, "--instruction", triplets[0].instruction, "--seed",
                   "4", "--out", (dir_ / "flag.png").string()}),
              0);
    ASSERT_EQ(run({"infer", "--checkpoint", ckpt, "--image", img, "--instruction-file", ifile, "--seed", "4",
                   "--out", (dir_ / "file.png").string()}),
              0);
    ASSERT_EQ(run({"infer", "--checkpoint", ckpt, "--image", img, "--instruction", triplets[0].instruction, "--seed",
                   "4", "--out", (dir_ / "again.png").string()}),
              0);
    EXPECT_EQ(slurp(dir_ / "flag.png"), slurp(dir_ / "file.png"));
    EXPECT_EQ(slurp(dir_ / "flag.png"), slurp(dir_ / "again.png"));
    EXPECT_NE(run({"infer", "--checkpoint", (dir_ / "none.bin").string(), "--image", img, "--instruction", "x",
                   "--out", (dir_ / "n.png").string()}),
              0);
}

TEST_F(CliPipeline, EvalProtocols) {
    cmd_train(train_config(data_, dir_ / "run"));
    const auto eval = [&](const std::string& protocol, const fs::path& out) {
        return R"({"run": ")" + (dir_ / "run").string() + R"(", "dataset": ")" + data_.string() +
               R"(", "protocol": ")" + protocol + R"(", "out": ")" + out.string() + "\"}";
    };
    const auto seen = cmd_eval(eval("seen", dir_ / "seen"));
    EXPECT_EQ(seen.protocol, "seen");
    EXPECT_NE(slurp(dir_ / "seen" / "report.json").find("\"protocol\": \"seen\""), std::string::npos);
    const auto unseen = cmd_eval(eval("unseen-instruction", dir_ / "unseen"));
    EXPECT_EQ(unseen.protocol, "unseen-instruction");

    const auto train_manifest = slurp(dir_ / "run" / "manifest.json");
    const auto triplets = read_dataset(data_);
    const auto a = protocol_triplets(triplets, "seen", train_manifest, 0);
    const auto b = protocol_triplets(triplets, "unseen-instruction", train_manifest, 0);
    ASSERT_EQ(a.size(), b.size());
    for (const auto& x : a) {
        for (const auto& y : b) {
            EXPECT_NE(x.instruction, y.instruction);
        }
    }
    EXPECT_THROW(cmd_eval(eval("unseen-task", dir_ / "task")), ConfigError);
    EXPECT_EQ(run({"eval", "--run", (dir_ / "run").string(), "--dataset", data_.string(), "--protocol",
                   "unseen-task", "--out", (dir_ / "task").string()}),
              2);
}

TEST_F(CliPipeline, DiagPcaUsesAllWhenShortAndIsSeeded) {
    const auto cfg = [&](const fs::path& out) {
        return R"({"dataset": ")" + data_.string() + R"(", "per_task": 100, "seed": 3, "out": ")" + out.string() +
               "\"}";
    };
    cmd_diag_pca(cfg(dir_ / "p1"));
    cmd_diag_pca(cfg(dir_ / "p2"));
    // 2 scenes x 2 directions per task, fewer than 100
    EXPECT_EQ(count_lines(dir_ / "p1" / "points.csv"), 1u + 3 * 4);
    EXPECT_EQ(slurp(dir_ / "p1" / "points.csv"), slurp(dir_ / "p2" / "points.csv"));
    EXPECT_NE(slurp(dir_ / "p1" / "scatter.json").find("fewer than 100"), std::string::npos);
}

TEST_F(Cli, DiagPcaSamplesHundredPerTask) {
    const auto data = dir_ / "data";
    cmd_gen_data(gen_config(data, 60));
    cmd_diag_pca(R"({"dataset": ")" + data.string() + R"(", "out": ")" + (dir_ / "p").string() + "\"}");
    std::istringstream in(slurp(dir_ / "p" / "points.csv"));
    std::map<std::string, int> per_task;
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
        ++per_task[line.substr(0, line.find(','))];
    }
    ASSERT_EQ(per_task.size(), 3u);
    for (const auto& [task, n] : per_task) {
        EXPECT_EQ(n, 100) << task;
    }
}

}  // namespace
}  // namespace exvis
