// SPDX-License-Identifier: Apache-2.0
// Acceptance runner: one PASS/FAIL line per criterion, exit status 1 on any FAIL.
#include <openssl/sha.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "exvis/cli.hpp"
#include "exvis/dataset.hpp"
#include "exvis/metrics.hpp"
#include "exvis/model.hpp"
#include "exvis/sampler.hpp"
#include "exvis/synth.hpp"
#include "exvis/tokenizer.hpp"
#include "exvis/trainer.hpp"
#include "json.hpp"
#include "../oracles.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace exvis;

namespace {

// ---- pinned tolerances ---------------------------------------------------------

constexpr double kGradRelTol = 1e-3;
constexpr double kGradStep = 1e-4;
constexpr int kGradParams = 50;

constexpr double kOverfitCe = 0.05;
constexpr std::uint64_t kOverfitMaxSteps = 5000;
constexpr std::uint64_t kOverfitCheckEvery = 50;
constexpr double kOverfitLr = 1e-3;  // raised from 4e-5 at this scale
constexpr std::size_t kOverfitMaxParams = 1000000;

constexpr double kDegenerateTol = 1e-9;

constexpr double kOracleTol = 1e-6;
constexpr double kOracleSsimTol = 1e-4;

constexpr int kQuantBound = 16;

constexpr double kZeroShotRelTol = 0.20;

constexpr int kSupportDraws = 10000;
constexpr int kUniformDraws = 100000;

struct Outcome {
    bool pass{false};
    std::string detail;
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), f, v);
    return buf;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

Image random_image(int w, int h, Rng& rng) {
    Image img(w, h);
    for (auto& b : img.bytes()) {
        b = static_cast<std::uint8_t>(rng.below(256));
    }
    return img;
}

void append_utf8(std::string& s, std::uint32_t cp) {
    if (cp < 0x80) {
        s.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        s.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        s.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        s.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        s.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        s.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        s.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        s.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        s.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        s.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

std::string random_utf8(Rng& rng) {
    std::string s;
    const int n = static_cast<int>(rng.below(48));
    for (int i = 0; i < n; ++i) {
        switch (rng.below(4)) {
            case 0:
                append_utf8(s, static_cast<std::uint32_t>(rng.below(0x80)));
                break;
            case 1:
                append_utf8(s, 0x80 + static_cast<std::uint32_t>(rng.below(0x780)));
                break;
            case 2: {
                auto cp = 0x800 + static_cast<std::uint32_t>(rng.below(0xF800));
                if (cp >= 0xD800 && cp < 0xE000) {
                    cp -= 0x800;
                }
                append_utf8(s, cp);
                break;
            }
            default:
                append_utf8(s, 0x10000 + static_cast<std::uint32_t>(rng.below(0x100000)));
        }
    }
    return s;
}

// ---- 1 -------------------------------------------------------------------------

Outcome gradient_correctness(const fs::path&) {
    ModelConfig cfg;
    cfg.vocab_size = 64;
    cfg.d_model = 16;
    cfg.n_layers = 2;
    cfg.n_heads = 2;
    cfg.d_ff = 40;
    cfg.max_seq_len = 64;
    auto p = ModelParams::init(cfg, 101, 0.3);
    Rng rng(202);
    TokenSequence s;
    for (int i = 0; i < 32; ++i) {
        s.ids.push_back(static_cast<TokenId>(rng.below(64)));
        s.role_mask.push_back(i >= 12 ? Role::Output : Role::Input);
    }
    auto g = backward(p, cfg, s);
    auto params = p.tensors();
    auto grads = g.tensors();
    std::set<std::string> kinds;
    double worst = 0.0;
    for (int n = 0; n < kGradParams; ++n) {
        const std::size_t ti = static_cast<std::size_t>(n) % params.size();
        auto& t = params[ti];
        std::size_t j = rng.below(t.size);
        if (t.name == "tok_emb") {
            // rows of tokens absent from the sequence have an exact zero gradient
            j = s.ids[rng.below(s.ids.size())] * static_cast<std::size_t>(cfg.d_model) +
                rng.below(static_cast<std::uint64_t>(cfg.d_model));
        }
        const double orig = t.data[j];
        t.data[j] = orig + kGradStep;
        const double up = loss(p, cfg, s).total;
        t.data[j] = orig - kGradStep;
        const double down = loss(p, cfg, s).total;
        t.data[j] = orig;
        const double numeric = (up - down) / (2 * kGradStep);
        const double analytic = grads[ti].data[j];
        const double rel = std::abs(numeric - analytic) / std::max({std::abs(numeric), std::abs(analytic), 1e-10});
        worst = std::max(worst, rel);
        std::string kind = t.name.substr(t.name.rfind('.') + 1);
        kinds.insert(kind);
    }
    return {worst < kGradRelTol,
            "max_rel_err=" + fmt("%.3e", worst) + " params=" + std::to_string(kGradParams) +
                " tensor_kinds=" + std::to_string(kinds.size())};
}

// ---- 2 -------------------------------------------------------------------------

bool teacher_forced_exact(const ModelParams& p, const ModelConfig& cfg, const std::vector<TokenSequence>& seqs) {
    for (const auto& s : seqs) {
        const Mat logits = forward_logits(p, cfg, s.ids);
        for (std::size_t t = 0; t + 1 < s.size(); ++t) {
            if (s.role_mask[t + 1] != Role::Output) {
                continue;
            }
            Eigen::Index best = 0;
            logits.row(static_cast<Eigen::Index>(t)).maxCoeff(&best);
            if (static_cast<TokenId>(best) != s.ids[t + 1]) {
                return false;
            }
        }
    }
    return true;
}

double mean_ce(const ModelParams& p, const ModelConfig& cfg, const std::vector<TokenSequence>& seqs) {
    double nll = 0.0;
    std::size_t n = 0;
    for (const auto& s : seqs) {
        const auto l = loss(p, cfg, s);
        nll += l.ce * static_cast<double>(l.n_output_tokens);
        n += l.n_output_tokens;
    }
    return nll / static_cast<double>(n);
}

Outcome overfit_memorization(const fs::path& work) {
    const auto start = std::chrono::steady_clock::now();
    DatasetSpec spec;
    spec.scenes = 4;
    spec.tasks = {TaskKind::Edge, TaskKind::Depth};
    spec.width = 8;
    spec.height = 8;
    spec.seed = 2;
    const auto triplets = generate_triplets(spec);
    std::vector<std::string> corpus;
    for (const auto& t : triplets) {
        corpus.push_back(t.instruction);
    }
    const auto vocab = build_text_vocab(corpus, 4096, 8, 8);
    ModelConfig mcfg;
    mcfg.vocab_size = static_cast<int>(vocab.size());
    mcfg.d_model = 64;
    mcfg.n_layers = 2;
    mcfg.n_heads = 2;
    mcfg.d_ff = 176;
    mcfg.max_seq_len = 256;
    TrainConfig tcfg;
    tcfg.lr = kOverfitLr;
    tcfg.batch_size = 4;
    tcfg.epochs = 100000;
    tcfg.seed = 3;
    const auto seqs = pretokenize(vocab, triplets);
    auto params = ModelParams::init(mcfg, 4);
    auto opt = make_optimizer_state(mcfg);
    double ce = mean_ce(params, mcfg, seqs);
    bool exact = false;
    while (opt.step < kOverfitMaxSteps) {
        auto seg = tcfg;
        seg.max_steps = std::min(opt.step + kOverfitCheckEvery, kOverfitMaxSteps);
        auto r = train(mcfg, std::move(params), std::move(opt), seqs, seg);
        params = std::move(r.params);
        opt = std::move(r.opt);
        ce = mean_ce(params, mcfg, seqs);
        if (ce < kOverfitCe && teacher_forced_exact(params, mcfg, seqs)) {
            exact = true;
            break;
        }
    }
    SampleConfig greedy;
    greedy.top_k_image = 1;
    const auto results = batch_infer(params, mcfg, vocab, triplets, greedy);
    std::size_t reproduced = 0;
    for (std::size_t i = 0; i < results.size(); ++i) {
        reproduced += quantize_image(vocab, results[i].generated) == quantize_image(vocab, triplets[i].target);
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    json m;
    m["criterion"] = 2;
    m["triplets"] = triplets.size();
    m["lr"] = kOverfitLr;
    m["lr_note"] = "raised from 4e-5 to 1e-3 at this scale";
    m["weight_decay"] = tcfg.weight_decay;
    m["betas"] = {tcfg.beta1, tcfg.beta2};
    m["batch_size"] = tcfg.batch_size;
    m["parameters"] = params.parameter_count();
    m["steps"] = opt.step;
    m["ce"] = ce;
    m["reproduced"] = reproduced;
    m["seconds"] = secs;
    fs::create_directories(work);
    write_file_atomic(work / "manifest.json", m.dump(2) + "\n");

    const bool pass = triplets.size() == 16 && params.parameter_count() <= kOverfitMaxParams && ce < kOverfitCe &&
                      opt.step <= kOverfitMaxSteps && exact && reproduced == triplets.size();
    return {pass, "ce=" + fmt("%.4f", ce) + " steps=" + std::to_string(opt.step) + " reproduced=" +
                      std::to_string(reproduced) + "/" + std::to_string(triplets.size()) +
                      " params=" + std::to_string(params.parameter_count()) + " lr=" + fmt("%g", kOverfitLr) +
                      " seconds=" + fmt("%.0f", secs)};
}

// ---- 3 -------------------------------------------------------------------------

Outcome degenerate_row(const fs::path&) {
    DatasetSpec spec;
    spec.scenes = 20;
    spec.tasks = {TaskKind::Edge, TaskKind::Depth, TaskKind::SurfaceNormal};
    spec.width = 16;
    spec.height = 16;
    spec.seed = 31;
    ReportBuilder builder("seen");
    for (const auto& t : generate_triplets(spec)) {
        if (t.direction == Direction::Forward) {
            builder.add(t.task_direction(), pair_metrics(t.task, t.direction, t.target, t.target));
        }
    }
    const auto report = builder.finish();
    const auto& edge = report.tasks.at("edge:fwd").values;
    const auto& depth = report.tasks.at("depth:fwd").values;
    const auto& normal = report.tasks.at("normal:fwd").values;
    bool ok = std::abs(edge.at("f1") - 1.0) <= kDegenerateTol;
    for (const auto* v : {&edge, &depth, &normal}) {
        ok = ok && std::abs(v->at("ssim") - 1.0) <= kDegenerateTol;
        ok = ok && std::isinf(v->at("psnr")) && v->at("psnr") > 0;
    }
    ok = ok && std::abs(depth.at("rmse")) <= kDegenerateTol;
    ok = ok && std::abs(normal.at("mean_angle_error")) <= kDegenerateTol;
    const auto text = report.to_json();
    ok = ok && text.find("\"inf\"") != std::string::npos;
    return {ok, "f1=" + fmt("%.12g", edge.at("f1")) + " ssim=" + fmt("%.12g", edge.at("ssim")) +
                    " rmse=" + fmt("%.3g", depth.at("rmse")) + " angle=" +
                    fmt("%.3g", normal.at("mean_angle_error")) + " psnr=inf"};
}

// ---- 4 -------------------------------------------------------------------------

Outcome oracle_equivalence(const fs::path&) {
    Rng rng(404);
    std::map<std::string, double> worst;
    const std::map<std::string, Rgb> cats{{"a", {255, 0, 0}}, {"b", {0, 255, 0}}, {"c", {0, 0, 255}}};
    const std::vector<Rgb> palette{{255, 0, 0}, {0, 255, 0}, {0, 0, 255}, {0, 0, 0}};
    for (int i = 0; i < 20; ++i) {
        const auto a = random_image(16, 16, rng);
        const auto b = random_image(16, 16, rng);
        Image sa(16, 16);
        Image sb(16, 16);
        for (int y = 0; y < 16; ++y) {
            for (int x = 0; x < 16; ++x) {
                sa.set(x, y, palette[rng.below(4)]);
                sb.set(x, y, palette[rng.below(4)]);
            }
        }
        auto track = [&](const std::string& name, double got, double want) {
            worst[name] = std::max(worst[name], std::abs(got - want));
        };
        track("f1", edge_f1(a, b), oracle::f1(a, b));
        track("ssim", ssim(a, b), oracle::ssim(a, b));
        track("psnr", psnr(a, b), oracle::psnr(a, b));
        track("rmse", rmse_depth(a, b), oracle::rmse_depth(a, b));
        track("miou", miou(sa, sb, cats), oracle::miou(sa, sb, cats));
        track("angle", mean_angle_error(a, b), oracle::mean_angle(a, b));
    }
    bool ok = true;
    std::string detail;
    for (const auto& [name, err] : worst) {
        ok = ok && err <= (name == "ssim" ? kOracleSsimTol : kOracleTol);
        detail += name + "=" + fmt("%.2e", err) + " ";
    }
    return {ok && worst.size() == 6, detail + "(max abs diff over 20 pairs)"};
}

// ---- 5 -------------------------------------------------------------------------

Outcome tokenizer_totality(const fs::path&) {
    DatasetSpec spec;
    spec.scenes = 84;
    spec.tasks.assign(kAllTasks.begin(), kAllTasks.end());
    spec.width = 8;
    spec.height = 8;
    spec.seed = 55;
    auto triplets = generate_triplets(spec);
    triplets.resize(1000);
    std::vector<std::string> corpus;
    for (const auto& t : triplets) {
        corpus.push_back(t.instruction);
    }
    const auto v = build_text_vocab(corpus, 4096, 8, 16);

    Rng rng(505);
    int text_fail = 0;
    for (int i = 0; i < 1000; ++i) {
        const auto s = random_utf8(rng);
        text_fail += v.decode_text(v.encode_text(s)) != s;
    }
    int worst = 0;
    for (int i = 0; i < 1000; ++i) {
        const int w = 1 + static_cast<int>(rng.below(16));
        const int h = 1 + static_cast<int>(rng.below(16));
        const auto img = random_image(w, h, rng);
        const auto back = dequantize_image(v, quantize_image(v, img), w, h);
        for (std::size_t k = 0; k < img.bytes().size(); ++k) {
            worst = std::max(worst, std::abs(int(back.bytes()[k]) - int(img.bytes()[k])));
        }
    }
    int parse_fail = 0;
    for (const auto& t : triplets) {
        const auto src = dequantize_image(v, quantize_image(v, t.source), t.source.width(), t.source.height());
        const auto dst = dequantize_image(v, quantize_image(v, t.target), t.target.width(), t.target.height());
        const auto p = parse_sequence(v, assemble_sequence(v, t.source, t.instruction, t.target).ids);
        parse_fail += !(p.input == src && p.instruction == t.instruction && p.output && *p.output == dst);
    }
    return {text_fail == 0 && worst <= kQuantBound && parse_fail == 0,
            "text_failures=" + std::to_string(text_fail) + "/1000 quant_inf_err=" + std::to_string(worst) +
                " parse_failures=" + std::to_string(parse_fail) + "/" + std::to_string(triplets.size())};
}

// ---- 6 -------------------------------------------------------------------------

Outcome protocol_integrity(const fs::path& work) {
    fs::remove_all(work);
    const auto data = work / "data";
    const auto run = work / "run";
    cmd_gen_data(json{{"scenes", 6}, {"tasks", {"edge", "depth", "normal"}}, {"width", 8}, {"height", 8},
                      {"seed", 61}, {"out", data.string()}}
                     .dump());
    const std::set<TaskDirection> held{{TaskKind::Edge, Direction::Inverse}, {TaskKind::Depth, Direction::Forward}};
    json train_cfg = {{"dataset", data.string()},
                      {"out", run.string()},
                      {"seed", 6},
                      {"excluded_tasks", {"edge:inv", "depth:fwd"}},
                      {"vocab", {{"max_resolution", 8}}},
                      {"model", {{"d_model", 32}, {"n_layers", 1}, {"n_heads", 2}, {"d_ff", 64}, {"max_seq_len", 320}}},
                      {"train", {{"lr", 1e-3}, {"max_steps", 40}, {"epochs", 20}}}};
    cmd_train(train_cfg.dump());

    const auto all = read_dataset(data);
    const auto kept = exclusion_filter(all, held);
    std::size_t removed = 0;
    bool sound = true;
    for (const auto& t : kept) {
        sound = sound && !held.contains(t.task_direction());
    }
    for (const auto& t : all) {
        removed += held.contains(t.task_direction());
    }
    const bool complete = kept.size() + removed == all.size() && removed > 0;

    const auto manifest = json::parse(slurp(run / "manifest.json"));
    const bool echoed = manifest.contains("excluded_tasks") && manifest["excluded_tasks"].size() == 2;

    const std::string out = (work / "eval").string();
    std::vector<std::string> args{"exvis", "eval", "--run", run.string(), "--dataset", data.string(),
                                  "--protocol", "unseen-task", "--out", out};
    std::vector<char*> argv;
    for (auto& a : args) {
        argv.push_back(a.data());
    }
    std::ostringstream sink;
    auto* old = std::cout.rdbuf(sink.rdbuf());
    const int code = run_cli(static_cast<int>(argv.size()), argv.data());
    std::cout.rdbuf(old);

    bool ran_exactly = false;
    std::size_t pairs = 0;
    if (code == 0 && fs::exists(fs::path(out) / "report.json")) {
        const auto report = json::parse(slurp(fs::path(out) / "report.json"));
        std::set<std::string> keys;
        for (const auto& [k, v] : report["tasks"].items()) {
            keys.insert(k);
            pairs += v["pairs"].get<std::size_t>();
        }
        ran_exactly = report["protocol"] == "unseen-task" && keys == std::set<std::string>{"edge:inv", "depth:fwd"} &&
                      pairs == removed;
    }
    return {sound && complete && echoed && ran_exactly,
            "sound=" + std::to_string(sound) + " complete=" + std::to_string(complete) + " manifest_echo=" +
                std::to_string(echoed) + " eval_exit=" + std::to_string(code) + " held_out_pairs=" +
                std::to_string(pairs) + "/" + std::to_string(removed)};
}

// ---- 7 -------------------------------------------------------------------------

struct Direction7 {
    std::string key;
    std::string metric;
    bool higher_better;
};

Outcome instruction_zero_shot(const fs::path& work) {
    fs::remove_all(work);
    const auto data = work / "data";
    const auto run = work / "run";
    const json gen = {{"scenes", 8},         {"tasks", {"edge", "depth", "normal"}},
                      {"width", 8},          {"height", 8},
                      {"seed", 7},           {"family", "A"},
                      {"instructions_per_pair", 64}, {"out", data.string()}};
    cmd_gen_data(gen.dump());
    const json train_cfg = {
        {"dataset", data.string()},
        {"out", run.string()},
        {"seed", 3},
        {"vocab", {{"max_words", 4096}, {"levels", 8}, {"max_resolution", 8}}},
        {"model", {{"d_model", 64}, {"n_layers", 2}, {"n_heads", 2}, {"d_ff", 176}, {"max_seq_len", 320}}},
        {"train",
         {{"lr", 1e-3}, {"batch_size", 4}, {"epochs", 2000}, {"max_steps", 15000}, {"target_ce", 0.002},
          {"eval_every", 500}}}};
    cmd_train(train_cfg.dump());
    auto eval = [&](const std::string& protocol) {
        return cmd_eval(json{{"run", run.string()},
                             {"dataset", data.string()},
                             {"protocol", protocol},
                             {"sample", {{"top_k_image", 1}}},
                             {"out", (work / protocol).string()}}
                            .dump());
    };
    const auto a = eval("seen");
    const auto b = eval("unseen-instruction");

    const std::vector<Direction7> checks{{"edge:fwd", "f1", true},      {"edge:inv", "ssim", true},
                                         {"depth:fwd", "rmse", false},  {"depth:inv", "ssim", true},
                                         {"normal:fwd", "mean_angle_error", false},
                                         {"normal:inv", "ssim", true}};
    bool ok = true;
    std::string detail;
    json rows = json::array();
    for (const auto& c : checks) {
        const double va = a.tasks.at(c.key).values.at(c.metric);
        const double vb = b.tasks.at(c.key).values.at(c.metric);
        const bool within = c.higher_better ? vb >= (1 - kZeroShotRelTol) * va : vb <= (1 + kZeroShotRelTol) * va;
        ok = ok && within;
        detail += c.key + " " + c.metric + " A=" + fmt("%.3f", va) + " B=" + fmt("%.3f", vb) + (within ? "" : "!") +
                  "; ";
        rows.push_back({{"task", c.key}, {"metric", c.metric}, {"family_a", va}, {"family_b", vb}, {"within", within}});
    }
    json m;
    m["criterion"] = 7;
    m["relative_tolerance"] = kZeroShotRelTol;
    m["rule"] = "family B no worse than family A by more than the tolerance, relative to A, per task direction";
    m["dataset"] = gen;
    m["train"] = train_cfg;
    m["results"] = rows;
    m["calibration"] = json::parse(slurp(fs::path(EXVIS_SOURCE_DIR) / "tests/acceptance/zero_shot_calibration.json"));
    write_file_atomic(work / "manifest.json", m.dump(2) + "\n");
    return {ok, detail};
}

// ---- 8 -------------------------------------------------------------------------

std::string sha256_hex(const std::string& bytes) {
    unsigned char digest[SHA256_DIGEST_LENGTH];
    SHA256(reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size(), digest);
    std::string hex;
    char buf[3];
    for (const unsigned char c : digest) {
        std::snprintf(buf, sizeof(buf), "%02x", c);
        hex += buf;
    }
    return hex;
}

/// Relative path -> digest of every artifact under dir. Manifests carry wall-clock
/// fields and are left out.
std::map<std::string, std::string> tree_digest(const fs::path& dir) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        const auto name = e.path().filename().string();
        if (e.is_regular_file() && name.find("manifest.json") == std::string::npos) {
            out[fs::relative(e.path(), dir).string()] = sha256_hex(slurp(e.path()));
        }
    }
    return out;
}

Outcome reproducibility(const fs::path& work) {
    fs::remove_all(work);
    for (const std::string tag : {"a", "b"}) {
        const auto root = work / tag;
        cmd_gen_data(json{{"scenes", 4}, {"tasks", {"edge", "segmentation", "derain"}}, {"width", 8}, {"height", 8},
                          {"seed", 81}, {"out", (root / "data").string()}}
                         .dump());
        cmd_train(json{{"dataset", (root / "data").string()},
                       {"out", (root / "run").string()},
                       {"seed", 8},
                       {"vocab", {{"max_resolution", 8}}},
                       {"model", {{"d_model", 32}, {"n_layers", 1}, {"n_heads", 2}, {"d_ff", 64}, {"max_seq_len", 320}}},
                       {"train", {{"lr", 1e-3}, {"max_steps", 30}, {"epochs", 10}}}}
                      .dump());
        cmd_eval(json{{"run", (root / "run").string()},
                      {"dataset", (root / "data").string()},
                      {"protocol", "seen"},
                      {"seed", 9},
                      {"out", (root / "eval").string()}}
                     .dump());
    }
    const auto a = tree_digest(work / "a");
    const auto b = tree_digest(work / "b");
    std::size_t kinds = 0;
    for (const std::string f : {"data/triplets.jsonl", "run/checkpoint.bin", "eval/report.json"}) {
        kinds += a.contains(f);
    }
    std::string detail = "files=" + std::to_string(a.size());
    for (const std::string f : {"data/triplets.jsonl", "run/checkpoint.bin", "eval/report.json"}) {
        if (a.contains(f)) {
            detail += " " + fs::path(f).filename().string() + "=" + a.at(f).substr(0, 12);
        }
    }
    return {a == b && kinds == 3 && a.size() > 10, detail};
}

// ---- 9 -------------------------------------------------------------------------

Outcome sampler_laws(const fs::path&) {
    Rng lr(909);
    Vec logits(300);
    for (Eigen::Index i = 0; i < logits.size(); ++i) {
        logits[i] = lr.normal(0.0, 2.0);
    }
    std::vector<Eigen::Index> order(300);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto x, auto y) { return logits[x] > logits[y]; });
    const std::set<Eigen::Index> top(order.begin(), order.begin() + 16);
    Rng rng(910);
    int violations = 0;
    for (int t = 0; t < kSupportDraws; ++t) {
        violations += !top.contains(top_k_sample(logits, 16, 1.0, rng));
    }

    int argmax_fail = 0;
    for (std::uint64_t s = 0; s < 200; ++s) {
        Rng r(s);
        Vec l(64);
        for (Eigen::Index i = 0; i < l.size(); ++i) {
            l[i] = r.normal(0.0, 1.0);
        }
        Eigen::Index best = 0;
        l.maxCoeff(&best);
        for (const double temp : {0.05, 1.0, 20.0}) {
            argmax_fail += top_k_sample(l, 1, temp, s + 1000) != best;
        }
    }

    constexpr int kBins = 16;
    std::vector<int> counts(kBins, 0);
    const Vec flat = Vec::Zero(kBins);
    for (int t = 0; t < kUniformDraws; ++t) {
        ++counts[static_cast<std::size_t>(top_k_sample(flat, kBins, 1.0, rng))];
    }
    const double e = double(kUniformDraws) / kBins;
    const double sigma = std::sqrt(kUniformDraws * (1.0 / kBins) * (1 - 1.0 / kBins));
    double chi2 = 0.0;
    int outside = 0;
    for (const int c : counts) {
        chi2 += (c - e) * (c - e) / e;
        outside += std::abs(c - e) > 3 * sigma;
    }
    // 0.999 quantile of chi-square, 15 degrees of freedom
    constexpr double kChi2Critical = 37.697;
    return {violations == 0 && argmax_fail == 0 && outside == 0 && chi2 < kChi2Critical,
            "support_violations=" + std::to_string(violations) + "/" + std::to_string(kSupportDraws) +
                " argmax_failures=" + std::to_string(argmax_fail) + " bins_outside_3sigma=" +
                std::to_string(outside) + " chi2=" + fmt("%.2f", chi2)};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"acceptance criteria"};
    std::vector<int> only;
    std::string work = (fs::temp_directory_path() / "exvis_acceptance").string();
    app.add_option("--criterion", only, "run only these criteria");
    app.add_option("--work", work, "scratch directory");
    CLI11_PARSE(app, argc, argv);

    const std::vector<std::pair<std::string, std::function<Outcome(const fs::path&)>>> criteria{
        {"gradient-correctness", gradient_correctness},
        {"overfit-memorization", overfit_memorization},
        {"degenerate-metric-row", degenerate_row},
        {"metric-oracle-equivalence", oracle_equivalence},
        {"tokenizer-totality", tokenizer_totality},
        {"protocol-integrity", protocol_integrity},
        {"instruction-zero-shot", instruction_zero_shot},
        {"reproducibility", reproducibility},
        {"sampler-laws", sampler_laws},
    };
    bool all = true;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int n = static_cast<int>(i) + 1;
        if (!only.empty() && std::find(only.begin(), only.end(), n) == only.end()) {
            continue;
        }
        Outcome o;
        try {
            o = criteria[i].second(fs::path(work) / ("c" + std::to_string(n)));
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        std::cout << "criterion " << n << " " << criteria[i].first << ": " << (o.pass ? "PASS" : "FAIL") << "  "
                  << o.detail << std::endl;
        all = all && o.pass;
    }
    return all ? 0 : 1;
}
