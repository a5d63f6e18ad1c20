// SPDX-License-Identifier: Apache-2.0
#include "exvis/cli.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <iostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "exvis/color_table.hpp"
#include "exvis/grammar.hpp"
#include "exvis/rng.hpp"
#include "json.hpp"

namespace exvis {

namespace {

using json = nlohmann::ordered_json;

json parse_config(const std::string& text) {
    try {
        auto j = text.empty() ? json::object() : json::parse(text);
        if (!j.is_object()) {
            throw ConfigError("config must be a JSON object");
        }
        return j;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
}

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
    for (const auto& [key, value] : j.items()) {
        bool ok = false;
        for (const char* a : allowed) {
            ok = ok || key == a;
        }
        if (!ok) {
            throw ConfigError("unknown key '" + key + "' in " + where);
        }
    }
}

template <class T>
T get(const json& j, const char* key, T fallback) {
    if (!j.contains(key)) {
        return fallback;
    }
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config key '") + key + "': " + e.what());
    }
}

std::filesystem::path require_path(const json& j, const char* key) {
    const auto p = get<std::string>(j, key, "");
    if (p.empty()) {
        throw ConfigError(std::string("missing required option '") + key + "'");
    }
    return p;
}

std::string utc_now() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

class Manifest {
public:
    Manifest(std::string command, json config)
        : command_(std::move(command)), config_(std::move(config)),
          start_(std::chrono::steady_clock::now()), started_at_(utc_now()) {}

    json extra = json::object();
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;

    void write(const std::filesystem::path& path) const {
        json j;
        j["command"] = command_;
        j["tool_version"] = kToolVersion;
        j["config"] = config_;
        j["seed"] = config_.contains("seed") ? config_["seed"] : json(0);
        j["inputs"] = inputs;
        j["outputs"] = outputs;
        for (const auto& [k, v] : extra.items()) {
            j[k] = v;
        }
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        j["wall_clock"] = {{"started_utc", started_at_}, {"elapsed_seconds", secs}};
        write_file_atomic(path, j.dump(2) + "\n");
    }

private:
    std::string command_;
    json config_;
    std::chrono::steady_clock::time_point start_;
    std::string started_at_;
};

SampleConfig sample_config(const json& j, std::uint64_t seed) {
    SampleConfig s;
    s.seed = seed;
    if (j.is_null()) {
        return s;
    }
    check_keys(j, {"top_k_text", "top_k_image", "temperature", "free_structure"}, "sample");
    s.top_k_text = get<std::size_t>(j, "top_k_text", s.top_k_text);
    s.top_k_image = get<std::size_t>(j, "top_k_image", s.top_k_image);
    s.temperature = get<double>(j, "temperature", s.temperature);
    s.free_structure = get<bool>(j, "free_structure", s.free_structure);
    s.validate();
    return s;
}

std::set<TaskDirection> parse_excluded(const json& j) {
    std::set<TaskDirection> out;
    if (!j.is_array()) {
        throw ConfigError("excluded_tasks must be an array of \"task:fwd|inv\" strings");
    }
    for (const auto& e : j) {
        out.insert(task_direction_from_string(e.get<std::string>()));
    }
    return out;
}

json excluded_json(const std::set<TaskDirection>& ex) {
    json a = json::array();
    for (const auto& td : ex) {
        a.push_back(to_string(td));
    }
    return a;
}

void save_checkpoint_atomic(const std::filesystem::path& path, const ModelConfig& cfg,
                            const ModelParams& p, const OptimizerState& opt) {
    auto tmp = path;
    tmp += ".tmp";
    save_checkpoint(tmp, cfg, p, opt);
    std::filesystem::rename(tmp, path);
}

std::map<std::string, Rgb> category_colors_of(const Vocab& v, const Triplet& t) {
    std::map<std::string, Rgb> out;
    const auto cat = t.bindings.find("category");
    const auto col = t.bindings.find("color");
    if (cat == t.bindings.end() || col == t.bindings.end()) {
        return out;
    }
    // the model emits bin centers, so compare against the quantized color
    const Rgb c = v.token_pixel(v.pixel_token(css_color(col->second)));
    std::string_view rest = cat->second;
    while (!rest.empty()) {
        const auto at = rest.find(" and ");
        out.emplace(std::string(rest.substr(0, at)), c);
        rest = at == std::string_view::npos ? std::string_view{} : rest.substr(at + 5);
    }
    return out;
}

}  // namespace

// ---- gen-data ----------------------------------------------------------------

GenDataOptions gen_data_options(const std::string& text) {
    const auto j = parse_config(text);
    check_keys(j, {"scenes", "tasks", "width", "height", "min_objects", "max_objects", "family", "seed",
                   "instructions_per_pair", "out"},
               "gen-data config");
    GenDataOptions o;
    auto& s = o.spec;
    s.scenes = get<std::size_t>(j, "scenes", s.scenes);
    if (j.contains("tasks")) {
        s.tasks.clear();
        for (const auto& t : j["tasks"]) {
            s.tasks.push_back(task_from_string(t.get<std::string>()));
        }
    }
    s.width = get<int>(j, "width", s.width);
    s.height = get<int>(j, "height", s.height);
    s.min_objects = get<int>(j, "min_objects", s.min_objects);
    s.max_objects = get<int>(j, "max_objects", s.max_objects);
    s.family = grammar_family_from_string(get<std::string>(j, "family", "A"));
    s.seed = get<std::uint64_t>(j, "seed", s.seed);
    s.instructions_per_pair = get<std::size_t>(j, "instructions_per_pair", s.instructions_per_pair);
    o.out = require_path(j, "out");
    s.validate();
    return o;
}

std::size_t cmd_gen_data(const std::string& config_json) {
    const auto o = gen_data_options(config_json);
    Manifest m("gen-data", parse_config(config_json));
    const auto triplets = generate_triplets(o.spec);
    write_dataset(o.out, triplets);
    m.outputs = {"triplets.jsonl", "images/"};
    m.extra["triplets"] = triplets.size();
    m.write(o.out / "manifest.json");
    return triplets.size();
}

// ---- train ---------------------------------------------------------------------

TrainOptions train_options(const std::string& text) {
    const auto j = parse_config(text);
    check_keys(j, {"dataset", "out", "seed", "vocab", "model", "train", "excluded_tasks", "resume"},
               "train config");
    TrainOptions o;
    o.dataset = require_path(j, "dataset");
    o.out = require_path(j, "out");
    o.train.seed = get<std::uint64_t>(j, "seed", 0);
    o.resume = get<bool>(j, "resume", false);
    if (j.contains("vocab")) {
        const auto& v = j["vocab"];
        check_keys(v, {"max_words", "levels", "max_resolution"}, "vocab");
        o.max_words = get<std::size_t>(v, "max_words", o.max_words);
        o.levels = get<int>(v, "levels", o.levels);
        o.max_resolution = get<int>(v, "max_resolution", o.max_resolution);
    }
    if (j.contains("model")) {
        const auto& mj = j["model"];
        check_keys(mj, {"d_model", "n_layers", "n_heads", "d_ff", "max_seq_len", "rope_base", "rmsnorm_eps",
                        "z_loss_weight", "init_std"},
                   "model");
        auto& m = o.model;
        m.d_model = get<int>(mj, "d_model", m.d_model);
        m.n_layers = get<int>(mj, "n_layers", m.n_layers);
        m.n_heads = get<int>(mj, "n_heads", m.n_heads);
        m.d_ff = get<int>(mj, "d_ff", m.d_ff);
        m.max_seq_len = get<int>(mj, "max_seq_len", m.max_seq_len);
        m.rope_base = get<double>(mj, "rope_base", m.rope_base);
        m.rmsnorm_eps = get<double>(mj, "rmsnorm_eps", m.rmsnorm_eps);
        m.z_loss_weight = get<double>(mj, "z_loss_weight", m.z_loss_weight);
        o.init_std = get<double>(mj, "init_std", o.init_std);
    }
    if (j.contains("train")) {
        const auto& tj = j["train"];
        check_keys(tj, {"lr", "weight_decay", "beta1", "beta2", "adam_eps", "batch_size", "epochs", "bucket_width",
                        "max_steps", "grad_clip", "target_ce", "eval_every", "checkpoint_every"},
                   "train");
        auto& t = o.train;
        t.lr = get<double>(tj, "lr", t.lr);
        t.weight_decay = get<double>(tj, "weight_decay", t.weight_decay);
        t.beta1 = get<double>(tj, "beta1", t.beta1);
        t.beta2 = get<double>(tj, "beta2", t.beta2);
        t.adam_eps = get<double>(tj, "adam_eps", t.adam_eps);
        t.batch_size = get<std::size_t>(tj, "batch_size", t.batch_size);
        t.epochs = get<std::size_t>(tj, "epochs", t.epochs);
        t.bucket_width = get<std::size_t>(tj, "bucket_width", t.bucket_width);
        t.max_steps = get<std::uint64_t>(tj, "max_steps", t.max_steps);
        t.grad_clip = get<double>(tj, "grad_clip", t.grad_clip);
        o.target_ce = get<double>(tj, "target_ce", o.target_ce);
        o.eval_every = get<std::size_t>(tj, "eval_every", o.eval_every);
        o.checkpoint_every = get<std::size_t>(tj, "checkpoint_every", o.checkpoint_every);
    }
    if (j.contains("excluded_tasks")) {
        o.train.excluded_tasks = parse_excluded(j["excluded_tasks"]);
    }
    o.train.validate();
    if (o.eval_every < 1) {
        throw ConfigError("eval_every must be >= 1");
    }
    return o;
}

namespace {

double dataset_ce(const ModelParams& p, const ModelConfig& cfg, const std::vector<TokenSequence>& seqs) {
    double nll = 0.0;
    std::size_t tokens = 0;
    for (const auto& s : seqs) {
        const auto l = loss(p, cfg, s);
        nll += l.ce * static_cast<double>(l.n_output_tokens);
        tokens += l.n_output_tokens;
    }
    return nll / static_cast<double>(tokens);
}

/// CSV lines of a previous run up to and including `step`.
std::string metrics_prefix(const std::filesystem::path& path, std::uint64_t step) {
    if (!std::filesystem::exists(path)) {
        return {};
    }
    std::istringstream in(read_file(path));
    std::string line;
    std::string out;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
        if (!line.empty() && std::stoull(line.substr(0, line.find(','))) <= step) {
            out += line + "\n";
        }
    }
    return out;
}

}  // namespace

TrainSummary cmd_train(const std::string& config_json) {
    auto o = train_options(config_json);
    Manifest manifest("train", parse_config(config_json));
    const auto all = read_dataset(o.dataset);
    const auto filtered = exclusion_filter(all, o.train.excluded_tasks);
    if (filtered.empty()) {
        throw EmptyDatasetError("dataset is empty after exclusion");
    }
    std::filesystem::create_directories(o.out);
    const auto ckpt_path = o.out / "checkpoint.bin";
    const auto vocab_path = o.out / "vocab.json";
    const auto csv_path = o.out / "metrics.csv";

    std::optional<Vocab> vocab;
    ModelParams params;
    OptimizerState opt;
    std::string csv_prefix;
    if (o.resume && std::filesystem::exists(ckpt_path)) {
        vocab = Vocab::load(vocab_path);
        o.model.vocab_size = static_cast<int>(vocab->size());
        auto ck = load_checkpoint(ckpt_path, o.model);
        params = std::move(ck.params);
        opt = std::move(ck.opt);
        csv_prefix = metrics_prefix(csv_path, opt.step);
    } else {
        std::vector<std::string> corpus;
        for (const auto& t : filtered) {
            corpus.push_back(t.instruction);
        }
        vocab = build_text_vocab(corpus, o.max_words, o.levels, o.max_resolution);
        o.model.vocab_size = static_cast<int>(vocab->size());
        o.model.validate();
        params = ModelParams::init(o.model, derive_seed(o.train.seed, 1), o.init_std);
        opt = make_optimizer_state(o.model);
    }
    const auto seqs = pretokenize(*vocab, filtered);
    for (const auto& s : seqs) {
        if (s.size() > static_cast<std::size_t>(o.model.max_seq_len)) {
            throw ConfigError("a training sequence has " + std::to_string(s.size()) +
                              " tokens, above max_seq_len " + std::to_string(o.model.max_seq_len));
        }
    }
    vocab->save(vocab_path);

    // periodic checkpoints and target checks need the live parameters, so the
    // run is split into segments of `every` steps
    const std::uint64_t every = std::max<std::uint64_t>(
        o.checkpoint_every, o.target_ce > 0.0 ? o.eval_every : 0);
    std::string csv = csv_prefix;
    double final_ce = 0.0;
    bool reached = false;
    for (;;) {
        auto seg_cfg = o.train;
        const std::uint64_t stop = every > 0 ? opt.step + every : 0;
        if (stop != 0 && (seg_cfg.max_steps == 0 || stop < seg_cfg.max_steps)) {
            seg_cfg.max_steps = stop;
        }
        const auto before = opt.step;
        auto result = train(o.model, std::move(params), std::move(opt), seqs, seg_cfg);
        params = std::move(result.params);
        opt = std::move(result.opt);
        for (const auto& r : result.log) {
            char buf[160];
            std::snprintf(buf, sizeof(buf), "%llu,%.17g,%.17g,%.17g,%zu\n",
                          static_cast<unsigned long long>(r.step), r.ce, r.z, r.total, r.tokens);
            csv += buf;
        }
        if (o.checkpoint_every > 0) {
            save_checkpoint_atomic(ckpt_path, o.model, params, opt);
        }
        if (o.target_ce > 0.0) {
            final_ce = dataset_ce(params, o.model, seqs);
            reached = final_ce < o.target_ce;
        }
        const bool done = opt.step == before || every == 0 || reached ||
                          (o.train.max_steps != 0 && opt.step >= o.train.max_steps);
        if (done) {
            break;
        }
    }
    if (o.target_ce <= 0.0) {
        final_ce = dataset_ce(params, o.model, seqs);
    }
    save_checkpoint_atomic(ckpt_path, o.model, params, opt);
    write_file_atomic(csv_path, "step,ce,z,total,tokens\n" + csv);

    manifest.inputs = {o.dataset.string()};
    manifest.outputs = {"checkpoint.bin", "vocab.json", "metrics.csv"};
    manifest.extra["excluded_tasks"] = excluded_json(o.train.excluded_tasks);
    manifest.extra["model"] = json::parse(model_config_to_json(o.model));
    manifest.extra["parameters"] = params.parameter_count();
    manifest.extra["steps"] = opt.step;
    manifest.extra["sequences"] = seqs.size();
    manifest.extra["final_ce"] = final_ce;
    if (o.target_ce > 0.0) {
        manifest.extra["target_ce_reached"] = reached;
    }
    manifest.write(o.out / "manifest.json");
    return {opt.step, final_ce, seqs.size()};
}

// ---- infer ---------------------------------------------------------------------

InferOptions infer_options(const std::string& text) {
    const auto j = parse_config(text);
    check_keys(j, {"checkpoint", "vocab", "image", "instruction", "instruction_file", "height", "width", "seed",
                   "sample", "out"},
               "infer config");
    InferOptions o;
    o.checkpoint = require_path(j, "checkpoint");
    o.vocab = get<std::string>(j, "vocab", "");
    if (o.vocab.empty()) {
        o.vocab = o.checkpoint.parent_path() / "vocab.json";
    }
    o.image = require_path(j, "image");
    o.instruction = get<std::string>(j, "instruction", "");
    o.instruction_file = get<std::string>(j, "instruction_file", "");
    const bool has_text = j.contains("instruction");
    if (has_text == !o.instruction_file.empty()) {
        throw ConfigError("give exactly one of 'instruction' and 'instruction_file'");
    }
    o.height = get<int>(j, "height", 0);
    o.width = get<int>(j, "width", 0);
    o.sample = sample_config(j.contains("sample") ? j["sample"] : json(), get<std::uint64_t>(j, "seed", 0));
    o.out = require_path(j, "out");
    return o;
}

void cmd_infer(const std::string& config_json) {
    auto o = infer_options(config_json);
    Manifest manifest("infer", parse_config(config_json));
    if (!o.instruction_file.empty()) {
        o.instruction = read_file(o.instruction_file);
        while (!o.instruction.empty() && (o.instruction.back() == '\n' || o.instruction.back() == '\r')) {
            o.instruction.pop_back();
        }
    }
    if (!std::filesystem::exists(o.checkpoint)) {
        throw DataError("checkpoint not found: " + o.checkpoint.string());
    }
    const auto ck = load_checkpoint(o.checkpoint);
    const auto vocab = Vocab::load(o.vocab);
    if (!std::filesystem::exists(o.image)) {
        throw DataError("image not found: " + o.image.string());
    }
    const Image input = read_png(o.image);
    const int h = o.height > 0 ? o.height : input.height();
    const int w = o.width > 0 ? o.width : input.width();
    const Image out = generate(ck.params, ck.config, vocab, input, o.instruction, h, w, o.sample);
    if (o.out.has_parent_path()) {
        std::filesystem::create_directories(o.out.parent_path());
    }
    auto tmp = o.out;
    tmp += ".tmp.png";
    write_png(out, tmp);
    std::filesystem::rename(tmp, o.out);
    manifest.inputs = {o.checkpoint.string(), o.vocab.string(), o.image.string()};
    manifest.outputs = {o.out.filename().string()};
    auto mpath = o.out;
    mpath += ".manifest.json";
    manifest.write(mpath);
}

// ---- eval ----------------------------------------------------------------------

std::vector<Triplet> protocol_triplets(const std::vector<Triplet>& dataset, const std::string& protocol,
                                       const std::string& training_manifest_json, std::uint64_t seed) {
    const auto manifest = parse_config(training_manifest_json);
    const bool has_list = manifest.contains("excluded_tasks");
    const auto excluded = has_list ? parse_excluded(manifest["excluded_tasks"]) : std::set<TaskDirection>{};
    std::vector<Triplet> out;
    if (protocol == "seen" || protocol == "unseen-instruction") {
        out = exclusion_filter(dataset, excluded);
        if (protocol == "unseen-instruction") {
            for (std::size_t i = 0; i < out.size(); ++i) {
                out[i].instruction = resample_instruction(out[i], GrammarFamily::B, derive_seed(seed, i));
            }
        }
    } else if (protocol == "unseen-task") {
        if (!has_list || excluded.empty()) {
            throw ConfigError("unseen-task needs a training manifest with a non-empty exclusion list");
        }
        for (const auto& t : dataset) {
            if (excluded.contains(t.task_direction())) {
                out.push_back(t);
            }
        }
    } else {
        throw ConfigError("unknown protocol '" + protocol + "' (seen, unseen-instruction, unseen-task)");
    }
    return out;
}

EvalOptions eval_options(const std::string& text) {
    const auto j = parse_config(text);
    check_keys(j, {"run", "dataset", "protocol", "seed", "sample", "max_pairs", "out"}, "eval config");
    EvalOptions o;
    o.run = require_path(j, "run");
    o.dataset = require_path(j, "dataset");
    o.protocol = get<std::string>(j, "protocol", o.protocol);
    o.sample = sample_config(j.contains("sample") ? j["sample"] : json(), get<std::uint64_t>(j, "seed", 0));
    o.max_pairs = get<std::size_t>(j, "max_pairs", 0);
    o.out = require_path(j, "out");
    return o;
}

MetricReport cmd_eval(const std::string& config_json) {
    const auto o = eval_options(config_json);
    Manifest manifest("eval", parse_config(config_json));
    const auto train_manifest = read_file(o.run / "manifest.json");
    const auto ck = load_checkpoint(o.run / "checkpoint.bin");
    const auto vocab = Vocab::load(o.run / "vocab.json");
    const auto dataset = read_dataset(o.dataset);
    auto triplets = protocol_triplets(dataset, o.protocol, train_manifest, o.sample.seed);
    if (o.max_pairs > 0 && triplets.size() > o.max_pairs) {
        triplets.resize(o.max_pairs);
    }
    const auto results = batch_infer(ck.params, ck.config, vocab, triplets, o.sample);
    ReportBuilder builder(o.protocol);
    std::string pairs = "index\ttask\tmetrics\tinstruction\n";
    for (std::size_t i = 0; i < results.size(); ++i) {
        const auto& r = results[i];
        const Image ref = dequantize_image(vocab, quantize_image(vocab, r.reference), r.reference.width(),
                                           r.reference.height());
        const auto m = pair_metrics(r.task, r.direction, r.generated, ref, category_colors_of(vocab, triplets[i]));
        builder.add({r.task, r.direction}, m);
        std::string cells;
        for (const auto& [name, v] : m) {
            char buf[64];
            std::snprintf(buf, sizeof(buf), "%s%s=%.6g", cells.empty() ? "" : ",", name.c_str(), v);
            cells += buf;
        }
        pairs += std::to_string(i) + "\t" + to_string(triplets[i].task_direction()) + "\t" + cells + "\t" +
                 triplets[i].instruction + "\n";
    }
    const auto report = builder.finish();
    std::filesystem::create_directories(o.out);
    write_file_atomic(o.out / "report.json", report.to_json() + "\n");
    write_file_atomic(o.out / "report.txt", report.to_table());
    write_file_atomic(o.out / "pairs.tsv", pairs);
    manifest.inputs = {o.run.string(), o.dataset.string()};
    manifest.outputs = {"report.json", "report.txt", "pairs.tsv"};
    manifest.extra["protocol"] = o.protocol;
    manifest.extra["pairs"] = triplets.size();
    manifest.write(o.out / "manifest.json");
    return report;
}

// ---- diag-pca ------------------------------------------------------------------

PcaOptions pca_options(const std::string& text) {
    const auto j = parse_config(text);
    check_keys(j, {"dataset", "per_task", "seed", "out"}, "diag-pca config");
    PcaOptions o;
    o.dataset = require_path(j, "dataset");
    o.per_task = get<std::size_t>(j, "per_task", o.per_task);
    o.seed = get<std::uint64_t>(j, "seed", 0);
    o.out = require_path(j, "out");
    if (o.per_task < 1) {
        throw ConfigError("per_task must be >= 1");
    }
    return o;
}

void cmd_diag_pca(const std::string& config_json) {
    const auto o = pca_options(config_json);
    Manifest manifest("diag-pca", parse_config(config_json));
    const auto dataset = read_dataset(o.dataset);
    std::vector<std::string> texts;
    std::vector<std::string> labels;
    json warnings = json::array();
    for (const auto task : kAllTasks) {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < dataset.size(); ++i) {
            if (dataset[i].task == task) {
                idx.push_back(i);
            }
        }
        if (idx.empty()) {
            continue;
        }
        const std::string name(to_string(task));
        if (idx.size() < o.per_task) {
            const auto msg = "task " + name + " has " + std::to_string(idx.size()) +
                             " instructions, fewer than " + std::to_string(o.per_task) + "; using all";
            std::cerr << "warning: " << msg << '\n';
            warnings.push_back(msg);
        } else {
            Rng rng(derive_seed(o.seed, static_cast<std::uint64_t>(task)));
            rng.shuffle(idx.begin(), idx.end());
            idx.resize(o.per_task);
        }
        for (const auto i : idx) {
            texts.push_back(dataset[i].instruction);
            labels.push_back(name);
        }
    }
    const auto pca = pca_project(texts, 2);
    if (pca.degenerate) {
        const std::string msg = "degenerate variance: the sampled instructions do not span two directions";
        std::cerr << "warning: " << msg << '\n';
        warnings.push_back(msg);
    }
    std::filesystem::create_directories(o.out);
    std::string csv = "task,x,y\n";
    json scatter;
    json per_task = json::object();
    for (std::size_t i = 0; i < texts.size(); ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        char buf[96];
        std::snprintf(buf, sizeof(buf), ",%.10g,%.10g\n", pca.points(r, 0), pca.points(r, 1));
        csv += labels[i] + buf;
        per_task[labels[i]].push_back({pca.points(r, 0), pca.points(r, 1)});
    }
    scatter["variance"] = {pca.variance[0], pca.variance[1]};
    scatter["tasks"] = per_task;
    scatter["warnings"] = warnings;
    write_file_atomic(o.out / "points.csv", csv);
    write_file_atomic(o.out / "scatter.json", scatter.dump(2) + "\n");
    manifest.inputs = {o.dataset.string()};
    manifest.outputs = {"points.csv", "scatter.json"};
    manifest.extra["points"] = texts.size();
    manifest.write(o.out / "manifest.json");
}

// ---- command line --------------------------------------------------------------

namespace {

std::string load_config_file(const std::string& path) {
    if (path.empty()) {
        return "{}";
    }
    if (!std::filesystem::exists(path)) {
        throw ConfigError("config file not found: " + path);
    }
    return read_file(path);
}

}  // namespace

int run_cli(int argc, char** argv) {
    CLI::App app{"exvis: explanatory-instruction vision toolkit"};
    app.require_subcommand(1);
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out;

    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON config file");
        sub->add_option("--seed", seed, "root seed (overrides config)");
        sub->add_option("--out", out, "output location (overrides config)");
    };
    auto* gen = app.add_subcommand("gen-data", "generate a synthetic triplet dataset");
    common(gen);

    auto* tr = app.add_subcommand("train", "train a model");
    common(tr);
    bool resume = false;
    tr->add_flag("--resume", resume, "continue from the checkpoint in the output directory");
    std::string dataset;
    tr->add_option("--dataset", dataset, "dataset directory");

    auto* inf = app.add_subcommand("infer", "generate an output image");
    common(inf);
    std::string checkpoint, vocab_path, image, instruction, instruction_file;
    int height = 0, width = 0;
    std::optional<std::size_t> top_k_image, top_k_text;
    std::optional<double> temperature;
    bool free_structure = false;
    inf->add_option("--checkpoint", checkpoint);
    inf->add_option("--vocab", vocab_path);
    inf->add_option("--image", image);
    auto* instr_opt = inf->add_option("--instruction", instruction);
    inf->add_option("--instruction-file", instruction_file)->excludes(instr_opt);
    inf->add_option("--height", height);
    inf->add_option("--width", width);
    auto sample_flags = [&](CLI::App* sub) {
        sub->add_option("--top-k-image", top_k_image);
        sub->add_option("--top-k-text", top_k_text);
        sub->add_option("--temperature", temperature);
        sub->add_flag("--free-structure", free_structure, "sample structural tokens instead of forcing them");
    };
    sample_flags(inf);

    auto* ev = app.add_subcommand("eval", "evaluate a trained run");
    common(ev);
    std::string run_dir, protocol;
    std::optional<std::size_t> max_pairs;
    ev->add_option("--run", run_dir, "training output directory");
    ev->add_option("--dataset", dataset, "evaluation dataset directory");
    ev->add_option("--protocol", protocol)->check(CLI::IsMember({"seen", "unseen-instruction", "unseen-task"}));
    ev->add_option("--max-pairs", max_pairs);
    sample_flags(ev);

    auto* pca = app.add_subcommand("diag-pca", "instruction-embedding PCA diagnostic");
    common(pca);
    std::optional<std::size_t> per_task;
    pca->add_option("--dataset", dataset);
    pca->add_option("--per-task", per_task);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        auto j = parse_config(load_config_file(config_path));
        if (seed) {
            j["seed"] = *seed;
        }
        if (!out.empty()) {
            j["out"] = out;
        }
        if (!dataset.empty()) {
            j["dataset"] = dataset;
        }
        auto apply_sample = [&] {
            if (top_k_image) j["sample"]["top_k_image"] = *top_k_image;
            if (top_k_text) j["sample"]["top_k_text"] = *top_k_text;
            if (temperature) j["sample"]["temperature"] = *temperature;
            if (free_structure) j["sample"]["free_structure"] = true;
        };
        if (*gen) {
            const auto n = cmd_gen_data(j.dump());
            std::cout << "wrote " << n << " triplets to " << j["out"].get<std::string>() << '\n';
        } else if (*tr) {
            if (resume) {
                j["resume"] = true;
            }
            const auto s = cmd_train(j.dump());
            std::cout << "trained " << s.steps << " steps on " << s.sequences << " sequences, ce " << s.final_ce
                      << '\n';
        } else if (*inf) {
            if (!checkpoint.empty()) j["checkpoint"] = checkpoint;
            if (!vocab_path.empty()) j["vocab"] = vocab_path;
            if (!image.empty()) j["image"] = image;
            if (*instr_opt) j["instruction"] = instruction;
            if (!instruction_file.empty()) j["instruction_file"] = instruction_file;
            if (height > 0) j["height"] = height;
            if (width > 0) j["width"] = width;
            apply_sample();
            cmd_infer(j.dump());
        } else if (*ev) {
            if (!run_dir.empty()) j["run"] = run_dir;
            if (!protocol.empty()) j["protocol"] = protocol;
            if (max_pairs) j["max_pairs"] = *max_pairs;
            apply_sample();
            std::cout << cmd_eval(j.dump()).to_table();
        } else if (*pca) {
            if (per_task) j["per_task"] = *per_task;
            cmd_diag_pca(j.dump());
        }
        return 0;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const GrammarError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 3;
    } catch (const CorruptionError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 3;
    } catch (const EmptyDatasetError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 4;
    }
}

}  // namespace exvis
