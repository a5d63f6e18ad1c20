// SPDX-License-Identifier: Apache-2.0
#include "exvis/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "exvis/rng.hpp"

namespace exvis {

void TrainConfig::validate() const {
    if (!(lr > 0.0) || !std::isfinite(lr)) {
        throw ConfigError("lr must be finite and > 0");
    }
    if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0)) {
        throw ConfigError("betas must lie in (0, 1)");
    }
    if (!(weight_decay >= 0.0) || !(adam_eps > 0.0)) {
        throw ConfigError("weight_decay must be >= 0 and adam_eps > 0");
    }
    if (batch_size < 1 || bucket_width < 1 || epochs < 1) {
        throw ConfigError("batch_size, bucket_width and epochs must be >= 1");
    }
    if (!(grad_clip >= 0.0)) {
        throw ConfigError("grad_clip must be >= 0");
    }
}

std::vector<Triplet> exclusion_filter(const std::vector<Triplet>& triplets,
                                      const std::set<TaskDirection>& excluded) {
    std::vector<Triplet> out;
    for (const auto& t : triplets) {
        if (!excluded.contains(t.task_direction())) {
            out.push_back(t);
        }
    }
    return out;
}

OptimizerState make_optimizer_state(const ModelConfig& cfg) {
    OptimizerState s{ModelParams::zeros(cfg), ModelParams::zeros(cfg), 0};
    s.m.set_zero();
    s.v.set_zero();
    return s;
}

void adamw_step(ModelParams& params, const ModelParams& grads, OptimizerState& state,
                const TrainConfig& cfg) {
    auto p = params.tensors();
    auto g = const_cast<ModelParams&>(grads).tensors();
    auto m = state.m.tensors();
    auto v = state.v.tensors();
    if (g.size() != p.size() || m.size() != p.size() || v.size() != p.size()) {
        throw ShapeError("adamw: tensor count mismatch");
    }
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (g[i].shape != p[i].shape || m[i].shape != p[i].shape || v[i].shape != p[i].shape) {
            throw ShapeError("adamw: shape mismatch for " + p[i].name);
        }
        for (std::size_t j = 0; j < g[i].size; ++j) {
            if (!std::isfinite(g[i].data[j])) {
                throw NonFiniteError("non-finite gradient in " + g[i].name);
            }
        }
    }
    state.step += 1;
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(cfg.beta1, t);
    const double c2 = 1.0 - std::pow(cfg.beta2, t);
    const double decay = 1.0 - cfg.lr * cfg.weight_decay;
    for (std::size_t i = 0; i < p.size(); ++i) {
        for (std::size_t j = 0; j < p[i].size; ++j) {
            const double gj = g[i].data[j];
            double& mj = m[i].data[j];
            double& vj = v[i].data[j];
            mj = cfg.beta1 * mj + (1.0 - cfg.beta1) * gj;
            vj = cfg.beta2 * vj + (1.0 - cfg.beta2) * gj * gj;
            const double mhat = mj / c1;
            const double vhat = vj / c2;
            double& theta = p[i].data[j];
            theta *= decay;
            theta -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.adam_eps);
        }
    }
}

std::vector<std::vector<std::size_t>> batch_schedule(const std::vector<TokenSequence>& seqs,
                                                     const TrainConfig& cfg) {
    const auto buckets = bucket_by_length(seqs, cfg.bucket_width);
    std::vector<std::vector<std::size_t>> out;
    const Rng root(cfg.seed);
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const Rng epoch_rng = root.split(epoch);
        for (const auto& [key, members] : buckets) {
            auto order = members;
            Rng rng = epoch_rng.split(key);
            rng.shuffle(order.begin(), order.end());
            for (std::size_t i = 0; i < order.size(); i += cfg.batch_size) {
                const auto end = std::min(order.size(), i + cfg.batch_size);
                out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                                 order.begin() + static_cast<std::ptrdiff_t>(end));
            }
        }
    }
    return out;
}

namespace {

double global_norm(ModelParams& g) {
    double s = 0.0;
    for (const auto& t : g.tensors()) {
        for (std::size_t j = 0; j < t.size; ++j) {
            s += t.data[j] * t.data[j];
        }
    }
    return std::sqrt(s);
}

}  // namespace

TrainResult train(const ModelConfig& mcfg, ModelParams params, OptimizerState opt,
                  const std::vector<TokenSequence>& seqs, const TrainConfig& cfg,
                  const TrainCallbacks& callbacks) {
    cfg.validate();
    mcfg.validate();
    if (seqs.empty()) {
        throw EmptyDatasetError("no training sequences (dataset empty after exclusion?)");
    }
    const auto schedule = batch_schedule(seqs, cfg);
    TrainResult result;
    ModelParams grads = ModelParams::zeros(mcfg);
    for (std::size_t b = static_cast<std::size_t>(opt.step); b < schedule.size(); ++b) {
        if (cfg.max_steps != 0 && opt.step >= cfg.max_steps) {
            break;
        }
        const auto& batch = schedule[b];
        grads.set_zero();
        StepRecord rec;
        const double inv = 1.0 / static_cast<double>(batch.size());
        // fixed accumulation order: batch index order
        for (const auto idx : batch) {
            const auto l = loss_and_grad(params, mcfg, seqs[idx], grads, inv);
            rec.ce += l.ce * inv;
            rec.z += l.z * inv;
            rec.total += l.total * inv;
            rec.tokens += l.n_output_tokens;
        }
        if (cfg.grad_clip > 0.0) {
            const double norm = global_norm(grads);
            if (norm > cfg.grad_clip) {
                const double s = cfg.grad_clip / norm;
                for (auto& t : grads.tensors()) {
                    for (std::size_t j = 0; j < t.size; ++j) {
                        t.data[j] *= s;
                    }
                }
            }
        }
        adamw_step(params, grads, opt, cfg);
        rec.step = opt.step;
        result.log.push_back(rec);
        if (callbacks.on_step && !callbacks.on_step(rec)) {
            break;
        }
    }
    result.params = std::move(params);
    result.opt = std::move(opt);
    return result;
}

std::vector<TokenSequence> pretokenize(const Vocab& v, const std::vector<Triplet>& triplets) {
    std::vector<TokenSequence> out;
    out.reserve(triplets.size());
    for (const auto& t : triplets) {
        out.push_back(assemble_sequence(v, t.source, t.instruction, t.target));
    }
    return out;
}

void write_metrics_csv(const std::filesystem::path& path, const std::vector<StepRecord>& log) {
    std::ofstream f(path, std::ios::binary);
    if (!f) {
        throw DataError("cannot write " + path.string());
    }
    f << "step,ce,z,total,tokens\n";
    char buf[160];
    for (const auto& r : log) {
        std::snprintf(buf, sizeof(buf), "%llu,%.17g,%.17g,%.17g,%zu\n",
                      static_cast<unsigned long long>(r.step), r.ce, r.z, r.total, r.tokens);
        f << buf;
    }
}

}  // namespace exvis
