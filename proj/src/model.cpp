// SPDX-License-Identifier: Apache-2.0
#include "exvis/model.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "exvis/rng.hpp"
#include "json.hpp"

namespace exvis {

static_assert(std::endian::native == std::endian::little,
              "checkpoint and sequence I/O assume a little-endian host");

void ModelConfig::validate() const {
    auto positive = [](int v, const char* name) {
        if (v < 1) {
            throw ConfigError(std::string(name) + " must be >= 1");
        }
    };
    positive(vocab_size, "vocab_size");
    positive(d_model, "d_model");
    positive(n_layers, "n_layers");
    positive(n_heads, "n_heads");
    positive(d_ff, "d_ff");
    positive(max_seq_len, "max_seq_len");
    if (d_model % n_heads != 0) {
        throw ConfigError("d_model must be divisible by n_heads");
    }
    if (head_dim() % 2 != 0) {
        throw ConfigError("head dimension must be even for rotary embeddings");
    }
    if (!(rope_base > 1.0) || !(rmsnorm_eps >= 0.0) || !(z_loss_weight >= 0.0)) {
        throw ConfigError("rope_base must be > 1, rmsnorm_eps and z_loss_weight >= 0");
    }
}

// ---- parameters --------------------------------------------------------------

ModelParams ModelParams::zeros(const ModelConfig& cfg) {
    cfg.validate();
    const int d = cfg.d_model;
    ModelParams p;
    p.tok_emb = Mat::Zero(cfg.vocab_size, d);
    p.layers.resize(static_cast<std::size_t>(cfg.n_layers));
    for (auto& l : p.layers) {
        l.attn_norm = Vec::Zero(d);
        l.wq = Mat::Zero(d, d);
        l.wk = Mat::Zero(d, d);
        l.wv = Mat::Zero(d, d);
        l.wo = Mat::Zero(d, d);
        l.q_norm = Vec::Zero(cfg.head_dim());
        l.k_norm = Vec::Zero(cfg.head_dim());
        l.ffn_norm = Vec::Zero(d);
        l.w1 = Mat::Zero(d, cfg.d_ff);
        l.w3 = Mat::Zero(d, cfg.d_ff);
        l.w2 = Mat::Zero(cfg.d_ff, d);
    }
    p.final_norm = Vec::Zero(d);
    p.w_out = Mat::Zero(d, cfg.vocab_size);
    return p;
}

ModelParams ModelParams::init(const ModelConfig& cfg, std::uint64_t seed, double std) {
    ModelParams p = zeros(cfg);
    Rng rng(seed);
    for (auto& t : p.tensors()) {
        for (std::size_t i = 0; i < t.size; ++i) {
            t.data[i] = t.shape.size() == 2 ? rng.normal(0.0, std) : 1.0;
        }
    }
    return p;
}

std::vector<TensorRef> ModelParams::tensors() {
    std::vector<TensorRef> out;
    auto mat = [&](const std::string& name, Mat& m) {
        out.push_back({name, {static_cast<int>(m.rows()), static_cast<int>(m.cols())}, m.data(),
                       static_cast<std::size_t>(m.size())});
    };
    auto vec = [&](const std::string& name, Vec& v) {
        out.push_back({name, {static_cast<int>(v.size())}, v.data(),
                       static_cast<std::size_t>(v.size())});
    };
    mat("tok_emb", tok_emb);
    for (std::size_t i = 0; i < layers.size(); ++i) {
        auto& l = layers[i];
        const std::string pre = "layers." + std::to_string(i) + ".";
        vec(pre + "attn_norm", l.attn_norm);
        mat(pre + "wq", l.wq);
        mat(pre + "wk", l.wk);
        mat(pre + "wv", l.wv);
        mat(pre + "wo", l.wo);
        vec(pre + "q_norm", l.q_norm);
        vec(pre + "k_norm", l.k_norm);
        vec(pre + "ffn_norm", l.ffn_norm);
        mat(pre + "w1", l.w1);
        mat(pre + "w3", l.w3);
        mat(pre + "w2", l.w2);
    }
    vec("final_norm", final_norm);
    mat("w_out", w_out);
    return out;
}

std::size_t ModelParams::parameter_count() const {
    std::size_t n = 0;
    for (const auto& t : const_cast<ModelParams*>(this)->tensors()) {
        n += t.size;
    }
    return n;
}

void ModelParams::set_zero() {
    for (auto& t : tensors()) {
        std::fill(t.data, t.data + t.size, 0.0);
    }
}

bool ModelParams::operator==(const ModelParams& other) const {
    auto a = const_cast<ModelParams*>(this)->tensors();
    auto b = const_cast<ModelParams&>(other).tensors();
    if (a.size() != b.size()) {
        return false;
    }
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].shape != b[i].shape ||
            std::memcmp(a[i].data, b[i].data, a[i].size * sizeof(double)) != 0) {
            return false;
        }
    }
    return true;
}

// ---- primitives --------------------------------------------------------------

Vec rmsnorm(const Vec& x, const Vec& gain, double eps) {
    if (x.size() != gain.size()) {
        throw ShapeError("rmsnorm: input and gain lengths differ");
    }
    const double r = std::sqrt(x.squaredNorm() / static_cast<double>(x.size()) + eps);
    if (r == 0.0) {
        return Vec::Zero(x.size());
    }
    return gain.cwiseProduct(x) / r;
}

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

Vec swiglu(const Vec& x, const Mat& w1, const Mat& w3, const Mat& w2) {
    if (w1.rows() != x.size() || w3.rows() != x.size() || w1.cols() != w3.cols() ||
        w2.rows() != w1.cols()) {
        throw ShapeError("swiglu: weight shapes do not match");
    }
    const Vec a = w1.transpose() * x;
    const Vec b = w3.transpose() * x;
    Vec h(a.size());
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        h[i] = a[i] * sigmoid(a[i]) * b[i];
    }
    return w2.transpose() * h;
}

Vec rope_apply(const Vec& x, double position, double base) {
    const auto n = x.size();
    if (n % 2 != 0) {
        throw DimensionError("rotary embedding needs an even dimension");
    }
    Vec y(n);
    for (Eigen::Index j = 0; j < n / 2; ++j) {
        const double theta =
            position * std::pow(base, -2.0 * static_cast<double>(j) / static_cast<double>(n));
        const double c = std::cos(theta);
        const double s = std::sin(theta);
        y[2 * j] = c * x[2 * j] - s * x[2 * j + 1];
        y[2 * j + 1] = s * x[2 * j] + c * x[2 * j + 1];
    }
    return y;
}

std::pair<Vec, Vec> qk_norm(const Vec& q, const Vec& k, const Vec& q_gain, const Vec& k_gain,
                            double eps) {
    if (q.size() != k.size()) {
        throw ShapeError("qk_norm: query and key dimensions differ");
    }
    return {rmsnorm(q, q_gain, eps), rmsnorm(k, k_gain, eps)};
}

// ---- batched forward/backward ------------------------------------------------

namespace {

/// cos/sin of position * base^(-2j/hd), laid out [pos][j].
struct RopeTable {
    Mat cos;
    Mat sin;

    RopeTable(Eigen::Index len, int hd, double base) : cos(len, hd / 2), sin(len, hd / 2) {
        for (Eigen::Index t = 0; t < len; ++t) {
            for (int j = 0; j < hd / 2; ++j) {
                const double theta = static_cast<double>(t) *
                                     std::pow(base, -2.0 * j / static_cast<double>(hd));
                cos(t, j) = std::cos(theta);
                sin(t, j) = std::sin(theta);
            }
        }
    }
};

/// Rotates every head block of every row; sign -1 applies the inverse rotation.
void rope_rows(Mat& x, const RopeTable& rt, int hd, double sign) {
    const auto heads = x.cols() / hd;
    for (Eigen::Index t = 0; t < x.rows(); ++t) {
        for (Eigen::Index h = 0; h < heads; ++h) {
            double* v = x.row(t).data() + h * hd;
            for (int j = 0; j < hd / 2; ++j) {
                const double c = rt.cos(t, j);
                const double s = sign * rt.sin(t, j);
                const double a = v[2 * j];
                const double b = v[2 * j + 1];
                v[2 * j] = c * a - s * b;
                v[2 * j + 1] = s * a + c * b;
            }
        }
    }
}

/// Row-wise RMSNorm over column blocks of width n (n = cols for a plain norm).
void rms_rows(const Mat& x, const Vec& g, double eps, int n, Mat& y, Mat& r) {
    const auto blocks = x.cols() / n;
    y.resize(x.rows(), x.cols());
    r.resize(x.rows(), blocks);
    for (Eigen::Index t = 0; t < x.rows(); ++t) {
        for (Eigen::Index b = 0; b < blocks; ++b) {
            const auto xs = x.row(t).segment(b * n, n);
            const double rr = std::sqrt(xs.squaredNorm() / n + eps);
            r(t, b) = rr;
            if (rr == 0.0) {
                y.row(t).segment(b * n, n).setZero();
            } else {
                y.row(t).segment(b * n, n) = xs.cwiseProduct(g.transpose()) / rr;
            }
        }
    }
}

/// dx = (g*dy)/r - x * sum(g*dy*x) / (n r^3); dg += dy*x/r.
void rms_rows_backward(const Mat& x, const Vec& g, const Mat& r, int n, const Mat& dy, Mat& dx,
                       Vec& dg) {
    const auto blocks = x.cols() / n;
    dx.resize(x.rows(), x.cols());
    for (Eigen::Index t = 0; t < x.rows(); ++t) {
        for (Eigen::Index b = 0; b < blocks; ++b) {
            const double rr = r(t, b);
            const auto xs = x.row(t).segment(b * n, n);
            const auto dys = dy.row(t).segment(b * n, n);
            if (rr == 0.0) {
                dx.row(t).segment(b * n, n).setZero();
                continue;
            }
            const Eigen::RowVectorXd u = dys.cwiseProduct(g.transpose());
            const double dot = u.dot(xs);
            dx.row(t).segment(b * n, n) = u / rr - xs * (dot / (n * rr * rr * rr));
            dg += (dys.cwiseProduct(xs) / rr).transpose();
        }
    }
}

struct LayerCache {
    Mat x_in, r1, xn;
    Mat q_raw, k_raw, v;
    Mat rq, rk;
    Mat qr, kr;
    std::vector<Mat> probs;
    Mat attn;
    Mat x_mid, r2, xn2;
    Mat a, b, h;
};

struct ForwardCache {
    std::vector<LayerCache> layers;
    Mat x_final, r_final, xf;
};

/// Runs the stack on ids and returns the final normalized hidden states.
const Mat& run_forward(const ModelParams& p, const ModelConfig& cfg,
                       const std::vector<TokenId>& ids, ForwardCache& c) {
    cfg.validate();
    const auto T = static_cast<Eigen::Index>(ids.size());
    if (T == 0 || T > cfg.max_seq_len) {
        throw DimensionError("sequence length " + std::to_string(T) + " outside [1, " +
                             std::to_string(cfg.max_seq_len) + "]");
    }
    const int d = cfg.d_model;
    const int hd = cfg.head_dim();
    const int H = cfg.n_heads;
    const double eps = cfg.rmsnorm_eps;
    const double scale = 1.0 / std::sqrt(static_cast<double>(hd));
    const RopeTable rt(T, hd, cfg.rope_base);

    Mat x(T, d);
    for (Eigen::Index t = 0; t < T; ++t) {
        const auto id = ids[static_cast<std::size_t>(t)];
        if (id >= static_cast<TokenId>(cfg.vocab_size)) {
            throw UnknownIdError("token id " + std::to_string(id) + " >= vocab size");
        }
        x.row(t) = p.tok_emb.row(id);
    }

    c.layers.resize(p.layers.size());
    for (std::size_t li = 0; li < p.layers.size(); ++li) {
        const auto& L = p.layers[li];
        auto& lc = c.layers[li];
        lc.x_in = x;
        rms_rows(x, L.attn_norm, eps, d, lc.xn, lc.r1);
        lc.q_raw.noalias() = lc.xn * L.wq;
        lc.k_raw.noalias() = lc.xn * L.wk;
        lc.v.noalias() = lc.xn * L.wv;
        rms_rows(lc.q_raw, L.q_norm, eps, hd, lc.qr, lc.rq);
        rms_rows(lc.k_raw, L.k_norm, eps, hd, lc.kr, lc.rk);
        rope_rows(lc.qr, rt, hd, 1.0);
        rope_rows(lc.kr, rt, hd, 1.0);

        lc.probs.resize(static_cast<std::size_t>(H));
        lc.attn.resize(T, d);
        for (int h = 0; h < H; ++h) {
            Mat& P = lc.probs[static_cast<std::size_t>(h)];
            P.noalias() = (lc.qr.middleCols(h * hd, hd) * lc.kr.middleCols(h * hd, hd).transpose()) *
                          scale;
            for (Eigen::Index i = 0; i < T; ++i) {
                const double m = P.row(i).head(i + 1).maxCoeff();
                double sum = 0.0;
                for (Eigen::Index j = 0; j <= i; ++j) {
                    P(i, j) = std::exp(P(i, j) - m);
                    sum += P(i, j);
                }
                P.row(i).head(i + 1) /= sum;
                P.row(i).tail(T - i - 1).setZero();
            }
            lc.attn.middleCols(h * hd, hd).noalias() = P * lc.v.middleCols(h * hd, hd);
        }
        x.noalias() += lc.attn * L.wo;

        lc.x_mid = x;
        rms_rows(x, L.ffn_norm, eps, d, lc.xn2, lc.r2);
        lc.a.noalias() = lc.xn2 * L.w1;
        lc.b.noalias() = lc.xn2 * L.w3;
        lc.h.resize(T, cfg.d_ff);
        for (Eigen::Index i = 0; i < lc.a.size(); ++i) {
            const double a = lc.a.data()[i];
            lc.h.data()[i] = a * sigmoid(a) * lc.b.data()[i];
        }
        x.noalias() += lc.h * L.w2;
    }
    c.x_final = x;
    rms_rows(x, p.final_norm, eps, d, c.xf, c.r_final);
    return c.xf;
}

std::vector<Eigen::Index> target_positions(const TokenSequence& seq) {
    if (seq.role_mask.size() != seq.ids.size()) {
        throw ShapeError("role mask and ids differ in length");
    }
    std::vector<Eigen::Index> pos;
    for (std::size_t t = 0; t + 1 < seq.ids.size(); ++t) {
        if (seq.role_mask[t + 1] == Role::Output) {
            pos.push_back(static_cast<Eigen::Index>(t));
        }
    }
    if (pos.empty()) {
        throw NoOutputTokenError("sequence has no Output-flagged target");
    }
    return pos;
}

/// Loss over the selected rows; fills dZ with d(total)/d(logits) when asked.
LossBreakdown masked_loss(const Mat& z, const TokenSequence& seq,
                          const std::vector<Eigen::Index>& pos, double zw, Mat* dz) {
    LossBreakdown out;
    const auto n = static_cast<double>(pos.size());
    if (dz) {
        dz->resize(z.rows(), z.cols());
    }
    for (std::size_t k = 0; k < pos.size(); ++k) {
        const auto row = z.row(static_cast<Eigen::Index>(k));
        const double m = row.maxCoeff();
        const double sum = (row.array() - m).exp().sum();
        const double lse = m + std::log(sum);
        const auto target = seq.ids[static_cast<std::size_t>(pos[k]) + 1];
        out.ce += lse - row(static_cast<Eigen::Index>(target));
        out.z += lse * lse;
        if (dz) {
            auto g = dz->row(static_cast<Eigen::Index>(k));
            g = (row.array() - lse).exp().matrix() * ((1.0 + 2.0 * zw * lse) / n);
            g(static_cast<Eigen::Index>(target)) -= 1.0 / n;
        }
    }
    out.ce /= n;
    out.z /= n;
    out.total = out.ce + zw * out.z;
    out.n_output_tokens = pos.size();
    if (!std::isfinite(out.total)) {
        throw NonFiniteError("loss is not finite");
    }
    return out;
}

}  // namespace

Mat forward_logits(const ModelParams& p, const ModelConfig& cfg, const std::vector<TokenId>& ids) {
    ForwardCache c;
    return run_forward(p, cfg, ids, c) * p.w_out;
}

LossBreakdown loss(const ModelParams& p, const ModelConfig& cfg, const TokenSequence& seq) {
    const auto pos = target_positions(seq);
    ForwardCache c;
    const Mat& xf = run_forward(p, cfg, seq.ids, c);
    Mat z(static_cast<Eigen::Index>(pos.size()), cfg.vocab_size);
    for (std::size_t k = 0; k < pos.size(); ++k) {
        z.row(static_cast<Eigen::Index>(k)).noalias() = xf.row(pos[k]) * p.w_out;
    }
    return masked_loss(z, seq, pos, cfg.z_loss_weight, nullptr);
}

LossBreakdown loss_and_grad(const ModelParams& p, const ModelConfig& cfg,
                            const TokenSequence& seq, ModelParams& g, double grad_scale) {
    const auto pos = target_positions(seq);
    ForwardCache c;
    const Mat& xf = run_forward(p, cfg, seq.ids, c);
    const auto T = static_cast<Eigen::Index>(seq.ids.size());
    const auto S = static_cast<Eigen::Index>(pos.size());
    const int d = cfg.d_model;
    const int hd = cfg.head_dim();
    const double scale = 1.0 / std::sqrt(static_cast<double>(hd));
    const RopeTable rt(T, hd, cfg.rope_base);

    Mat xs(S, d);
    for (Eigen::Index k = 0; k < S; ++k) {
        xs.row(k) = xf.row(pos[static_cast<std::size_t>(k)]);
    }
    const Mat z = xs * p.w_out;
    Mat dz;
    const LossBreakdown out = masked_loss(z, seq, pos, cfg.z_loss_weight, &dz);
    dz *= grad_scale;

    g.w_out.noalias() += xs.transpose() * dz;
    Mat dxf = Mat::Zero(T, d);
    const Mat dxs = dz * p.w_out.transpose();
    for (Eigen::Index k = 0; k < S; ++k) {
        dxf.row(pos[static_cast<std::size_t>(k)]) = dxs.row(k);
    }
    Mat dx;
    rms_rows_backward(c.x_final, p.final_norm, c.r_final, d, dxf, dx, g.final_norm);

    Mat tmp;
    for (std::size_t li = p.layers.size(); li-- > 0;) {
        const auto& L = p.layers[li];
        auto& G = g.layers[li];
        const auto& lc = c.layers[li];

        // feed-forward block
        G.w2.noalias() += lc.h.transpose() * dx;
        const Mat dh = dx * L.w2.transpose();
        Mat da(T, cfg.d_ff);
        Mat db(T, cfg.d_ff);
        for (Eigen::Index i = 0; i < da.size(); ++i) {
            const double a = lc.a.data()[i];
            const double s = sigmoid(a);
            db.data()[i] = dh.data()[i] * a * s;
            da.data()[i] = dh.data()[i] * lc.b.data()[i] * (s + a * s * (1.0 - s));
        }
        G.w1.noalias() += lc.xn2.transpose() * da;
        G.w3.noalias() += lc.xn2.transpose() * db;
        Mat dxn2 = da * L.w1.transpose();
        dxn2.noalias() += db * L.w3.transpose();
        rms_rows_backward(lc.x_mid, L.ffn_norm, lc.r2, d, dxn2, tmp, G.ffn_norm);
        dx += tmp;

        // attention block
        G.wo.noalias() += lc.attn.transpose() * dx;
        const Mat dattn = dx * L.wo.transpose();
        Mat dqr(T, d);
        Mat dkr(T, d);
        Mat dv(T, d);
        for (int h = 0; h < cfg.n_heads; ++h) {
            const Mat& P = lc.probs[static_cast<std::size_t>(h)];
            const auto dO = dattn.middleCols(h * hd, hd);
            Mat dP = dO * lc.v.middleCols(h * hd, hd).transpose();
            dv.middleCols(h * hd, hd).noalias() = P.transpose() * dO;
            const Eigen::VectorXd rs = dP.cwiseProduct(P).rowwise().sum();
            Mat dS = P.cwiseProduct(dP.colwise() - rs) * scale;
            dqr.middleCols(h * hd, hd).noalias() = dS * lc.kr.middleCols(h * hd, hd);
            dkr.middleCols(h * hd, hd).noalias() = dS.transpose() * lc.qr.middleCols(h * hd, hd);
        }
        rope_rows(dqr, rt, hd, -1.0);
        rope_rows(dkr, rt, hd, -1.0);
        Mat dq;
        Mat dk;
        rms_rows_backward(lc.q_raw, L.q_norm, lc.rq, hd, dqr, dq, G.q_norm);
        rms_rows_backward(lc.k_raw, L.k_norm, lc.rk, hd, dkr, dk, G.k_norm);
        G.wq.noalias() += lc.xn.transpose() * dq;
        G.wk.noalias() += lc.xn.transpose() * dk;
        G.wv.noalias() += lc.xn.transpose() * dv;
        Mat dxn = dq * L.wq.transpose();
        dxn.noalias() += dk * L.wk.transpose();
        dxn.noalias() += dv * L.wv.transpose();
        rms_rows_backward(lc.x_in, L.attn_norm, lc.r1, d, dxn, tmp, G.attn_norm);
        dx += tmp;
    }
    for (Eigen::Index t = 0; t < T; ++t) {
        g.tok_emb.row(seq.ids[static_cast<std::size_t>(t)]) += dx.row(t);
    }
    return out;
}

ModelParams backward(const ModelParams& p, const ModelConfig& cfg, const TokenSequence& seq) {
    ModelParams g = ModelParams::zeros(cfg);
    g.set_zero();
    loss_and_grad(p, cfg, seq, g);
    return g;
}

// ---- incremental decoding ----------------------------------------------------

InferenceSession::InferenceSession(const ModelParams& p, const ModelConfig& cfg) : p_(p), cfg_(cfg) {
    cfg.validate();
    keys_.assign(p.layers.size(), Mat(cfg.max_seq_len, cfg.d_model));
    values_.assign(p.layers.size(), Mat(cfg.max_seq_len, cfg.d_model));
}

Vec InferenceSession::step(TokenId id) {
    if (pos_ >= static_cast<std::size_t>(cfg_.max_seq_len)) {
        throw DimensionError("inference exceeded max_seq_len");
    }
    if (id >= static_cast<TokenId>(cfg_.vocab_size)) {
        throw UnknownIdError("token id " + std::to_string(id) + " >= vocab size");
    }
    const int d = cfg_.d_model;
    const int hd = cfg_.head_dim();
    const double eps = cfg_.rmsnorm_eps;
    const double scale = 1.0 / std::sqrt(static_cast<double>(hd));
    const auto t = static_cast<Eigen::Index>(pos_);

    Vec x = p_.tok_emb.row(id).transpose();
    for (std::size_t li = 0; li < p_.layers.size(); ++li) {
        const auto& L = p_.layers[li];
        const Vec xn = rmsnorm(x, L.attn_norm, eps);
        const Vec q = L.wq.transpose() * xn;
        const Vec k = L.wk.transpose() * xn;
        values_[li].row(t) = (L.wv.transpose() * xn).transpose();
        Vec attn(d);
        for (int h = 0; h < cfg_.n_heads; ++h) {
            const Vec qh = rope_apply(rmsnorm(q.segment(h * hd, hd), L.q_norm, eps),
                                      static_cast<double>(t), cfg_.rope_base);
            keys_[li].row(t).segment(h * hd, hd) =
                rope_apply(rmsnorm(k.segment(h * hd, hd), L.k_norm, eps), static_cast<double>(t),
                           cfg_.rope_base)
                    .transpose();
            Vec s = keys_[li].topRows(t + 1).middleCols(h * hd, hd) * qh * scale;
            s = (s.array() - s.maxCoeff()).exp();
            s /= s.sum();
            attn.segment(h * hd, hd) =
                values_[li].topRows(t + 1).middleCols(h * hd, hd).transpose() * s;
        }
        x += L.wo.transpose() * attn;
        x += swiglu(rmsnorm(x, L.ffn_norm, eps), L.w1, L.w3, L.w2);
    }
    ++pos_;
    return p_.w_out.transpose() * rmsnorm(x, p_.final_norm, eps);
}

// ---- checkpoints -------------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'E', 'V', 'T', 'C', 'K', 'P', 'T', '1'};

nlohmann::ordered_json config_json(const ModelConfig& cfg) {
    return {{"vocab_size", cfg.vocab_size},   {"d_model", cfg.d_model},
            {"n_layers", cfg.n_layers},       {"n_heads", cfg.n_heads},
            {"d_ff", cfg.d_ff},               {"max_seq_len", cfg.max_seq_len},
            {"rope_base", cfg.rope_base},     {"rmsnorm_eps", cfg.rmsnorm_eps},
            {"z_loss_weight", cfg.z_loss_weight}};
}

ModelConfig config_from(const nlohmann::json& j) {
    ModelConfig cfg;
    cfg.vocab_size = j.at("vocab_size").get<int>();
    cfg.d_model = j.value("d_model", cfg.d_model);
    cfg.n_layers = j.value("n_layers", cfg.n_layers);
    cfg.n_heads = j.value("n_heads", cfg.n_heads);
    cfg.d_ff = j.value("d_ff", cfg.d_ff);
    cfg.max_seq_len = j.value("max_seq_len", cfg.max_seq_len);
    cfg.rope_base = j.value("rope_base", cfg.rope_base);
    cfg.rmsnorm_eps = j.value("rmsnorm_eps", cfg.rmsnorm_eps);
    cfg.z_loss_weight = j.value("z_loss_weight", cfg.z_loss_weight);
    return cfg;
}

std::vector<TensorRef> all_tensors(ModelParams& params, OptimizerState& opt) {
    auto out = params.tensors();
    for (auto t : opt.m.tensors()) {
        t.name = "adam.m." + t.name;
        out.push_back(std::move(t));
    }
    for (auto t : opt.v.tensors()) {
        t.name = "adam.v." + t.name;
        out.push_back(std::move(t));
    }
    return out;
}

}  // namespace

std::string model_config_to_json(const ModelConfig& cfg) { return config_json(cfg).dump(2); }

ModelConfig model_config_from_json(const std::string& text) {
    try {
        auto cfg = config_from(nlohmann::json::parse(text));
        cfg.validate();
        return cfg;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("model config: ") + e.what());
    }
}

void save_checkpoint(const std::filesystem::path& path, const ModelConfig& cfg,
                     const ModelParams& params, const OptimizerState& opt) {
    auto& mp = const_cast<ModelParams&>(params);
    auto& mo = const_cast<OptimizerState&>(opt);
    const auto tensors = all_tensors(mp, mo);
    nlohmann::ordered_json header;
    header["format"] = "exvis-checkpoint";
    header["version"] = 1;
    header["config"] = config_json(cfg);
    header["step"] = opt.step;
    nlohmann::ordered_json dir = nlohmann::ordered_json::array();
    std::uint64_t offset = 0;
    for (const auto& t : tensors) {
        dir.push_back({{"name", t.name}, {"shape", t.shape}, {"offset", offset}});
        offset += t.size * sizeof(double);
    }
    header["tensors"] = dir;
    header["payload_bytes"] = offset;
    const std::string text = header.dump();

    std::ofstream f(path, std::ios::binary);
    if (!f) {
        throw DataError("cannot write checkpoint " + path.string());
    }
    f.write(kMagic, sizeof(kMagic));
    const std::uint64_t len = text.size();
    f.write(reinterpret_cast<const char*>(&len), sizeof(len));
    f.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& t : tensors) {
        f.write(reinterpret_cast<const char*>(t.data),
                static_cast<std::streamsize>(t.size * sizeof(double)));
    }
    if (!f) {
        throw DataError("write failed for checkpoint " + path.string());
    }
}

namespace {

Checkpoint load_impl(const std::filesystem::path& path, const ModelConfig* expected) {
    std::ifstream f(path, std::ios::binary);
    if (!f) {
        throw DataError("cannot read checkpoint " + path.string());
    }
    char magic[8];
    if (!f.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw CorruptionError("bad checkpoint magic in " + path.string());
    }
    std::uint64_t len = 0;
    if (!f.read(reinterpret_cast<char*>(&len), sizeof(len)) || len > (1u << 26)) {
        throw CorruptionError("bad checkpoint header length");
    }
    std::string text(len, '\0');
    if (!f.read(text.data(), static_cast<std::streamsize>(len))) {
        throw CorruptionError("truncated checkpoint header");
    }
    nlohmann::json header;
    Checkpoint ck;
    try {
        header = nlohmann::json::parse(text);
        ck.config = config_from(header.at("config"));
        ck.opt.step = header.at("step").get<std::uint64_t>();
    } catch (const nlohmann::json::exception& e) {
        throw CorruptionError(std::string("checkpoint header: ") + e.what());
    }
    try {
        ck.config.validate();
    } catch (const ConfigError& e) {
        throw CorruptionError(std::string("checkpoint config: ") + e.what());
    }
    if (expected && !(*expected == ck.config)) {
        throw ShapeError("checkpoint config does not match the expected model config");
    }
    ck.params = ModelParams::zeros(ck.config);
    ck.opt.m = ModelParams::zeros(ck.config);
    ck.opt.v = ModelParams::zeros(ck.config);
    auto tensors = all_tensors(ck.params, ck.opt);
    const auto& dir = header.at("tensors");
    if (!dir.is_array() || dir.size() != tensors.size()) {
        throw CorruptionError("checkpoint tensor directory does not match the config");
    }
    std::uint64_t offset = 0;
    for (std::size_t i = 0; i < tensors.size(); ++i) {
        const auto& e = dir[i];
        if (e.at("name").get<std::string>() != tensors[i].name ||
            e.at("shape").get<std::vector<int>>() != tensors[i].shape ||
            e.at("offset").get<std::uint64_t>() != offset) {
            throw CorruptionError("checkpoint tensor '" + tensors[i].name + "' has the wrong shape");
        }
        if (!f.read(reinterpret_cast<char*>(tensors[i].data),
                    static_cast<std::streamsize>(tensors[i].size * sizeof(double)))) {
            throw CorruptionError("truncated checkpoint payload");
        }
        offset += tensors[i].size * sizeof(double);
    }
    if (f.peek() != std::char_traits<char>::eof()) {
        throw CorruptionError("trailing bytes after checkpoint payload");
    }
    return ck;
}

}  // namespace

Checkpoint load_checkpoint(const std::filesystem::path& path) { return load_impl(path, nullptr); }

Checkpoint load_checkpoint(const std::filesystem::path& path, const ModelConfig& expected) {
    return load_impl(path, &expected);
}

}  // namespace exvis
