// SPDX-License-Identifier: Apache-2.0
#include "exvis/metrics.hpp"

#include <Eigen/Core>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <sstream>

#include "exvis/rng.hpp"
#include "exvis/synth.hpp"
#include "json.hpp"

namespace exvis {

namespace {

void require_same(const Image& a, const Image& b, const char* what) {
    if (!same_size(a, b) || a.empty()) {
        throw DimensionError(std::string(what) + ": images must be non-empty and the same size");
    }
}

bool is_white(Rgb c) { return luminance(c) >= 128.0; }

}  // namespace

double edge_f1(const Image& pred, const Image& ref) {
    require_same(pred, ref, "edge_f1");
    std::size_t tp = 0;
    std::size_t np = 0;
    std::size_t nr = 0;
    for (int y = 0; y < ref.height(); ++y) {
        for (int x = 0; x < ref.width(); ++x) {
            const bool p = is_white(pred.at(x, y));
            const bool r = is_white(ref.at(x, y));
            tp += p && r;
            np += p;
            nr += r;
        }
    }
    if (np == 0 && nr == 0) {
        return 1.0;
    }
    if (tp == 0) {
        return 0.0;
    }
    const double precision = static_cast<double>(tp) / static_cast<double>(np);
    const double recall = static_cast<double>(tp) / static_cast<double>(nr);
    return 2.0 * precision * recall / (precision + recall);
}

double ssim(const Image& a, const Image& b) {
    require_same(a, b, "ssim");
    constexpr int kWin = 8;
    if (a.width() < kWin || a.height() < kWin) {
        throw DimensionError("ssim needs images of at least 8x8");
    }
    constexpr double c1 = (0.01 * 255.0) * (0.01 * 255.0);
    constexpr double c2 = (0.03 * 255.0) * (0.03 * 255.0);
    constexpr double n = kWin * kWin;
    double total = 0.0;
    int windows = 0;
    for (int wy = 0; wy + kWin <= a.height(); wy += kWin) {
        for (int wx = 0; wx + kWin <= a.width(); wx += kWin) {
            double sa = 0.0;
            double sb = 0.0;
            for (int y = wy; y < wy + kWin; ++y) {
                for (int x = wx; x < wx + kWin; ++x) {
                    sa += luminance(a.at(x, y));
                    sb += luminance(b.at(x, y));
                }
            }
            const double ma = sa / n;
            const double mb = sb / n;
            double va = 0.0;
            double vb = 0.0;
            double cov = 0.0;
            for (int y = wy; y < wy + kWin; ++y) {
                for (int x = wx; x < wx + kWin; ++x) {
                    const double da = luminance(a.at(x, y)) - ma;
                    const double db = luminance(b.at(x, y)) - mb;
                    va += da * da;
                    vb += db * db;
                    cov += da * db;
                }
            }
            va /= n;
            vb /= n;
            cov /= n;
            total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) /
                     ((ma * ma + mb * mb + c1) * (va + vb + c2));
            ++windows;
        }
    }
    return total / windows;
}

double mse(const Image& a, const Image& b) {
    require_same(a, b, "mse");
    const auto pa = a.bytes();
    const auto pb = b.bytes();
    double s = 0.0;
    for (std::size_t i = 0; i < pa.size(); ++i) {
        const double d = static_cast<double>(pa[i]) - static_cast<double>(pb[i]);
        s += d * d;
    }
    return s / static_cast<double>(pa.size());
}

double psnr_from_mse(double m) {
    if (m == 0.0) {
        return std::numeric_limits<double>::infinity();
    }
    return 10.0 * std::log10(255.0 * 255.0 / m);
}

double psnr(const Image& a, const Image& b) { return psnr_from_mse(mse(a, b)); }

double rmse_depth(const Image& pred, const Image& ref) {
    require_same(pred, ref, "rmse_depth");
    double s = 0.0;
    for (int y = 0; y < ref.height(); ++y) {
        for (int x = 0; x < ref.width(); ++x) {
            const double dp = kMaxDepthMeters * (1.0 - luminance(pred.at(x, y)) / 255.0);
            const double dr = kMaxDepthMeters * (1.0 - luminance(ref.at(x, y)) / 255.0);
            s += (dp - dr) * (dp - dr);
        }
    }
    return std::sqrt(s / (static_cast<double>(ref.width()) * ref.height()));
}

double miou(const Image& pred, const Image& ref, const std::map<std::string, Rgb>& category_colors) {
    require_same(pred, ref, "miou");
    double sum = 0.0;
    int present = 0;
    for (const auto& [name, color] : category_colors) {
        std::size_t inter = 0;
        std::size_t uni = 0;
        std::size_t in_ref = 0;
        for (int y = 0; y < ref.height(); ++y) {
            for (int x = 0; x < ref.width(); ++x) {
                const bool p = pred.at(x, y) == color;
                const bool r = ref.at(x, y) == color;
                inter += p && r;
                uni += p || r;
                in_ref += r;
            }
        }
        if (in_ref == 0) {
            continue;
        }
        sum += static_cast<double>(inter) / static_cast<double>(uni);
        ++present;
    }
    return present == 0 ? 1.0 : sum / present;
}

double mean_angle_error(const Image& pred, const Image& ref) {
    require_same(pred, ref, "mean_angle_error");
    auto decode = [](Rgb c) {
        Eigen::Vector3d n(c.r / 127.5 - 1.0, c.g / 127.5 - 1.0, c.b / 127.5 - 1.0);
        return Eigen::Vector3d(n / n.norm());
    };
    double s = 0.0;
    for (int y = 0; y < ref.height(); ++y) {
        for (int x = 0; x < ref.width(); ++x) {
            // half-angle form; acos loses precision near 0 and 180 degrees
            const auto a = decode(pred.at(x, y));
            const auto b = decode(ref.at(x, y));
            s += 2.0 * std::atan2((a - b).norm(), (a + b).norm()) * 180.0 / std::numbers::pi;
        }
    }
    return s / (static_cast<double>(ref.width()) * ref.height());
}

// ---- PCA -----------------------------------------------------------------------

Vec embed_instruction(std::string_view text, int dim) {
    if (dim < 1) {
        throw DimensionError("embedding dimension must be >= 1");
    }
    Vec v = Vec::Zero(dim);
    std::string word;
    int words = 0;
    auto flush = [&] {
        if (word.empty()) {
            return;
        }
        std::uint64_t h = 0xcbf29ce484222325ull;
        for (const unsigned char c : word) {
            h ^= c;
            h *= 0x100000001b3ull;
        }
        v[static_cast<Eigen::Index>(h % static_cast<std::uint64_t>(dim))] += 1.0;
        ++words;
        word.clear();
    };
    for (const unsigned char c : text) {
        if (std::isalnum(c)) {
            word.push_back(static_cast<char>(std::tolower(c)));
        } else {
            flush();
        }
    }
    flush();
    if (words > 0) {
        v /= words;
    }
    return v;
}

PcaResult pca_points(const Mat& x, int dims, double tol, int max_iter) {
    if (x.rows() < 2) {
        throw DimensionError("pca needs at least 2 points");
    }
    if (dims < 1 || dims > x.cols()) {
        throw DimensionError("pca dims must be in [1, feature count]");
    }
    const Mat centered = x.rowwise() - x.colwise().mean();
    Mat cov = centered.transpose() * centered / static_cast<double>(x.rows());
    PcaResult out;
    out.components = Mat::Zero(dims, x.cols());
    out.variance = Vec::Zero(dims);
    const double scale = std::max(cov.cwiseAbs().maxCoeff(), 1e-300);
    Rng rng(0x9ca);
    for (int c = 0; c < dims; ++c) {
        Vec v(x.cols());
        for (auto& e : v) {
            e = rng.normal();
        }
        v.normalize();
        double lambda = 0.0;
        for (int it = 0; it < max_iter; ++it) {
            Vec w = cov * v;
            const double norm = w.norm();
            if (norm <= 1e-12 * scale) {
                lambda = 0.0;
                break;
            }
            w /= norm;
            if (w.dot(v) < 0.0) {
                w = -w;
            }
            const double diff = (w - v).norm();
            v = w;
            lambda = v.dot(cov * v);
            if (diff < tol) {
                break;
            }
        }
        if (lambda <= 1e-12 * scale) {
            out.degenerate = true;
            lambda = 0.0;
            v.setZero();
        } else {
            Eigen::Index arg = 0;
            v.cwiseAbs().maxCoeff(&arg);
            if (v[arg] < 0.0) {
                v = -v;
            }
        }
        out.components.row(c) = v.transpose();
        out.variance[c] = lambda;
        cov -= lambda * v * v.transpose();
    }
    out.points = centered * out.components.transpose();
    return out;
}

PcaResult pca_project(const std::vector<std::string>& instructions, int dims) {
    if (instructions.size() < 2) {
        throw DimensionError("pca needs at least 2 instructions");
    }
    constexpr int kDim = 256;
    Mat x(static_cast<Eigen::Index>(instructions.size()), kDim);
    for (std::size_t i = 0; i < instructions.size(); ++i) {
        x.row(static_cast<Eigen::Index>(i)) = embed_instruction(instructions[i], kDim).transpose();
    }
    return pca_points(x, dims);
}

// ---- reports -----------------------------------------------------------------

std::map<std::string, double> pair_metrics(TaskKind task, Direction dir, const Image& generated,
                                           const Image& reference,
                                           const std::map<std::string, Rgb>& category_colors) {
    std::map<std::string, double> m;
    m["mse"] = mse(generated, reference);
    if (generated.width() >= 8 && generated.height() >= 8) {
        m["ssim"] = ssim(generated, reference);
    }
    if (dir == Direction::Forward) {
        switch (task) {
            case TaskKind::Edge:
                m["f1"] = edge_f1(generated, reference);
                break;
            case TaskKind::Depth:
                m["rmse"] = rmse_depth(generated, reference);
                break;
            case TaskKind::SurfaceNormal:
                m["mean_angle_error"] = mean_angle_error(generated, reference);
                break;
            case TaskKind::Segmentation: {
                m["miou"] = miou(generated, reference, category_colors);
                double per = 0.0;
                for (const auto& entry : category_colors) {
                    per += miou(generated, reference, {entry});
                }
                m["miou_per_category"] = category_colors.empty() ? 1.0 : per / category_colors.size();
                break;
            }
            default:
                break;
        }
    }
    return m;
}

void ReportBuilder::add(const TaskDirection& td, const std::map<std::string, double>& metrics) {
    const std::string key = std::string(to_string(td.task)) + ":" + std::string(to_string(td.direction));
    auto& sums = sums_[key];
    for (const auto& [name, value] : metrics) {
        sums[name] += value;
    }
    report_.tasks[key].pairs += 1;
}

MetricReport ReportBuilder::finish() const {
    MetricReport r = report_;
    for (auto& [key, tm] : r.tasks) {
        const auto& sums = sums_.at(key);
        const double n = static_cast<double>(tm.pairs);
        for (const auto& [name, total] : sums) {
            tm.values[name] = total / n;
        }
        if (const auto it = tm.values.find("mse"); it != tm.values.end()) {
            tm.values["psnr"] = psnr_from_mse(it->second);
        }
    }
    return r;
}

namespace {

constexpr const char* kUnavailable[] = {"clip_score", "fid", "is", "lpips", "dino"};

struct Column {
    const char* key;
    const char* title;
};
constexpr Column kColumns[] = {{"f1", "F1"},
                               {"ssim", "SSIM"},
                               {"psnr", "PSNR"},
                               {"rmse", "RMSE"},
                               {"mean_angle_error", "MeanAngle"},
                               {"miou", "mIoU"},
                               {"miou_per_category", "mIoU*"}};

std::string fmt(double v) {
    if (std::isinf(v)) {
        return "inf";
    }
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return buf;
}

}  // namespace

std::string MetricReport::to_json() const {
    nlohmann::ordered_json j;
    j["protocol"] = protocol;
    nlohmann::ordered_json tasks_json = nlohmann::ordered_json::object();
    for (const auto& [key, tm] : tasks) {
        nlohmann::ordered_json t;
        t["pairs"] = tm.pairs;
        nlohmann::ordered_json vals = nlohmann::ordered_json::object();
        for (const auto& [name, v] : tm.values) {
            if (std::isinf(v)) {
                vals[name] = "inf";
            } else {
                vals[name] = v;
            }
        }
        for (const char* name : kUnavailable) {
            vals[name] = "n/a";
        }
        t["metrics"] = vals;
        tasks_json[key] = t;
    }
    j["tasks"] = tasks_json;
    j["notes"] = {{"miou_per_category", "one category per pass; reference only"},
                  {"n/a", "learned-feature metrics are not computed"}};
    return j.dump(2);
}

std::string MetricReport::to_table() const {
    std::ostringstream os;
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%-26s %6s", "task", "pairs");
    os << "protocol: " << protocol << '\n' << buf;
    for (const auto& c : kColumns) {
        std::snprintf(buf, sizeof(buf), " %10s", c.title);
        os << buf;
    }
    for (const char* c : {"CLIP", "FID", "LPIPS"}) {
        std::snprintf(buf, sizeof(buf), " %6s", c);
        os << buf;
    }
    os << '\n';
    for (const auto& [key, tm] : tasks) {
        std::snprintf(buf, sizeof(buf), "%-26s %6zu", key.c_str(), tm.pairs);
        os << buf;
        for (const auto& c : kColumns) {
            const auto it = tm.values.find(c.key);
            std::snprintf(buf, sizeof(buf), " %10s", it == tm.values.end() ? "-" : fmt(it->second).c_str());
            os << buf;
        }
        for (int i = 0; i < 3; ++i) {
            std::snprintf(buf, sizeof(buf), " %6s", "n/a");
            os << buf;
        }
        os << '\n';
    }
    return os.str();
}

}  // namespace exvis
