// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <string>
#include <vector>

#include "exvis/image.hpp"
#include "exvis/model.hpp"
#include "exvis/sampler.hpp"
#include "exvis/task.hpp"

namespace exvis {

// All pairwise metrics throw DimensionError when the images differ in size.

/// F1 over white pixels (luminance >= 128). Both maps empty gives 1.
double edge_f1(const Image& pred, const Image& ref);

/// Mean SSIM over non-overlapping 8x8 luminance windows, population statistics,
/// C1 = (0.01 * 255)^2, C2 = (0.03 * 255)^2. Throws DimensionError below 8x8.
double ssim(const Image& a, const Image& b);

/// Mean squared error over every channel value.
double mse(const Image& a, const Image& b);
/// 10 log10(255^2 / mse); +infinity for identical images.
double psnr(const Image& a, const Image& b);
double psnr_from_mse(double mse);

/// RMSE in meters after decoding luminance with the depth convention.
double rmse_depth(const Image& pred, const Image& ref);

/// Mean over categories present in `ref` of the IoU between exact-color masks.
/// Returns 1 when no category color occurs in `ref`.
double miou(const Image& pred, const Image& ref, const std::map<std::string, Rgb>& category_colors);

/// Mean per-pixel angle, in degrees, between decoded unit normals.
double mean_angle_error(const Image& pred, const Image& ref);

// ---- instruction-embedding diagnostic ----------------------------------------

/// Hashed (FNV-1a) bag-of-words term frequencies of the lowercased alphanumeric words.
Vec embed_instruction(std::string_view text, int dim = 256);

struct PcaResult {
    Mat points;      // n x dims
    Mat components;  // dims x features, unit rows, largest-magnitude entry positive
    Vec variance;    // per component, descending
    bool degenerate{false};
};

/// Centers rows of x and projects onto the top principal directions found by
/// power iteration with deflation. Throws DimensionError for fewer than 2 rows.
PcaResult pca_points(const Mat& x, int dims = 2, double tol = 1e-9, int max_iter = 10000);
PcaResult pca_project(const std::vector<std::string>& instructions, int dims = 2);

// ---- reports -----------------------------------------------------------------

/// Metric values of one generated/reference pair, keyed by metric name.
/// `category_colors` feeds mIoU for segmentation.
std::map<std::string, double> pair_metrics(TaskKind task, Direction dir, const Image& generated,
                                           const Image& reference,
                                           const std::map<std::string, Rgb>& category_colors = {});

struct TaskMetrics {
    std::size_t pairs{0};
    std::map<std::string, double> values;
};

struct MetricReport {
    std::string protocol;
    std::map<std::string, TaskMetrics> tasks;  // keyed "task:fwd" / "task:inv"

    std::string to_json() const;
    std::string to_table() const;
};

/// Accumulates per-pair metrics into per-task means. PSNR aggregates through
/// the mean MSE so identical pairs do not swamp the average.
class ReportBuilder {
public:
    explicit ReportBuilder(std::string protocol) { report_.protocol = std::move(protocol); }
    void add(const TaskDirection& td, const std::map<std::string, double>& metrics);
    MetricReport finish() const;

private:
    MetricReport report_;
    std::map<std::string, std::map<std::string, double>> sums_;
};

}  // namespace exvis
