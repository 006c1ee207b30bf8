#pragma once

// Point matching under a pixel-distance threshold and the localization /
// counting metric suite (precision, recall, F1, interpolated AP, AR, MAE,
// RMSE).

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "zsol/grid.hpp"

namespace zsol {

/// Minimum-cost assignment for a rows x cols cost matrix (row-major) with
/// rows <= cols. Returns the column assigned to each row.
std::vector<std::size_t> min_cost_assignment(std::span<const double> cost, std::size_t rows,
                                             std::size_t cols);

struct MatchPair {
    std::size_t pred = 0;
    std::size_t gt = 0;
    double distance = 0.0;
};

struct MatchResult {
    std::vector<MatchPair> pairs;  ///< assignments within sigma
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    double sigma = 0.0;
    double assignment_cost = 0.0;  ///< total distance of the full assignment before filtering

    /// tp / (tp + fp), or 0 with no predictions.
    double precision() const;
    /// tp / (tp + fn), or 0 with no ground truth.
    double recall() const;
};

/// Optimal one-to-one assignment on Euclidean distance, then pairs farther
/// than sigma are discarded; the survivors are the true positives.
MatchResult match_points(const PointSet& pred, const PointSet& gt, double sigma);

/// 2PR / (P + R), 0 when P + R = 0.
double f1_score(double precision, double recall);
double f1_score(const MatchResult& m);

struct ImageDetections {
    const PointSet* pred = nullptr;
    const PointSet* gt = nullptr;
};

/// 101-point interpolated AP. Predictions from all images are ranked by
/// confidence (ties: image order, then row-major position) and each is
/// greedily matched to the nearest unmatched ground-truth point of its image
/// within sigma. P_interp(r) = max precision at recall >= r, averaged over
/// r in {0, 0.01, ..., 1}. Throws std::invalid_argument if any prediction set
/// lacks confidences.
double average_precision(std::span<const ImageDetections> images, double sigma);
double average_precision(const PointSet& pred, const PointSet& gt, double sigma);

/// Mean recall over groups. Throws std::invalid_argument on an empty span.
double average_recall(std::span<const MatchResult> groups);

struct CountingErrors {
    double mae = 0.0;
    double rmse = 0.0;  ///< reported as "MSE" in table output
};

/// Each entry is (predicted count, ground-truth count).
CountingErrors counting_errors(std::span<const std::pair<std::size_t, std::size_t>> counts);

/// sqrt((w^2 + h^2) / 2).
double sigma_from_image(double width, double height);

struct ThresholdPreset {
    std::string name;
    double sigma_s = 0.0;
    double sigma_l = 0.0;
};

/// fsc147, carpk: (5, 10); shtechA, shtechB: (4, 8).
const std::vector<ThresholdPreset>& threshold_presets();
/// Throws std::invalid_argument listing the valid names.
const ThresholdPreset& preset_by_name(std::string_view name);

struct EvalSample {
    std::string id;
    PointSet pred;
    PointSet gt;
    std::optional<std::string> category;
};

struct ThresholdMetrics {
    double sigma = 0.0;
    std::size_t tp = 0, fp = 0, fn = 0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double ap = 0.0;
    double ar = 0.0;                     ///< mean per-image recall
    std::optional<double> ar_category;  ///< mean per-category recall, when labelled
};

struct ImageEval {
    std::string id;
    std::size_t pred_count = 0;
    std::size_t gt_count = 0;
    MatchResult strict;
    MatchResult loose;
};

struct EvalReport {
    std::string preset;
    ThresholdMetrics strict;
    ThresholdMetrics loose;
    CountingErrors counting;
    std::vector<ImageEval> images;
};

/// Precision/recall/F1 pool tp/fp/fn over all images. AR skips images (or
/// categories) without ground truth. Requires at least one sample.
EvalReport evaluate(std::span<const EvalSample> samples, const ThresholdPreset& preset);

/// One header row plus one summary row.
std::string report_summary_csv(const EvalReport& r);
/// Header plus one row per image.
std::string report_images_csv(const EvalReport& r);
/// Aligned text table with metrics as percentages.
std::string report_table(const EvalReport& r);

}  // namespace zsol
