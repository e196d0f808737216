#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "mitonet/volume.hpp"

namespace mito {

struct ConfusionCounts {
  std::int64_t tp = 0, fp = 0, fn = 0, tn = 0;

  std::int64_t total() const { return tp + fp + fn + tn; }
  ConfusionCounts& operator+=(const ConfusionCounts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    tn += o.tn;
    return *this;
  }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

/// Voxel counts over the whole volume; both inputs must be binary.
ConfusionCounts confusion(const LabelVolume& pred, const LabelVolume& truth);

/// TP / (TP + FP + FN); 1 when neither volume has foreground.
double fg_iou(const ConfusionCounts& c);
/// TN / (TN + FP + FN); 1 when neither volume has background.
double bg_iou(const ConfusionCounts& c);
/// Mean of foreground and background IoU.
double overall_iou(const ConfusionCounts& c);
double accuracy(const ConfusionCounts& c);
/// TP / (TP + FP); 1 when nothing is predicted foreground.
double precision(const ConfusionCounts& c);
/// TP / (TP + FN); 1 when the truth has no foreground.
double recall(const ConfusionCounts& c);

/// Lower bound on foreground IoU implied by an overall IoU, using
/// background IoU <= 1.
double fg_iou_lower_bound(double overall);

struct PrPoint {
  double threshold;
  double precision;
  double recall;
};

struct PrCurve {
  std::vector<PrPoint> points;  // ordered by decreasing threshold
  std::optional<double> auc;    // empty when the truth holds a single class
};

/// Precision/recall with foreground predicted where probability >= t.
std::vector<PrPoint> pr_points(const PredictionVolume& probs, const LabelVolume& truth,
                               std::span<const double> thresholds);

/// `n` thresholds evenly spaced over [0, 1]; AUC by the trapezoidal rule
/// over recall, starting from (recall 0, precision 1).
PrCurve pr_curve(const PredictionVolume& probs, const LabelVolume& truth, int n = 256);

struct EvalReport {
  double accuracy = 0, precision = 0, recall = 0;
  std::optional<double> pr_auc;
  double fg_iou = 0, bg_iou = 0, overall_iou = 0;
  double threshold = 0.5;
  ConfusionCounts counts;

  std::string to_text() const;
  nlohmann::json to_json() const;
};

/// Keys of the report, in emission order.
const std::vector<std::string>& eval_report_keys();

EvalReport make_report(const ConfusionCounts& counts, std::optional<double> pr_auc, double threshold);

/// Volume-level evaluation: thresholds `probs` at `t` unless a binary
/// prediction is supplied (e.g. after z-filtering).
EvalReport evaluate(const PredictionVolume& probs, const LabelVolume& truth, double t, int pr_thresholds = 256,
                    const LabelVolume* binary = nullptr);

}  // namespace mito
