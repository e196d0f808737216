#include "mitonet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

namespace mito {
namespace {

double ratio_or_one(std::int64_t num, std::int64_t den) {
  return den == 0 ? 1.0 : static_cast<double>(num) / static_cast<double>(den);
}

void require_aligned(const PredictionVolume& probs, const LabelVolume& truth) {
  if (!probs.same_shape(truth))
    fail(ErrorCategory::shape, "prediction " + probs.shape_string() + " vs ground truth " + truth.shape_string());
}

void require_probability(float p) {
  if (!(p >= 0.0f && p <= 1.0f)) fail(ErrorCategory::value, "probability outside [0, 1]");
}

}  // namespace

ConfusionCounts confusion(const LabelVolume& pred, const LabelVolume& truth) {
  if (!pred.same_shape(truth))
    fail(ErrorCategory::shape, "prediction " + pred.shape_string() + " vs ground truth " + truth.shape_string());
  ConfusionCounts c;
  for (std::size_t i = 0; i < pred.data.size(); ++i) {
    const auto p = pred.data[i], t = truth.data[i];
    if (p > 1 || t > 1) fail(ErrorCategory::value, "confusion counts need binary volumes");
    if (p && t)
      ++c.tp;
    else if (p)
      ++c.fp;
    else if (t)
      ++c.fn;
    else
      ++c.tn;
  }
  return c;
}

double fg_iou(const ConfusionCounts& c) { return ratio_or_one(c.tp, c.tp + c.fp + c.fn); }
double bg_iou(const ConfusionCounts& c) { return ratio_or_one(c.tn, c.tn + c.fp + c.fn); }
double overall_iou(const ConfusionCounts& c) { return 0.5 * (fg_iou(c) + bg_iou(c)); }
double accuracy(const ConfusionCounts& c) { return ratio_or_one(c.tp + c.tn, c.total()); }
double precision(const ConfusionCounts& c) { return ratio_or_one(c.tp, c.tp + c.fp); }
double recall(const ConfusionCounts& c) { return ratio_or_one(c.tp, c.tp + c.fn); }

double fg_iou_lower_bound(double overall) {
  if (!(overall >= 0.0 && overall <= 1.0)) fail(ErrorCategory::value, "overall IoU must lie in [0, 1]");
  return 2.0 * overall - 1.0;
}

std::vector<PrPoint> pr_points(const PredictionVolume& probs, const LabelVolume& truth,
                               std::span<const double> thresholds) {
  require_aligned(probs, truth);
  std::vector<PrPoint> out;
  out.reserve(thresholds.size());
  for (double t : thresholds) {
    ConfusionCounts c;
    for (std::size_t i = 0; i < probs.data.size(); ++i) {
      require_probability(probs.data[i]);
      const bool p = probs.data[i] >= t;
      const bool g = truth.data[i] != 0;
      c.tp += p && g;
      c.fp += p && !g;
      c.fn += !p && g;
    }
    out.push_back({t, precision(c), recall(c)});
  }
  return out;
}

PrCurve pr_curve(const PredictionVolume& probs, const LabelVolume& truth, int n) {
  require_aligned(probs, truth);
  if (n < 2) fail(ErrorCategory::value, "PR curve needs at least two thresholds");
  const double steps = n - 1;
  auto thr = [&](int k) { return static_cast<double>(k) / steps; };

  // hist[k]: voxels whose highest passed threshold is t_k.
  std::vector<std::int64_t> fg(static_cast<std::size_t>(n), 0), bg(static_cast<std::size_t>(n), 0);
  std::int64_t total_fg = 0, total_bg = 0;
  for (std::size_t i = 0; i < probs.data.size(); ++i) {
    const double p = probs.data[i];
    require_probability(probs.data[i]);
    int k = std::clamp(static_cast<int>(std::floor(p * steps)), 0, n - 1);
    while (k + 1 < n && p >= thr(k + 1)) ++k;
    while (k > 0 && p < thr(k)) --k;
    if (truth.data[i]) {
      ++fg[static_cast<std::size_t>(k)];
      ++total_fg;
    } else {
      ++bg[static_cast<std::size_t>(k)];
      ++total_bg;
    }
  }

  PrCurve curve;
  std::int64_t tp = 0, fp = 0;
  for (int k = n - 1; k >= 0; --k) {
    tp += fg[static_cast<std::size_t>(k)];
    fp += bg[static_cast<std::size_t>(k)];
    const ConfusionCounts c{tp, fp, total_fg - tp, total_bg - fp};
    curve.points.push_back({thr(k), precision(c), recall(c)});
  }
  if (total_fg == 0 || total_bg == 0) return curve;

  double area = 0.0, prev_r = 0.0, prev_p = 1.0;
  for (const auto& pt : curve.points) {
    area += (pt.recall - prev_r) * 0.5 * (pt.precision + prev_p);
    prev_r = pt.recall;
    prev_p = pt.precision;
  }
  curve.auc = area;
  return curve;
}

const std::vector<std::string>& eval_report_keys() {
  static const std::vector<std::string> keys{"accuracy", "precision", "recall",      "pr_auc",
                                             "fg_iou",   "bg_iou",    "overall_iou", "threshold"};
  return keys;
}

EvalReport make_report(const ConfusionCounts& counts, std::optional<double> pr_auc, double threshold) {
  EvalReport r;
  r.counts = counts;
  r.accuracy = accuracy(counts);
  r.precision = precision(counts);
  r.recall = recall(counts);
  r.pr_auc = pr_auc;
  r.fg_iou = fg_iou(counts);
  r.bg_iou = bg_iou(counts);
  r.overall_iou = overall_iou(counts);
  r.threshold = threshold;
  return r;
}

EvalReport evaluate(const PredictionVolume& probs, const LabelVolume& truth, double t, int pr_thresholds,
                    const LabelVolume* binary) {
  require_aligned(probs, truth);
  const auto counts = binary ? confusion(*binary, truth) : confusion(threshold(probs, t), truth);
  return make_report(counts, pr_curve(probs, truth, pr_thresholds).auc, t);
}

std::string EvalReport::to_text() const {
  std::ostringstream os;
  os << std::setprecision(6) << std::fixed;
  os << "accuracy " << accuracy << '\n';
  os << "precision " << precision << '\n';
  os << "recall " << recall << '\n';
  os << "pr_auc ";
  if (pr_auc)
    os << *pr_auc << '\n';
  else
    os << "undefined\n";
  os << "fg_iou " << fg_iou << '\n';
  os << "bg_iou " << bg_iou << '\n';
  os << "overall_iou " << overall_iou << '\n';
  os << "threshold " << threshold << '\n';
  return os.str();
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json j;
  j["accuracy"] = accuracy;
  j["precision"] = precision;
  j["recall"] = recall;
  j["pr_auc"] = pr_auc ? nlohmann::json(*pr_auc) : nlohmann::json(nullptr);
  j["fg_iou"] = fg_iou;
  j["bg_iou"] = bg_iou;
  j["overall_iou"] = overall_iou;
  j["threshold"] = threshold;
  return j;
}

}  // namespace mito
