#include <gtest/gtest.h>

#include <cmath>

#include "mitonet/metrics.hpp"
#include "oracles.hpp"

using namespace mito;

namespace {

ConfusionCounts counts(std::int64_t tp, std::int64_t fp, std::int64_t fn, std::int64_t tn) {
  ConfusionCounts c;
  c.tp = tp;
  c.fp = fp;
  c.fn = fn;
  c.tn = tn;
  return c;
}

LabelVolume labels(std::vector<std::uint8_t> v) {
  LabelVolume out(1, 1, static_cast<int>(v.size()));
  out.data = std::move(v);
  return out;
}

PredictionVolume probs(std::vector<float> v) {
  PredictionVolume out(1, 1, static_cast<int>(v.size()));
  out.data = std::move(v);
  return out;
}

}  // namespace

TEST(Confusion, MatchesBruteForce) {
  Rng rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    LabelVolume p(2, 3, 1 + static_cast<int>(rng.below(6))), t(p.depth, p.height, p.width);
    for (auto& v : p.data) v = rng.bernoulli(0.3);
    for (auto& v : t.data) v = rng.bernoulli(0.5);
    const auto c = confusion(p, t);
    const auto o = oracle::count(p, t);
    ASSERT_EQ(c.tp, o.tp);
    ASSERT_EQ(c.fp, o.fp);
    ASSERT_EQ(c.fn, o.fn);
    ASSERT_EQ(c.tn, o.tn);
  }
}

TEST(Confusion, RejectsMismatchAndNonBinary) {
  EXPECT_THROW((void)confusion(LabelVolume(1, 2, 2), LabelVolume(1, 2, 3)), Error);
  auto p = labels({0, 2});
  EXPECT_THROW((void)confusion(p, labels({0, 1})), Error);
}

TEST(Scores, OverallIouWorkedExample) {
  const auto c = counts(7, 1, 1, 91);
  EXPECT_NEAR(fg_iou(c), 7.0 / 9.0, 1e-12);
  EXPECT_NEAR(bg_iou(c), 91.0 / 93.0, 1e-12);
  EXPECT_NEAR(overall_iou(c), (7.0 / 9.0 + 91.0 / 93.0) / 2.0, 1e-12);
  EXPECT_NEAR(overall_iou(c), 0.87814, 5e-6);
  EXPECT_NEAR(accuracy(c), 0.98, 1e-12);
}

TEST(Scores, LowerBoundFromOverallIou) {
  EXPECT_NEAR(fg_iou_lower_bound(0.948), 0.896, 1e-12);
  EXPECT_NEAR(fg_iou_lower_bound(0.800), 0.600, 1e-12);
}

TEST(Scores, EmptyConventions) {
  const auto none = counts(0, 0, 0, 50);
  EXPECT_EQ(fg_iou(none), 1.0);
  EXPECT_EQ(precision(none), 1.0);
  EXPECT_EQ(recall(none), 1.0);
  const auto missed = counts(0, 0, 5, 45);
  EXPECT_EQ(fg_iou(missed), 0.0);
  EXPECT_EQ(precision(missed), 1.0);
  EXPECT_EQ(recall(missed), 0.0);
}

TEST(PrCurve, HandComputedPoints) {
  const auto p = probs({0.9f, 0.6f, 0.2f});
  const auto t = labels({1, 1, 0});
  const std::vector<double> th{0.1, 0.5, 0.8};
  const auto pts = pr_points(p, t, th);
  ASSERT_EQ(pts.size(), 3u);
  EXPECT_NEAR(pts[0].precision, 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(pts[0].recall, 1.0, 1e-12);
  EXPECT_NEAR(pts[1].precision, 1.0, 1e-12);
  EXPECT_NEAR(pts[1].recall, 1.0, 1e-12);
  EXPECT_NEAR(pts[2].precision, 1.0, 1e-12);
  EXPECT_NEAR(pts[2].recall, 0.5, 1e-12);
}

TEST(PrCurve, PerfectSeparationHasUnitArea) {
  const auto c = pr_curve(probs({0.95f, 0.8f, 0.1f, 0.05f}), labels({1, 1, 0, 0}));
  ASSERT_TRUE(c.auc.has_value());
  EXPECT_NEAR(*c.auc, 1.0, 1e-12);
  for (std::size_t i = 1; i < c.points.size(); ++i) {
    EXPECT_LT(c.points[i].threshold, c.points[i - 1].threshold);
    EXPECT_GE(c.points[i].recall, c.points[i - 1].recall);
  }
}

TEST(PrCurve, UndefinedForSingleClassTruth) {
  EXPECT_FALSE(pr_curve(probs({0.2f, 0.7f}), labels({0, 0})).auc.has_value());
  EXPECT_FALSE(pr_curve(probs({0.2f, 0.7f}), labels({1, 1})).auc.has_value());
}

TEST(PrCurve, HistogramMatchesDirectThresholding) {
  Rng rng(4);
  PredictionVolume p(2, 8, 8);
  LabelVolume t(2, 8, 8);
  for (std::size_t i = 0; i < p.data.size(); ++i) {
    t.data[i] = rng.bernoulli(0.4);
    p.data[i] = static_cast<float>(std::clamp(0.3 * t.data[i] + rng.uniform() * 0.7, 0.0, 1.0));
  }
  const auto c = pr_curve(p, t, 11);
  std::vector<double> th;
  for (const auto& pt : c.points) th.push_back(pt.threshold);
  const auto direct = pr_points(p, t, th);
  for (std::size_t i = 0; i < th.size(); ++i) {
    EXPECT_NEAR(c.points[i].precision, direct[i].precision, 1e-12);
    EXPECT_NEAR(c.points[i].recall, direct[i].recall, 1e-12);
  }
}

TEST(Report, KeysAreExactlyTheContractualSet) {
  const std::vector<std::string> expected{"accuracy", "precision", "recall", "pr_auc",
                                          "fg_iou", "bg_iou", "overall_iou", "threshold"};
  EXPECT_EQ(eval_report_keys(), expected);
  const auto r = evaluate(probs({0.9f, 0.1f}), labels({1, 0}), 0.5);
  const auto j = r.to_json();
  EXPECT_EQ(j.size(), expected.size());
  for (const auto& k : expected) EXPECT_TRUE(j.contains(k)) << k;
  EXPECT_NE(r.to_text().find("threshold 0.5"), std::string::npos);
}

TEST(Report, PerfectPredictionScoresOne) {
  const auto t = labels({1, 0, 0, 1, 1});
  const auto r = evaluate(probs({1.f, 0.f, 0.f, 1.f, 1.f}), t, 0.5);
  EXPECT_EQ(r.accuracy, 1.0);
  EXPECT_EQ(r.precision, 1.0);
  EXPECT_EQ(r.recall, 1.0);
  EXPECT_EQ(r.fg_iou, 1.0);
  EXPECT_EQ(r.bg_iou, 1.0);
  EXPECT_EQ(r.overall_iou, 1.0);
  EXPECT_NEAR(*r.pr_auc, 1.0, 1e-12);
}

TEST(Report, UsesSuppliedBinaryPrediction) {
  const auto t = labels({1, 0});
  const auto bin = labels({0, 0});
  const auto r = evaluate(probs({0.9f, 0.1f}), t, 0.5, 256, &bin);
  EXPECT_EQ(r.recall, 0.0);
  EXPECT_TRUE(r.pr_auc.has_value());
}
