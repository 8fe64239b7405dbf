#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>

#include "blastmamba/error.hpp"
#include "blastmamba/metrics.hpp"
#include "blastmamba/rng.hpp"

using namespace bm;
using namespace bm::metrics;

namespace {

struct PublishedRow {
  const char* name;
  double loc, clf, overall, intact, damaged, destroyed;
};

// Published comparison rows: F1 loc, clf, overall, then per-class F1.
constexpr PublishedRow kRows[] = {
    {"SiamCRNN", 85.66, 71.74, 75.91, 84.90, 51.03, 95.73},
    {"DamFormer", 85.14, 79.54, 81.22, 87.03, 63.18, 96.16},
    {"MambaBDASmall", 87.25, 78.24, 80.94, 90.83, 58.76, 96.90},
    {"Ours", 88.98, 88.30, 88.50, 93.54, 77.96, 95.64},
};

void PrintTo(const PublishedRow& r, std::ostream* os) { *os << r.name; }

std::vector<std::int32_t> random_labels(Rng& rng, std::size_t n, std::uint64_t classes) {
  std::vector<std::int32_t> v(n);
  for (auto& x : v) x = static_cast<std::int32_t>(rng.below(classes));
  return v;
}

}  // namespace

TEST(F1, FromCounts) {
  EXPECT_EQ(f1_from_counts(10, 0, 0), 100.0);
  EXPECT_EQ(f1_from_counts(1, 1, 1), 50.0);
  EXPECT_EQ(f1_from_counts(0, 5, 7), 0.0);
  EXPECT_EQ(f1_from_counts(0, 0, 0), 0.0);
}

TEST(F1, Localization) {
  const std::vector<std::int32_t> truth{1, 1, 0, 0};
  EXPECT_NEAR(f1_loc(std::vector<std::int32_t>{1, 0, 0, 0}, truth), 200.0 / 3.0, 1e-12);
  EXPECT_EQ(f1_loc(truth, truth), 100.0);
  EXPECT_EQ(f1_loc(std::vector<std::int32_t>{0, 0, 0, 0}, truth), 0.0);
  // Any nonzero damage class counts as building.
  EXPECT_EQ(f1_loc(std::vector<std::int32_t>{3, 2, 0, 0}, truth), 100.0);
  EXPECT_THROW(f1_loc(std::vector<std::int32_t>{1}, truth), ShapeError);
}

TEST(F1, HarmonicMeanOfEqualsIsIdentity) {
  for (double v : {0.5, 42.0, 100.0}) {
    const std::vector<double> pc{v, v, v};
    EXPECT_NEAR(harmonic_mean_f1(pc), v, 1e-12);
  }
  EXPECT_THROW(harmonic_mean_f1(std::vector<double>{}), ConfigError);
}

TEST(F1, ZeroClassIsFloored) {
  const std::vector<double> pc{90, 0, 90};
  const double h = harmonic_mean_f1(pc);
  EXPECT_GT(h, 0.0);
  EXPECT_LT(h, 1e-5);
}

TEST(F1, OverallBlend) {
  EXPECT_EQ(f1_overall(100, 100), 100.0);
  EXPECT_NEAR(f1_overall(88.98, 88.30), 88.50, 0.01);
  EXPECT_NEAR(f1_overall(85.14, 79.54), 81.22, 0.01);
}

class PublishedTable : public ::testing::TestWithParam<PublishedRow> {};

TEST_P(PublishedTable, RowArithmeticReproduces) {
  const auto& r = GetParam();
  const std::vector<double> pc{r.intact, r.damaged, r.destroyed};
  EXPECT_NEAR(harmonic_mean_f1(pc), r.clf, 0.01) << r.name;
  EXPECT_NEAR(f1_overall(r.loc, r.clf), r.overall, 0.01) << r.name;
}

INSTANTIATE_TEST_SUITE_P(Rows, PublishedTable, ::testing::ValuesIn(kRows),
                         [](const auto& info) { return std::string(info.param.name); });

TEST(Confusion, CountsAndErrors) {
  ConfusionMatrix cm(4);
  cm.add(1, 1, 3);
  cm.add(1, 2);
  cm.add(2, 1, 2);
  EXPECT_EQ(cm.total(), 6u);
  EXPECT_EQ(cm.true_positives(1), 3u);
  EXPECT_EQ(cm.false_positives(1), 2u);
  EXPECT_EQ(cm.false_negatives(1), 1u);
  EXPECT_THROW(cm.add(4, 0), ConfigError);
  EXPECT_THROW(cm.add(-1, 0), ConfigError);
  EXPECT_THROW(ConfusionMatrix(1), ConfigError);
  ConfusionMatrix other(3);
  EXPECT_THROW(cm += other, ShapeError);
}

TEST(Evaluator, PerfectPredictionScoresHundred) {
  Rng rng(1);
  const auto truth = random_labels(rng, 256, 4);
  Evaluator ev(4);
  ev.add_scene(truth, truth);
  const auto r = ev.report();
  EXPECT_EQ(r.f1_loc, 100.0);
  EXPECT_NEAR(r.f1_clf, 100.0, 1e-12);
  EXPECT_NEAR(r.f1_overall, 100.0, 1e-12);
}

TEST(Evaluator, AllBackgroundScoresZero) {
  Rng rng(2);
  const auto truth = random_labels(rng, 256, 4);
  Evaluator ev(4);
  ev.add_scene(std::vector<std::int32_t>(truth.size(), 0), truth);
  const auto r = ev.report();
  EXPECT_EQ(r.f1_loc, 0.0);
  EXPECT_LT(r.f1_clf, 1e-5);
  EXPECT_LT(r.f1_overall, 1e-5);
}

TEST(Evaluator, ClassificationOnlyInsideTrueFootprints) {
  // A false positive on background hurts loc but not clf.
  const std::vector<std::int32_t> truth{0, 1, 2, 3}, pred{3, 1, 2, 3};
  Evaluator ev(4);
  ev.add_scene(pred, truth);
  const auto r = ev.report();
  EXPECT_LT(r.f1_loc, 100.0);
  EXPECT_NEAR(r.f1_clf, 100.0, 1e-12);
  EXPECT_EQ(ev.clf().total(), 3u);
  EXPECT_EQ(ev.loc().total(), 4u);
}

TEST(Evaluator, AccumulationIsAdditiveAndOrderFree) {
  Rng rng(3);
  std::vector<std::vector<std::int32_t>> preds, truths;
  for (int i = 0; i < 4; ++i) {
    preds.push_back(random_labels(rng, 100, 4));
    truths.push_back(random_labels(rng, 100, 4));
  }
  Evaluator a(4), b(4), cat(4);
  std::vector<std::int32_t> all_p, all_t;
  for (int i = 0; i < 4; ++i) {
    a.add_scene(preds[i], truths[i]);
    b.add_scene(preds[3 - i], truths[3 - i]);
    all_p.insert(all_p.end(), preds[i].begin(), preds[i].end());
    all_t.insert(all_t.end(), truths[i].begin(), truths[i].end());
  }
  cat.add_scene(all_p, all_t);
  EXPECT_EQ(a.clf(), b.clf());
  EXPECT_EQ(a.clf(), cat.clf());
  EXPECT_EQ(a.loc(), cat.loc());
  EXPECT_EQ(a.report().to_json(), b.report().to_json());
  EXPECT_EQ(a.report().to_json(), cat.report().to_json());
}

TEST(Evaluator, EmptyThrows) { EXPECT_THROW(Evaluator(4).report(), DataError); }

TEST(Report, JsonHasFixedKeysAndTwoDecimals) {
  MetricsReport r;
  r.f1_loc = 88.984;
  r.f1_clf = 88.3;
  r.f1_overall = f1_overall(r.f1_loc, r.f1_clf);
  r.per_class = {93.54, 77.96, 95.645};
  const auto text = r.to_json();
  const auto j = nlohmann::json::parse(text);
  EXPECT_EQ(j.size(), 6u);
  for (const char* k : {"f1_loc", "f1_clf", "f1_overall", "f1_intact", "f1_damaged", "f1_destroyed"})
    EXPECT_TRUE(j.contains(k)) << k;
  EXPECT_NE(text.find("\"f1_loc\": 88.98,"), std::string::npos);
  EXPECT_NE(text.find("\"f1_clf\": 88.30,"), std::string::npos);
}

TEST(Loss, UniformLogits) {
  Tape tape;
  const std::vector<std::int32_t> mask{0, 1, 1, 0}, damage{0, 1, 2, 3};
  const auto loss = multitask_loss(tape, Tensor::zeros({2, 2, 2}), mask, Tensor::zeros({2, 2, 4}), damage);
  EXPECT_NEAR(loss.item(), std::log(2.0) + std::log(4.0), 1e-12);
  EXPECT_NEAR(loss.item(), 2.0794, 1e-4);
}

TEST(Loss, SaturatedPerfectApproachesZero) {
  const std::vector<std::int32_t> mask{0, 1}, damage{0, 2};
  auto m = Tensor::zeros({1, 2, 2}), d = Tensor::zeros({1, 2, 4});
  m.mutable_data()[0] = 50;
  m.mutable_data()[3] = 50;
  d.mutable_data()[0] = 50;
  d.mutable_data()[6] = 50;
  Tape tape;
  const double l = multitask_loss(tape, m, mask, d, damage).item();
  EXPECT_GE(l, 0.0);
  EXPECT_LT(l, 1e-15);
}

TEST(Loss, GradientsSplitBetweenHeads) {
  const std::vector<std::int32_t> mask{0, 1, 1, 0}, damage{0, 1, 2, 3};
  auto grad_of_mask = [&](double damage_scale) {
    auto m = Tensor::zeros({2, 2, 2}, true);
    auto d = Tensor::zeros({2, 2, 4}, true);
    for (auto& v : m.mutable_data()) v = 0.3;
    for (std::size_t i = 0; i < d.numel(); ++i) d.mutable_data()[i] = damage_scale * static_cast<double>(i);
    Tape tape;
    backward(tape, multitask_loss(tape, m, mask, d, damage));
    return std::vector<double>(m.grad().begin(), m.grad().end());
  };
  EXPECT_EQ(grad_of_mask(0.0), grad_of_mask(1.7));
}

TEST(Loss, OutOfRangeLabelThrows) {
  Tape tape;
  const std::vector<std::int32_t> mask{0, 2}, damage{0, 1};
  EXPECT_ANY_THROW(multitask_loss(tape, Tensor::zeros({1, 2, 2}), mask, Tensor::zeros({1, 2, 4}), damage));
}
