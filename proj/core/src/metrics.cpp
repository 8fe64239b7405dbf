#include "blastmamba/metrics.hpp"

#include <algorithm>
#include <cstdio>

#include "blastmamba/error.hpp"
#include "blastmamba/ops.hpp"

namespace bm::metrics {

ConfusionMatrix::ConfusionMatrix(std::size_t classes) : classes_(classes), counts_(classes * classes, 0) {
  if (classes < 2) throw ConfigError("confusion matrix needs at least two classes");
}

void ConfusionMatrix::add(std::int32_t truth, std::int32_t pred, std::uint64_t n) {
  const auto k = static_cast<std::int32_t>(classes_);
  if (truth < 0 || truth >= k || pred < 0 || pred >= k) {
    throw ConfigError("class index outside [0, " + std::to_string(classes_) + ")");
  }
  counts_[static_cast<std::size_t>(truth) * classes_ + static_cast<std::size_t>(pred)] += n;
}

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t s = 0;
  for (auto v : counts_) s += v;
  return s;
}

std::uint64_t ConfusionMatrix::false_positives(std::size_t c) const {
  std::uint64_t s = 0;
  for (std::size_t t = 0; t < classes_; ++t) {
    if (t != c) s += at(t, c);
  }
  return s;
}

std::uint64_t ConfusionMatrix::false_negatives(std::size_t c) const {
  std::uint64_t s = 0;
  for (std::size_t p = 0; p < classes_; ++p) {
    if (p != c) s += at(c, p);
  }
  return s;
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
  if (other.classes_ != classes_) throw ShapeError("confusion matrices have different class counts");
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
  return *this;
}

double f1_from_counts(std::uint64_t tp, std::uint64_t fp, std::uint64_t fn) {
  const double denom = 2.0 * static_cast<double>(tp) + static_cast<double>(fp) + static_cast<double>(fn);
  if (denom == 0.0) return 0.0;
  return 100.0 * 2.0 * static_cast<double>(tp) / denom;
}

double f1_loc(std::span<const std::int32_t> pred, std::span<const std::int32_t> truth) {
  if (pred.size() != truth.size()) throw ShapeError("f1_loc: prediction and truth sizes differ");
  std::uint64_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool p = pred[i] != 0, t = truth[i] != 0;
    tp += p && t;
    fp += p && !t;
    fn += !p && t;
  }
  return f1_from_counts(tp, fp, fn);
}

std::vector<double> per_class_f1(const ConfusionMatrix& cm) {
  std::vector<double> out;
  for (std::size_t c = 1; c < cm.classes(); ++c) {
    out.push_back(f1_from_counts(cm.true_positives(c), cm.false_positives(c), cm.false_negatives(c)));
  }
  return out;
}

double harmonic_mean_f1(std::span<const double> per_class) {
  if (per_class.empty()) throw ConfigError("f1_clf: no damage classes");
  double inv = 0.0;
  for (double f : per_class) inv += 1.0 / std::max(f, kF1Floor);
  return static_cast<double>(per_class.size()) / inv;
}

double f1_clf(const ConfusionMatrix& cm) { return harmonic_mean_f1(per_class_f1(cm)); }

double f1_overall(double loc, double clf) { return kLocWeight * loc + kClfWeight * clf; }

std::string MetricsReport::to_json() const {
  if (per_class.size() != 3) throw ConfigError("metrics report expects three damage classes");
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "{\n  \"f1_loc\": %.2f,\n  \"f1_clf\": %.2f,\n  \"f1_overall\": %.2f,\n"
                "  \"f1_intact\": %.2f,\n  \"f1_damaged\": %.2f,\n  \"f1_destroyed\": %.2f\n}\n",
                f1_loc, f1_clf, f1_overall, per_class[0], per_class[1], per_class[2]);
  return buf;
}

Evaluator::Evaluator(std::size_t damage_classes) : loc_(2), clf_(damage_classes) {}

void Evaluator::add_scene(std::span<const std::int32_t> pred, std::span<const std::int32_t> truth) {
  if (pred.size() != truth.size()) throw ShapeError("evaluate: prediction and truth sizes differ");
  for (std::size_t i = 0; i < pred.size(); ++i) {
    loc_.add(truth[i] != 0, pred[i] != 0);
    if (truth[i] != 0) clf_.add(truth[i], pred[i]);
  }
  ++scenes_;
}

MetricsReport Evaluator::report() const {
  if (scenes_ == 0) throw DataError("evaluate: no scenes");
  MetricsReport r;
  r.f1_loc = f1_from_counts(loc_.true_positives(1), loc_.false_positives(1), loc_.false_negatives(1));
  r.per_class = per_class_f1(clf_);
  r.f1_clf = harmonic_mean_f1(r.per_class);
  r.f1_overall = f1_overall(r.f1_loc, r.f1_clf);
  return r;
}

Tensor multitask_loss(Tape& tape, const Tensor& mask_logits, std::span<const std::int32_t> mask_labels,
                      const Tensor& damage_logits, std::span<const std::int32_t> damage_labels) {
  if (mask_logits.rank() != 3 || damage_logits.rank() != 3) throw ShapeError("multitask_loss: logits must be H x W x K");
  const std::size_t hw = mask_logits.dim(0) * mask_logits.dim(1);
  const auto m = ops::reshape(tape, mask_logits, {hw, mask_logits.dim(2)});
  const auto d = ops::reshape(tape, damage_logits, {damage_logits.dim(0) * damage_logits.dim(1), damage_logits.dim(2)});
  return ops::add(tape, ops::softmax_cross_entropy(tape, m, mask_labels),
                  ops::softmax_cross_entropy(tape, d, damage_labels));
}

}  // namespace bm::metrics
