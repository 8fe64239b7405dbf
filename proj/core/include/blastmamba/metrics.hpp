#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "blastmamba/tensor.hpp"

namespace bm::metrics {

/// Floor applied to a zero per-class F1 before the harmonic mean.
inline constexpr double kF1Floor = 1e-6;
inline constexpr double kLocWeight = 0.3;
inline constexpr double kClfWeight = 0.7;

/// Rows are truth, columns prediction. Class 0 is background.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t classes);

  void add(std::int32_t truth, std::int32_t pred, std::uint64_t n = 1);
  std::uint64_t at(std::size_t truth, std::size_t pred) const { return counts_[truth * classes_ + pred]; }
  std::size_t classes() const { return classes_; }
  std::uint64_t total() const;

  std::uint64_t true_positives(std::size_t c) const { return at(c, c); }
  std::uint64_t false_positives(std::size_t c) const;
  std::uint64_t false_negatives(std::size_t c) const;

  ConfusionMatrix& operator+=(const ConfusionMatrix& other);
  bool operator==(const ConfusionMatrix&) const = default;

 private:
  std::size_t classes_;
  std::vector<std::uint64_t> counts_;
};

/// 100 * 2tp / (2tp + fp + fn); 0 when the denominator is 0.
double f1_from_counts(std::uint64_t tp, std::uint64_t fp, std::uint64_t fn);

/// Pixel-level binary F1 on the building class. Nonzero values count as building.
double f1_loc(std::span<const std::int32_t> pred, std::span<const std::int32_t> truth);

/// F1 of each damage class 1..T-1.
std::vector<double> per_class_f1(const ConfusionMatrix& cm);

/// Harmonic mean of the per-damage-class F1s, each floored at kF1Floor.
double harmonic_mean_f1(std::span<const double> per_class);
double f1_clf(const ConfusionMatrix& cm);

double f1_overall(double loc, double clf);

struct MetricsReport {
  double f1_loc = 0;
  double f1_clf = 0;
  double f1_overall = 0;
  std::vector<double> per_class;  // intact, damaged, destroyed

  /// Flat JSON object with six fixed keys and two decimals.
  std::string to_json() const;
};

/// Global accumulator over any number of scenes. Localization counts every
/// pixel; classification counts pixels inside true building footprints.
class Evaluator {
 public:
  explicit Evaluator(std::size_t damage_classes);

  void add_scene(std::span<const std::int32_t> pred_damage, std::span<const std::int32_t> true_damage);
  MetricsReport report() const;

  const ConfusionMatrix& loc() const { return loc_; }
  const ConfusionMatrix& clf() const { return clf_; }
  std::size_t scenes() const { return scenes_; }

 private:
  ConfusionMatrix loc_;
  ConfusionMatrix clf_;
  std::size_t scenes_ = 0;
};

/// L = CE(mask) + CE(damage), each averaged over pixels.
/// Logits are [H x W x K]; labels are H*W values.
Tensor multitask_loss(Tape& tape, const Tensor& mask_logits, std::span<const std::int32_t> mask_labels,
                      const Tensor& damage_logits, std::span<const std::int32_t> damage_labels);

}  // namespace bm::metrics
