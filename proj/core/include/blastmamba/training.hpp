#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "blastmamba/metrics.hpp"
#include "blastmamba/network.hpp"
#include "blastmamba/scene.hpp"

namespace bm {

/// How much of the blast map reaches the network.
enum class BlastMode {
  kNone,          // all-zero map
  kDistanceOnly,  // overpressure and impulse channels zeroed
  kFull,
};

std::string to_string(BlastMode m);
BlastMode parse_blast_mode(const std::string& s);

/// Zeroes channels of an [H x W x 3] map according to `mode`.
Tensor apply_blast_mode(const Tensor& blast, BlastMode mode);

/// Network-ready view of a scene.
struct Sample {
  Tensor pre;
  Tensor post;
  Tensor blast;
  std::vector<std::int32_t> mask;
  std::vector<std::int32_t> damage;
};

Sample make_sample(const Scene& s, BlastMode mode);
std::vector<Sample> make_samples(const std::vector<Scene>& scenes, BlastMode mode);

struct TrainOptions {
  double learning_rate = 1e-3;
  double weight_decay = 0.01;
  std::size_t steps = 300;
  std::size_t batch_size = 2;
  std::uint64_t seed = 0;
};

struct TrainResult {
  std::vector<double> losses;  // mean batch loss per step
  double seconds = 0;
};

/// Mean multitask loss of one sample batch, recorded on `tape`.
Tensor batch_loss(Tape& tape, const ModelWeights& w, const std::vector<const Sample*>& batch);

/// AdamW over every parameter with deterministic reshuffling each epoch.
/// A non-finite loss aborts with NumericError naming the step.
TrainResult train(ModelWeights& w, const std::vector<Sample>& data, const TrainOptions& o,
                  const std::function<void(std::size_t step, double loss)>& on_step = {});

struct Prediction {
  std::vector<std::int32_t> mask;
  std::vector<std::int32_t> damage;
};

Prediction predict(const ModelWeights& w, const Sample& s);

/// Folds five-grade pretraining predictions onto the four fine-tuning
/// classes: minor and major damage both become "damaged".
std::int32_t fold_pretrain_class(std::int32_t c);

/// Scores damage predictions against labels with `classes` classes. A model
/// with more damage classes than the labels has its predictions folded.
metrics::MetricsReport evaluate_model(const ModelWeights& w, const std::vector<Sample>& data, std::size_t classes);

/// "step,loss" CSV, one row per step.
std::string loss_curve_csv(const TrainResult& r);

}  // namespace bm
