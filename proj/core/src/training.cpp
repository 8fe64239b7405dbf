#include "blastmamba/training.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "blastmamba/error.hpp"
#include "blastmamba/ops.hpp"
#include "blastmamba/optim.hpp"

namespace bm {

std::string to_string(BlastMode m) {
  switch (m) {
    case BlastMode::kNone: return "none";
    case BlastMode::kDistanceOnly: return "distance_only";
    case BlastMode::kFull: return "full";
  }
  return "full";
}

BlastMode parse_blast_mode(const std::string& s) {
  if (s == "none") return BlastMode::kNone;
  if (s == "distance_only") return BlastMode::kDistanceOnly;
  if (s == "full") return BlastMode::kFull;
  throw ConfigError("blast_mode must be none, distance_only or full, got '" + s + "'");
}

Tensor apply_blast_mode(const Tensor& blast, BlastMode mode) {
  if (blast.rank() != 3 || blast.dim(2) != 3) throw ShapeError("blast map must be H x W x 3, got " + shape_str(blast.shape()));
  Tensor out = blast.detach();
  if (mode == BlastMode::kFull) return out;
  auto d = out.mutable_data();
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (mode == BlastMode::kNone || i % 3 != 2) d[i] = 0.0;
  }
  return out;
}

Sample make_sample(const Scene& s, BlastMode mode) {
  Sample out;
  out.pre = image_to_tensor(s.pre);
  out.post = image_to_tensor(s.post);
  out.blast = apply_blast_mode(raster_to_tensor(s.blast), mode);
  out.mask = labels_of(s.mask);
  out.damage = labels_of(s.damage);
  return out;
}

std::vector<Sample> make_samples(const std::vector<Scene>& scenes, BlastMode mode) {
  std::vector<Sample> out;
  out.reserve(scenes.size());
  for (const auto& s : scenes) out.push_back(make_sample(s, mode));
  return out;
}

Tensor batch_loss(Tape& tape, const ModelWeights& w, const std::vector<const Sample*>& batch) {
  if (batch.empty()) throw ConfigError("empty batch");
  Tensor total;
  for (const Sample* s : batch) {
    const auto out = model_forward(tape, w, s->pre, s->post, s->blast);
    const auto l = metrics::multitask_loss(tape, out.mask_logits, s->mask, out.damage_logits, s->damage);
    total = total.defined() ? ops::add(tape, total, l) : l;
  }
  return ops::scale(tape, total, 1.0 / static_cast<double>(batch.size()));
}

TrainResult train(ModelWeights& w, const std::vector<Sample>& data, const TrainOptions& o,
                  const std::function<void(std::size_t, double)>& on_step) {
  if (!(o.learning_rate > 0)) throw ConfigError("learning_rate must be positive");
  if (o.batch_size == 0) throw ConfigError("batch_size must be at least 1");
  if (data.empty() && o.steps > 0) throw DataError("no training samples");

  const auto t0 = std::chrono::steady_clock::now();
  AdamW opt(w.parameters(), {.lr = o.learning_rate, .weight_decay = o.weight_decay});
  TrainResult result;

  std::vector<std::size_t> order(data.size());
  std::size_t cursor = order.size();
  std::uint64_t epoch = 0;
  for (std::size_t step = 0; step < o.steps; ++step) {
    std::vector<const Sample*> batch;
    while (batch.size() < o.batch_size) {
      if (cursor == order.size()) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng rng(derive_seed(o.seed, 0xE90C0000 + epoch++));
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
        cursor = 0;
      }
      batch.push_back(&data[order[cursor++]]);
    }

    Tape tape;
    double value = 0;
    try {
      opt.zero_grad();
      const Tensor loss = batch_loss(tape, w, batch);
      value = loss.item();
      backward(tape, loss);
      opt.step();
    } catch (const NumericError& e) {
      throw NumericError("training diverged at step " + std::to_string(step) + ": " + e.what());
    }
    for (const auto& p : w.parameters()) {
      for (double v : p.data()) {
        if (!std::isfinite(v)) throw NumericError("training diverged at step " + std::to_string(step) + ": non-finite weights");
      }
    }
    result.losses.push_back(value);
    if (on_step) on_step(step, value);
  }
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

Prediction predict(const ModelWeights& w, const Sample& s) {
  Tape tape;
  const auto out = model_forward(tape, w, s.pre, s.post, s.blast);
  return {classify(out.mask_logits), classify(out.damage_logits)};
}

std::int32_t fold_pretrain_class(std::int32_t c) {
  static constexpr std::int32_t kFold[] = {0, 1, 2, 2, 3};
  if (c < 0 || c > 4) throw ConfigError("pretraining class out of range");
  return kFold[c];
}

metrics::MetricsReport evaluate_model(const ModelWeights& w, const std::vector<Sample>& data, std::size_t classes) {
  if (data.empty()) throw DataError("evaluate: no scenes");
  const bool fold = w.config.damage_classes == kPretrainDamageClasses && classes == kFinetuneDamageClasses;
  if (!fold && w.config.damage_classes != classes) {
    throw ConfigError("model predicts " + std::to_string(w.config.damage_classes) + " damage classes, labels have " +
                      std::to_string(classes));
  }
  metrics::Evaluator ev(classes);
  for (const auto& s : data) {
    auto pred = predict(w, s).damage;
    if (fold) {
      for (auto& c : pred) c = fold_pretrain_class(c);
    }
    ev.add_scene(pred, s.damage);
  }
  return ev.report();
}

std::string loss_curve_csv(const TrainResult& r) {
  std::ostringstream os;
  os << "step,loss\n";
  char buf[64];
  for (std::size_t i = 0; i < r.losses.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu,%.10g\n", i, r.losses[i]);
    os << buf;
  }
  return os.str();
}

}  // namespace bm
