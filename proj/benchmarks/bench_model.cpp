#include <benchmark/benchmark.h>

#include "blastmamba/dataset.hpp"
#include "blastmamba/metrics.hpp"
#include "blastmamba/network.hpp"
#include "blastmamba/training.hpp"

namespace {

struct Fixture {
  bm::ModelWeights weights = bm::init_model(bm::ModelConfig{}, 1);
  bm::Sample sample = bm::make_sample(bm::make_dataset_scene(bm::GenerateOptions{}, 0), bm::BlastMode::kFull);
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

void BM_ModelForward(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state) {
    bm::Tape tape;
    benchmark::DoNotOptimize(bm::model_forward(tape, f.weights, f.sample.pre, f.sample.post, f.sample.blast));
  }
}
BENCHMARK(BM_ModelForward)->Unit(benchmark::kMillisecond);

void BM_ModelForwardBackward(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state) {
    bm::Tape tape;
    bm::backward(tape, bm::batch_loss(tape, f.weights, {&f.sample}));
  }
}
BENCHMARK(BM_ModelForwardBackward)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
