#include <benchmark/benchmark.h>

#include "blastmamba/ops.hpp"
#include "blastmamba/rng.hpp"
#include "blastmamba/ssm.hpp"
#include "blastmamba/vss.hpp"

namespace {

bm::ssm::DiscreteSSM random_system(std::size_t n) {
  bm::Rng rng(1);
  bm::ssm::ContinuousSSM s;
  for (std::size_t i = 0; i < n; ++i) {
    s.a.push_back(-rng.uniform(0.1, 2.0));
    s.b.push_back(rng.uniform(-1, 1));
    s.c.push_back(rng.uniform(-1, 1));
  }
  s.delta = 0.1;
  return bm::ssm::discretize_zoh(s);
}

std::vector<double> random_vector(std::size_t n, std::uint64_t seed) {
  bm::Rng rng(seed);
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(-1, 1);
  return v;
}

bm::Tensor random_tensor(bm::Shape shape, std::uint64_t seed, double lo = -1, double hi = 1, bool grad = false) {
  bm::Rng rng(seed);
  std::vector<double> v(bm::shape_numel(shape));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return bm::Tensor::from(std::move(shape), std::move(v), grad);
}

void BM_Discretize(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  bm::ssm::ContinuousSSM s{std::vector<double>(n, -1.0), std::vector<double>(n, 1.0), std::vector<double>(n, 1.0), 0.1};
  for (auto _ : state) benchmark::DoNotOptimize(bm::ssm::discretize_zoh(s));
}
BENCHMARK(BM_Discretize)->Arg(8)->Arg(16);

void BM_RecurrentScan(benchmark::State& state) {
  const auto d = random_system(16);
  const auto x = random_vector(static_cast<std::size_t>(state.range(0)), 2);
  for (auto _ : state) benchmark::DoNotOptimize(bm::ssm::scan_recurrent(d, x));
}
BENCHMARK(BM_RecurrentScan)->Arg(64)->Arg(1024);

void BM_ConvolutionForm(benchmark::State& state) {
  const auto len = static_cast<std::size_t>(state.range(0));
  const auto d = random_system(16);
  const auto x = random_vector(len, 3);
  for (auto _ : state) benchmark::DoNotOptimize(bm::ssm::apply_causal_conv(bm::ssm::conv_kernel(d, len), x));
}
BENCHMARK(BM_ConvolutionForm)->Arg(64)->Arg(1024);

void BM_SelectiveScanForwardBackward(benchmark::State& state) {
  const auto len = static_cast<std::size_t>(state.range(0));
  constexpr std::size_t kState = 8, kChannels = 16;
  const auto a = random_tensor({kState}, 4, -2, -0.1, true);
  const auto b = random_tensor({len, kState}, 5, -1, 1, true), c = random_tensor({len, kState}, 6, -1, 1, true);
  const auto delta = random_tensor({len}, 7, 0.01, 0.5, true), x = random_tensor({len, kChannels}, 8, -1, 1, true);
  for (auto _ : state) {
    bm::Tape tape;
    auto y = bm::ssm::selective_scan(tape, a, b, c, delta, x);
    bm::backward(tape, bm::ops::sum(tape, y));
  }
}
BENCHMARK(BM_SelectiveScanForwardBackward)->Arg(256)->Arg(1024);

void BM_SS2D(benchmark::State& state) {
  const auto side = static_cast<std::size_t>(state.range(0));
  bm::Rng rng(9);
  const auto w = bm::vss::init_ss2d(rng, 16, 8);
  const auto f = random_tensor({side, side, 16}, 10);
  for (auto _ : state) {
    bm::Tape tape;
    benchmark::DoNotOptimize(bm::vss::ss2d(tape, f, w));
  }
}
BENCHMARK(BM_SS2D)->Arg(8)->Arg(16);

}  // namespace
