#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "blastmamba/error.hpp"
#include "blastmamba/ssm.hpp"
#include "gradcheck.hpp"

using namespace bm;
using namespace bm::ssm;

namespace {

DiscreteSSM random_stable(Rng& rng, std::size_t n) {
  ContinuousSSM c;
  for (std::size_t i = 0; i < n; ++i) {
    c.a.push_back(-rng.uniform(0.05, 3.0));
    c.b.push_back(rng.uniform(-1, 1));
    c.c.push_back(rng.uniform(-1, 1));
  }
  c.delta = rng.uniform(0.01, 0.5);
  return discretize_zoh(c);
}

std::vector<double> random_vec(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(-1, 1);
  return v;
}

}  // namespace

TEST(Zoh, ScalarClosedForm) {
  const auto e = zoh_entry(-1.0, 1.0, std::numbers::ln2);
  EXPECT_NEAR(e.a_bar, 0.5, 1e-12);
  EXPECT_NEAR(e.b_bar, 0.5, 1e-12);
}

TEST(Zoh, SmallStepLimit) {
  const double delta = 1e-9;
  const auto e = zoh_entry(-2.0, 3.0, delta);
  EXPECT_NEAR(e.a_bar, 1.0, 1e-8);
  EXPECT_NEAR(e.b_bar / delta, 3.0, 1e-8);
}

TEST(Zoh, TaylorBranchMatchesExactAtThreshold) {
  for (double z : {-0.999999e-6, 0.999999e-6, -1e-8, 5e-7}) {
    const double exact = std::expm1(z) / z;
    EXPECT_LT(std::abs(zoh_gain(z) - exact) / exact, 1e-9) << z;
  }
  // Just above the threshold the exact branch is used; continuity across it.
  EXPECT_NEAR(zoh_gain(-1.000001e-6), zoh_gain(-0.999999e-6), 1e-12);
}

TEST(Zoh, NonpositiveStepThrows) {
  EXPECT_THROW(discretize_zoh({{-1}, {1}, {1}, 0.0}), ConfigError);
  EXPECT_THROW(discretize_zoh({{-1}, {1}, {1}, -0.1}), ConfigError);
}

TEST(Scan, HandRecurrence) {
  const DiscreteSSM d{{0.5}, {0.5}, {1.0}};
  const std::vector<double> x{1, 1, 1};
  const auto y = scan_recurrent(d, x);
  EXPECT_DOUBLE_EQ(y[0], 0.5);
  EXPECT_DOUBLE_EQ(y[1], 0.75);
  EXPECT_DOUBLE_EQ(y[2], 0.875);
}

TEST(Scan, ZeroInputZeroOutput) {
  Rng rng(1);
  const auto d = random_stable(rng, 4);
  for (double v : scan_recurrent(d, std::vector<double>(10, 0.0))) EXPECT_EQ(v, 0.0);
}

TEST(Scan, ImpulseResponseIsKernel) {
  Rng rng(2);
  const auto d = random_stable(rng, 5);
  std::vector<double> x(16, 0.0);
  x[0] = 1.0;
  const auto y = scan_recurrent(d, x);
  const auto k = conv_kernel(d, 16);
  for (std::size_t t = 0; t < 16; ++t) EXPECT_NEAR(y[t], k[t], 1e-15);
}

TEST(Kernel, GeometricSeries) {
  const auto k = conv_kernel({{0.5}, {0.5}, {1.0}}, 3);
  EXPECT_DOUBLE_EQ(k[0], 0.5);
  EXPECT_DOUBLE_EQ(k[1], 0.25);
  EXPECT_DOUBLE_EQ(k[2], 0.125);
}

TEST(Kernel, FirstEntryIsCBbar) {
  Rng rng(3);
  const auto d = random_stable(rng, 6);
  double cb = 0;
  for (std::size_t i = 0; i < 6; ++i) cb += d.c[i] * d.b_bar[i];
  EXPECT_NEAR(conv_kernel(d, 4)[0], cb, 1e-15);
}

TEST(Kernel, ZeroOutputMatrixGivesZeroKernel) {
  Rng rng(4);
  auto d = random_stable(rng, 3);
  d.c.assign(3, 0.0);
  for (double v : conv_kernel(d, 8)) EXPECT_EQ(v, 0.0);
}

TEST(Kernel, StableScalarKernelDecays) {
  Rng rng(5);
  const auto d = random_stable(rng, 1);
  const auto k = conv_kernel(d, 32);
  for (std::size_t t = 1; t < k.size(); ++t) EXPECT_LE(std::abs(k[t]), std::abs(k[t - 1]));
}

TEST(CausalConv, ImpulseIdentities) {
  Rng rng(6);
  const auto x = random_vec(rng, 8);
  std::vector<double> impulse(8, 0.0);
  impulse[0] = 1.0;
  EXPECT_EQ(apply_causal_conv(impulse, x), x);
  EXPECT_EQ(apply_causal_conv(x, impulse), x);
  EXPECT_THROW(apply_causal_conv(x, std::vector<double>(7)), ShapeError);
}

TEST(CausalConv, EqualsRecurrence) {
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const auto d = random_stable(rng, 1 + rng.below(16));
    const auto x = random_vec(rng, 64);
    const auto a = apply_causal_conv(conv_kernel(d, 64), x);
    const auto b = scan_recurrent(d, x);
    for (std::size_t t = 0; t < 64; ++t) EXPECT_NEAR(a[t], b[t], 1e-10);
  }
}

TEST(Scan, Linearity) {
  Rng rng(8);
  const auto d = random_stable(rng, 4);
  const auto x1 = random_vec(rng, 20), x2 = random_vec(rng, 20);
  std::vector<double> mix(20);
  for (std::size_t i = 0; i < 20; ++i) mix[i] = 2.0 * x1[i] - 0.5 * x2[i];
  const auto y1 = scan_recurrent(d, x1), y2 = scan_recurrent(d, x2), y = scan_recurrent(d, mix);
  for (std::size_t i = 0; i < 20; ++i) EXPECT_NEAR(y[i], 2.0 * y1[i] - 0.5 * y2[i], 1e-12);
}

TEST(Selective, ProjectionsOfZeroInput) {
  SelectiveWeights w{2, 3, std::vector<double>(6, 0.3), std::vector<double>(6, -0.2), {0.5, 0.5}, 0.0};
  const auto sp = selective_projections(std::vector<double>(8, 0.0), 4, w);
  for (double d : sp.delta) EXPECT_NEAR(d, std::numbers::ln2, 1e-15);
  w.b_delta = 1.3;
  const auto sp2 = selective_projections(std::vector<double>(8, 0.0), 4, w);
  for (double d : sp2.delta) EXPECT_NEAR(d, std::log1p(std::exp(1.3)), 1e-15);
}

TEST(Selective, DeltaAlwaysPositive) {
  Rng rng(9);
  SelectiveWeights w{3, 2, random_vec(rng, 6), random_vec(rng, 6), random_vec(rng, 3), -2.0};
  for (auto& v : w.w_delta) v *= 20;
  const auto sp = selective_projections(random_vec(rng, 30), 10, w);
  for (double d : sp.delta) EXPECT_GT(d, 0.0);
}

TEST(Selective, ConstantParamsReduceToLti) {
  Rng rng(10);
  const std::size_t n = 3, len = 12;
  const auto a = std::vector<double>{-0.5, -1.0, -2.0};
  const auto b = random_vec(rng, n), c = random_vec(rng, n);
  const double delta = 0.3;
  SelectiveParams sp{len, n, {}, {}, std::vector<double>(len, delta)};
  for (std::size_t t = 0; t < len; ++t) {
    sp.b.insert(sp.b.end(), b.begin(), b.end());
    sp.c.insert(sp.c.end(), c.begin(), c.end());
  }
  const auto x = random_vec(rng, len);
  const auto y = selective_scan(a, sp, x, 1);
  const auto d = discretize_zoh({a, b, c, delta});
  const auto ref = scan_recurrent(d, x);
  for (std::size_t t = 0; t < len; ++t) EXPECT_NEAR(y[t], ref[t], 1e-14);
}

TEST(Selective, TinyStepFreezesState) {
  Rng rng(11);
  const std::size_t n = 2, len = 5;
  const std::vector<double> a{-1.0, -3.0}, h0{0.7, -0.4};
  SelectiveParams sp{len, n, random_vec(rng, len * n), random_vec(rng, len * n), std::vector<double>(len, 1e-14)};
  const auto y = selective_scan(a, sp, random_vec(rng, len), 1, h0);
  for (std::size_t t = 0; t < len; ++t) {
    EXPECT_NEAR(y[t], sp.c[t * n] * h0[0] + sp.c[t * n + 1] * h0[1], 1e-12);
  }
}

TEST(Selective, MatchesUnrolledOracle) {
  Rng rng(12);
  const std::size_t len = 4;
  const std::vector<double> a{-0.8};
  SelectiveParams sp{len, 1, random_vec(rng, len), random_vec(rng, len), {}};
  for (std::size_t t = 0; t < len; ++t) sp.delta.push_back(rng.uniform(0.05, 1.0));
  const auto x = random_vec(rng, len);
  const auto y = selective_scan(a, sp, x, 1);
  for (std::size_t t = 0; t < len; ++t) {
    double h = 0;
    for (std::size_t tau = 0; tau <= t; ++tau) {
      double prod = 1;
      for (std::size_t s = tau + 1; s <= t; ++s) prod *= std::exp(sp.delta[s] * a[0]);
      const double bbar = std::expm1(sp.delta[tau] * a[0]) / a[0] * sp.b[tau];
      h += prod * bbar * x[tau];
    }
    EXPECT_LT(std::abs(y[t] - sp.c[t] * h), 1e-10 * std::max(1.0, std::abs(y[t])));
  }
}

TEST(Selective, TensorVersionMatchesReference) {
  Rng rng(13);
  const std::size_t len = 7, n = 3, ch = 2;
  const auto a = default_a(n);
  SelectiveParams sp{len, n, random_vec(rng, len * n), random_vec(rng, len * n), {}};
  for (std::size_t t = 0; t < len; ++t) sp.delta.push_back(rng.uniform(0.05, 1.0));
  const auto x = random_vec(rng, len * ch);
  const auto ref = selective_scan(a, sp, x, ch);
  Tape tape;
  const auto y = selective_scan(tape, Tensor::from({n}, a), Tensor::from({len, n}, sp.b), Tensor::from({len, n}, sp.c),
                                Tensor::from({len}, sp.delta), Tensor::from({len, ch}, x));
  for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(y.at(i), ref[i], 1e-14);
}

TEST(Selective, GradientsMatchFiniteDifferences) {
  Rng rng(14);
  const std::size_t len = 6, n = 3, ch = 2;
  auto a = Tensor::from({n}, {-0.3, -1.1, -2.4}, true);
  auto b = bm::testing::random_tensor(rng, {len, n});
  auto c = bm::testing::random_tensor(rng, {len, n});
  auto delta = bm::testing::random_tensor(rng, {len}, 0.05, 0.9);
  auto x = bm::testing::random_tensor(rng, {len, ch});
  const auto r = bm::testing::check_all(
      [&](Tape& t) { return bm::testing::probe(t, selective_scan(t, a, b, c, delta, x)); }, {a, b, c, delta, x});
  EXPECT_LT(r.max_rel_err, 1e-4);
}

TEST(Selective, GradientsNearZeroStep) {
  // Exercises the series branch of the input-gain derivative.
  Rng rng(15);
  auto a = Tensor::from({2}, {-1e-3, -0.5}, true);
  auto b = bm::testing::random_tensor(rng, {3, 2});
  auto c = bm::testing::random_tensor(rng, {3, 2});
  auto delta = bm::testing::random_tensor(rng, {3}, 0.001, 0.01);
  auto x = bm::testing::random_tensor(rng, {3, 1});
  const auto r = bm::testing::check_all(
      [&](Tape& t) { return bm::testing::probe(t, selective_scan(t, a, b, c, delta, x)); }, {a, b, c, delta, x});
  EXPECT_LT(r.max_rel_err, 1e-4);
}

TEST(Selective, DefaultA) {
  const auto a = default_a(4);
  EXPECT_EQ(a, (std::vector<double>{-1, -2, -3, -4}));
}
