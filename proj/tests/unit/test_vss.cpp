#include <gtest/gtest.h>

#include "blastmamba/error.hpp"
#include "blastmamba/ops.hpp"
#include "blastmamba/vss.hpp"
#include "gradcheck.hpp"

using namespace bm;
using namespace bm::vss;
using bm::testing::random_tensor;

namespace {

void expect_bit_equal(const Tensor& a, const Tensor& b) {
  ASSERT_EQ(a.shape(), b.shape());
  for (std::size_t i = 0; i < a.numel(); ++i) ASSERT_EQ(a.at(i), b.at(i)) << "at " << i;
}

}  // namespace

TEST(CrossScan, TwoByTwoOrders) {
  // [[a,b],[c,d]] -> abcd, dcba, acbd, dbca with a..d = 0..3.
  const auto o = scan_orders(2, 2);
  EXPECT_EQ(o[0], (std::vector<std::size_t>{0, 1, 2, 3}));
  EXPECT_EQ(o[1], (std::vector<std::size_t>{3, 2, 1, 0}));
  EXPECT_EQ(o[2], (std::vector<std::size_t>{0, 2, 1, 3}));
  EXPECT_EQ(o[3], (std::vector<std::size_t>{3, 1, 2, 0}));
}

TEST(CrossScan, SinglePixel) {
  Tape tape;
  const auto seqs = cross_scan(tape, Tensor::from({1, 1, 2}, {3, 4}));
  for (const auto& s : seqs) {
    EXPECT_EQ(s.shape(), (Shape{1, 2}));
    EXPECT_EQ(s.at(0), 3);
  }
}

TEST(CrossScan, SingleRowDirectionsCoincide) {
  const auto o = scan_orders(1, 5);
  EXPECT_EQ(o[0], o[2]);
  EXPECT_EQ(o[1], o[3]);
}

TEST(CrossScan, MergeOfScanIsFourTimesInput) {
  Rng rng(1);
  const auto f = random_tensor(rng, {3, 5, 4}, -1, 1, false);
  Tape tape;
  const auto m = cross_merge(tape, cross_scan(tape, f), 3, 5);
  for (std::size_t i = 0; i < f.numel(); ++i) EXPECT_EQ(m.at(i), 4.0 * f.at(i));
}

TEST(CrossMerge, SingleBranchIdentityAndZeros) {
  Rng rng(2);
  const auto f = random_tensor(rng, {2, 3, 2}, -1, 1, false);
  Tape tape;
  auto seqs = cross_scan(tape, f);
  const auto zero = Tensor::zeros(seqs[0].shape());
  expect_bit_equal(cross_merge(tape, {zero, zero, seqs[2], zero}, 2, 3), f);
  const auto z = cross_merge(tape, {zero, zero, zero, zero}, 2, 3);
  for (double v : z.data()) EXPECT_EQ(v, 0.0);
}

TEST(SS2D, PreservesShape) {
  Rng rng(3);
  const auto w = init_ss2d(rng, 4, 3);
  Tape tape;
  const auto y = ss2d(tape, random_tensor(rng, {3, 2, 4}, -1, 1, false), w);
  EXPECT_EQ(y.shape(), (Shape{3, 2, 4}));
}

TEST(SS2D, ZeroInputGivesZeroOutput) {
  Rng rng(4);
  const auto w = init_ss2d(rng, 4, 3);
  Tape tape;
  for (double v : ss2d(tape, Tensor::zeros({3, 3, 4}), w).data()) EXPECT_EQ(v, 0.0);
}

TEST(SS2D, GradientMatchesFiniteDifferences) {
  Rng rng(5);
  const auto w = init_ss2d(rng, 2, 3);
  auto f = random_tensor(rng, {3, 3, 2});
  ParamList params;
  w.collect("ss2d", params);
  std::vector<Tensor> ps{f};
  for (auto& [name, t] : params) ps.push_back(t);
  const auto r = bm::testing::check_all([&](Tape& t) { return bm::testing::probe(t, ss2d(t, f, w)); }, ps);
  EXPECT_LT(r.max_rel_err, 1e-4);
}

TEST(VSSBlock, ZeroBranchIsIdentity) {
  Rng rng(6);
  auto w = init_vss(rng, {4, 3, 2.0});
  zero_residual_branch(w);
  auto w2 = init_vss(rng, {4, 3, 2.0});
  zero_residual_branch(w2);
  const auto f = random_tensor(rng, {2, 3, 4}, -1, 1, false);
  Tape tape;
  expect_bit_equal(vss_block(tape, f, w), f);
  expect_bit_equal(vss_block(tape, vss_block(tape, f, w), w2), f);
}

TEST(VSSBlock, PreservesShape) {
  Rng rng(7);
  for (std::size_t c : {2u, 5u}) {
    const auto w = init_vss(rng, {c, 4, 2.0});
    Tape tape;
    EXPECT_EQ(vss_block(tape, random_tensor(rng, {3, 4, c}, -1, 1, false), w).shape(), (Shape{3, 4, c}));
  }
}

TEST(VSSBlock, BadExpandRatioThrows) {
  EXPECT_THROW((VSSConfig{3, 4, 1.5}.expanded_dim()), ConfigError);
}

TEST(VSSBlock, GradientMatchesFiniteDifferences) {
  Rng rng(8);
  const auto w = init_vss(rng, {2, 2, 2.0});
  auto f = random_tensor(rng, {2, 3, 2});
  ParamList params;
  w.collect("vss", params);
  std::vector<Tensor> ps{f};
  for (auto& [name, t] : params) ps.push_back(t);
  const auto r = bm::testing::check_all([&](Tape& t) { return bm::testing::probe(t, vss_block(t, f, w)); }, ps);
  EXPECT_LT(r.max_rel_err, 1e-4);
}

TEST(STSS, OutputChannelsAndZeroInput) {
  Rng rng(9);
  auto w = init_stss(rng, 3, 4, 2.0);
  Tape tape;
  const auto pre = random_tensor(rng, {2, 2, 3}, -1, 1, false);
  const auto post = random_tensor(rng, {2, 2, 3}, -1, 1, false);
  EXPECT_EQ(stss_block(tape, pre, post, w).shape(), (Shape{2, 2, 3}));
  // Zero inputs with zero projection bias give zero output.
  for (double& v : w.proj.b.mutable_data()) v = 0;
  for (double v : stss_block(tape, Tensor::zeros({2, 2, 3}), Tensor::zeros({2, 2, 3}), w).data()) EXPECT_EQ(v, 0.0);
}

TEST(STSS, OrderMatters) {
  Rng rng(10);
  const auto w = init_stss(rng, 3, 4, 2.0);
  const auto a = random_tensor(rng, {2, 2, 3}, -1, 1, false);
  const auto b = random_tensor(rng, {2, 2, 3}, -1, 1, false);
  Tape tape;
  const auto ab = stss_block(tape, a, b, w), ba = stss_block(tape, b, a, w);
  double diff = 0;
  for (std::size_t i = 0; i < ab.numel(); ++i) diff += std::abs(ab.at(i) - ba.at(i));
  EXPECT_GT(diff, 1e-6);
}

TEST(STSS, GradientMatchesFiniteDifferences) {
  Rng rng(11);
  const auto w = init_stss(rng, 2, 2, 2.0);
  auto pre = random_tensor(rng, {2, 2, 2});
  auto post = random_tensor(rng, {2, 2, 2});
  ParamList params;
  w.collect("stss", params);
  std::vector<Tensor> ps{pre, post};
  for (auto& [name, t] : params) ps.push_back(t);
  const auto r =
      bm::testing::check_all([&](Tape& t) { return bm::testing::probe(t, stss_block(t, pre, post, w)); }, ps);
  EXPECT_LT(r.max_rel_err, 1e-4);
}

TEST(RaFuse, GateIdentities) {
  Rng rng(12);
  const auto u = random_tensor(rng, {4, 4, 3}, -1, 1, false);
  const auto d = random_tensor(rng, {2, 2, 3}, -1, 1, false);
  const auto zero = Tensor::zeros({4, 4, 3});
  Tape tape;
  expect_bit_equal(ra_stss_fuse(tape, u, {}, zero), u);
  expect_bit_equal(ra_stss_fuse(tape, u, d, zero), ra_stss_fuse(tape, u, d, {}));
  expect_bit_equal(ra_stss_fuse(tape, u, d, {}), ops::add(tape, u, ops::bilinear_resize(tape, d, 4, 4)));
  const auto two = ra_stss_fuse(tape, Tensor::full({2, 2, 1}, 1.0), {}, Tensor::full({2, 2, 1}, 1.0));
  for (double v : two.data()) EXPECT_EQ(v, 2.0);
}

TEST(RaFuse, ShapeMismatchThrows) {
  Tape tape;
  EXPECT_THROW(ra_stss_fuse(tape, Tensor::zeros({4, 4, 3}), Tensor::zeros({3, 3, 3}), {}), ShapeError);
}
