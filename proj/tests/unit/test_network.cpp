#include <gtest/gtest.h>

#include "blastmamba/checkpoint.hpp"
#include "blastmamba/error.hpp"
#include "blastmamba/metrics.hpp"
#include "blastmamba/network.hpp"
#include "blastmamba/ops.hpp"
#include "gradcheck.hpp"

using namespace bm;
using bm::testing::random_tensor;

namespace {

ModelConfig small_config() {
  ModelConfig c;
  c.height = 32;
  c.width = 32;
  c.channels = {4, 8, 16, 32};
  c.state_dim = 4;
  return c;
}

void expect_bit_equal(const Tensor& a, const Tensor& b) {
  ASSERT_EQ(a.shape(), b.shape());
  for (std::size_t i = 0; i < a.numel(); ++i) ASSERT_EQ(a.at(i), b.at(i)) << "at " << i;
}

bool differs(const Tensor& a, const Tensor& b) {
  for (std::size_t i = 0; i < a.numel(); ++i) {
    if (a.at(i) != b.at(i)) return true;
  }
  return false;
}

struct Inputs {
  Tensor pre, post, blast;
};

Inputs random_inputs(const ModelConfig& c, std::uint64_t seed) {
  Rng rng(seed);
  return {random_tensor(rng, {c.height, c.width, 3}, 0, 1, false),
          random_tensor(rng, {c.height, c.width, 3}, 0, 1, false),
          random_tensor(rng, {c.height, c.width, 3}, 0, 1, false)};
}

}  // namespace

TEST(ModelConfig, SerializeRoundTrip) {
  auto c = small_config();
  c.residual = ResidualSource::kStssOutput;
  c.expand_ratio = 1.5;
  EXPECT_EQ(ModelConfig::parse(c.serialize()), c);
  EXPECT_THROW(ModelConfig::parse("bogus=1\n"), ConfigError);
}

TEST(ModelConfig, ValidateRejectsBadSizes) {
  auto c = small_config();
  c.height = 48;  // not divisible by 32
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Encoder, PyramidShapes) {
  ModelConfig c;
  const auto w = init_model(c, 1);
  Tape tape;
  const auto p = encoder_forward(tape, Tensor::full({64, 64, 3}, 0.5), w);
  const Shape expect[] = {{16, 16, 8}, {8, 8, 16}, {4, 4, 32}, {2, 2, 64}};
  for (std::size_t l = 0; l < kLevels; ++l) EXPECT_EQ(p.levels[l].shape(), expect[l]);
}

TEST(Encoder, PatchPartitionSinglePatch) {
  auto c = small_config();
  const auto w = init_model(c, 2);
  Tape tape;
  EXPECT_EQ(patch_partition(tape, Tensor::full({4, 4, 3}, 0.2), w.encoder).shape(), (Shape{1, 1, 4}));
}

TEST(Encoder, PatchPartitionIsLocal) {
  auto c = small_config();
  const auto w = init_model(c, 3);
  Rng rng(3);
  auto img = random_tensor(rng, {8, 8, 3}, 0, 1, false);
  Tape tape;
  const auto base = patch_partition(tape, img, w.encoder);
  img.mutable_data()[0] += 0.5;  // pixel (0, 0) lives in patch (0, 0)
  const auto moved = patch_partition(tape, img, w.encoder);
  for (std::size_t cell = 0; cell < 4; ++cell) {
    bool changed = false;
    for (std::size_t k = 0; k < 4; ++k) changed |= base.at(cell * 4 + k) != moved.at(cell * 4 + k);
    EXPECT_EQ(changed, cell == 0) << cell;
  }
}

TEST(Encoder, SiameseBranchesAgree) {
  auto c = small_config();
  const auto w = init_model(c, 4);
  const auto in = random_inputs(c, 4);
  Tape tape;
  const auto a = encoder_forward(tape, in.pre, w);
  const auto b = encoder_forward(tape, in.pre.clone(), w);
  for (std::size_t l = 0; l < kLevels; ++l) expect_bit_equal(a.levels[l], b.levels[l]);
}

TEST(Model, OutputShapesAndDeterminism) {
  auto c = small_config();
  const auto w = init_model(c, 5);
  const auto in = random_inputs(c, 5);
  Tape t1, t2;
  const auto a = model_forward(t1, w, in.pre, in.post, in.blast);
  const auto b = model_forward(t2, w, in.pre, in.post, in.blast);
  EXPECT_EQ(a.mask_logits.shape(), (Shape{32, 32, 2}));
  EXPECT_EQ(a.damage_logits.shape(), (Shape{32, 32, 4}));
  expect_bit_equal(a.mask_logits, b.mask_logits);
  expect_bit_equal(a.damage_logits, b.damage_logits);
  for (auto v : classify(a.mask_logits)) EXPECT_TRUE(v == 0 || v == 1);
}

TEST(Model, SameSeedSameWeights) {
  auto c = small_config();
  const auto a = init_model(c, 6), b = init_model(c, 6);
  const auto pa = a.named_parameters(), pb = b.named_parameters();
  ASSERT_EQ(pa.size(), pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) {
    EXPECT_EQ(pa[i].first, pb[i].first);
    expect_bit_equal(pa[i].second, pb[i].second);
  }
}

TEST(Model, MaskIgnoresPostImageAndBlast) {
  auto c = small_config();
  const auto w = init_model(c, 7);
  const auto in = random_inputs(c, 7);
  const auto other = random_inputs(c, 70);
  Tape tape;
  const auto a = model_forward(tape, w, in.pre, in.post, in.blast);
  const auto b = model_forward(tape, w, in.pre, other.post, other.blast);
  expect_bit_equal(a.mask_logits, b.mask_logits);
  EXPECT_TRUE(differs(a.damage_logits, b.damage_logits));
}

TEST(Model, BlastPerturbationOnlyMovesDamage) {
  auto c = small_config();
  const auto w = init_model(c, 8);
  const auto in = random_inputs(c, 8);
  const auto other = random_inputs(c, 80);
  Tape tape;
  const auto a = model_forward(tape, w, in.pre, in.post, in.blast);
  const auto b = model_forward(tape, w, in.pre, in.post, other.blast);
  expect_bit_equal(a.mask_logits, b.mask_logits);
  EXPECT_TRUE(differs(a.damage_logits, b.damage_logits));
}

TEST(Model, ZeroBlastWithZeroBiasMatchesBlastFree) {
  auto c = small_config();
  auto w = init_model(c, 9);
  for (auto& p : w.blast_encoder.proj) {
    for (double& v : p.b.mutable_data()) v = 0.0;
  }
  const auto in = random_inputs(c, 9);
  Tape tape;
  const auto zero = model_forward(tape, w, in.pre, in.post, Tensor::zeros({32, 32, 3}));
  const auto none = model_forward(tape, w, in.pre, in.post, Tensor{});
  expect_bit_equal(zero.damage_logits, none.damage_logits);
  expect_bit_equal(zero.mask_logits, none.mask_logits);
}

TEST(BlastEncoder, ConstantMapGivesConstantFeatures) {
  auto c = small_config();
  const auto w = init_model(c, 10);
  Tape tape;
  const auto f = blast_encoder_forward(tape, Tensor::full({32, 32, 3}, 0.4), w);
  for (std::size_t l = 0; l < kLevels; ++l) {
    const auto& t = f[l];
    EXPECT_EQ(t.dim(2), c.channels[l]);
    const std::size_t ch = t.dim(2);
    for (std::size_t i = 0; i < t.numel(); ++i) EXPECT_NEAR(t.at(i), t.at(i % ch), 1e-15);
  }
}

TEST(Model, EveryWeightGroupReceivesGradient) {
  auto c = small_config();
  const auto w = init_model(c, 11);
  const auto in = random_inputs(c, 11);
  Rng rng(11);
  std::vector<std::int32_t> mask(32 * 32), dmg(32 * 32);
  for (auto& v : mask) v = static_cast<std::int32_t>(rng.below(2));
  for (auto& v : dmg) v = static_cast<std::int32_t>(rng.below(4));
  Tape tape;
  const auto out = model_forward(tape, w, in.pre, in.post, in.blast);
  backward(tape, metrics::multitask_loss(tape, out.mask_logits, mask, out.damage_logits, dmg));
  for (const auto& [name, t] : w.named_parameters()) {
    double norm = 0;
    for (double g : t.grad()) norm += g * g;
    EXPECT_GT(norm, 0.0) << name;
  }
}

TEST(Model, LiteralResidualVariantRuns) {
  auto c = small_config();
  c.residual = ResidualSource::kStssOutput;
  const auto w = init_model(c, 12);
  const auto in = random_inputs(c, 12);
  Tape tape;
  EXPECT_EQ(model_forward(tape, w, in.pre, in.post, in.blast).damage_logits.shape(), (Shape{32, 32, 4}));
}

TEST(Classify, ArgmaxAndTies) {
  EXPECT_EQ(classify(Tensor::from({1, 1, 3}, {0.1, 0.7, 0.2})), (std::vector<std::int32_t>{1}));
  EXPECT_EQ(classify(Tensor::from({1, 1, 4}, {1, 1, 1, 1})), (std::vector<std::int32_t>{0}));
  for (std::int32_t hot = 0; hot < 5; ++hot) {
    std::vector<double> v(5, 0.0);
    v[static_cast<std::size_t>(hot)] = 1.0;
    EXPECT_EQ(classify(Tensor::from({1, 1, 5}, v))[0], hot);
  }
}

TEST(SwapHead, KeepsEverythingElse) {
  auto c = small_config();
  c.damage_classes = kPretrainDamageClasses;
  const auto w = init_model(c, 13);
  const auto s = swap_head(w, kFinetuneDamageClasses, 99);
  EXPECT_EQ(s.config.damage_classes, kFinetuneDamageClasses);
  EXPECT_EQ(s.damage_decoder.head.w.shape(), (Shape{4, 4}));
  const auto pw = w.named_parameters(), ps = s.named_parameters();
  ASSERT_EQ(pw.size(), ps.size());
  for (std::size_t i = 0; i < pw.size(); ++i) {
    if (pw[i].first.rfind("damage_decoder.head", 0) == 0) continue;
    expect_bit_equal(pw[i].second, ps[i].second);
    EXPECT_FALSE(pw[i].second.same_storage(ps[i].second));
  }
  const auto in = random_inputs(c, 13);
  Tape tape;
  EXPECT_EQ(model_forward(tape, s, in.pre, in.post, in.blast).damage_logits.dim(2), 4u);
}

TEST(Checkpoint, RoundTripGivesIdenticalOutputs) {
  auto c = small_config();
  const auto w = init_model(c, 14);
  const auto bytes = encode_checkpoint(w);
  const auto r = decode_checkpoint(bytes);
  EXPECT_EQ(r.config, w.config);
  EXPECT_EQ(encode_checkpoint(r), bytes);
  const auto in = random_inputs(c, 14);
  Tape tape;
  const auto a = model_forward(tape, w, in.pre, in.post, in.blast);
  const auto b = model_forward(tape, r, in.pre, in.post, in.blast);
  expect_bit_equal(a.damage_logits, b.damage_logits);
  expect_bit_equal(a.mask_logits, b.mask_logits);
}

TEST(Checkpoint, RejectsCorruptData) {
  auto c = small_config();
  auto bytes = encode_checkpoint(init_model(c, 15));
  auto truncated = bytes;
  truncated.resize(bytes.size() - 3);
  EXPECT_THROW(decode_checkpoint(truncated), DataError);
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(decode_checkpoint(bad_magic), DataError);
  auto trailing = bytes;
  trailing.push_back(0);
  EXPECT_THROW(decode_checkpoint(trailing), DataError);
}

TEST(Model, SampledGradientCheck) {
  auto c = small_config();
  const auto w = init_model(c, 16);
  const auto in = random_inputs(c, 16);
  Rng rng(16);
  std::vector<std::int32_t> mask(32 * 32), dmg(32 * 32);
  for (auto& v : mask) v = static_cast<std::int32_t>(rng.below(2));
  for (auto& v : dmg) v = static_cast<std::int32_t>(rng.below(4));
  const auto r = bm::testing::check_sampled(
      [&](Tape& t) {
        const auto out = model_forward(t, w, in.pre, in.post, in.blast);
        return metrics::multitask_loss(t, out.mask_logits, mask, out.damage_logits, dmg);
      },
      w.parameters(), 20, 16);
  EXPECT_LT(r.max_rel_err, 1e-3);
}
