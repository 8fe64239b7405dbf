#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "blastmamba/layers.hpp"
#include "blastmamba/tensor.hpp"
#include "blastmamba/vss.hpp"

namespace bm {

inline constexpr std::size_t kLevels = 4;
inline constexpr std::size_t kPatchSize = 4;
inline constexpr std::size_t kMaskClasses = 2;
/// Background + four damage grades (multi-hazard pretraining profile).
inline constexpr std::size_t kPretrainDamageClasses = 5;
/// Background, intact, damaged, destroyed.
inline constexpr std::size_t kFinetuneDamageClasses = 4;

/// Which map feeds the upsampled term of the residual-attention fusion.
enum class ResidualSource {
  kDecoderOutput,  // previous decoder stage D_{l-1} (default)
  kStssOutput,     // literal variant: previous stage's STSS output U_{l-1}
};

struct ModelConfig {
  std::size_t height = 64;
  std::size_t width = 64;
  std::array<std::size_t, kLevels> channels{8, 16, 32, 64};
  std::array<std::size_t, kLevels> blocks{1, 1, 1, 1};
  std::size_t state_dim = 8;
  double expand_ratio = 2.0;
  std::size_t mask_classes = kMaskClasses;
  std::size_t damage_classes = kFinetuneDamageClasses;
  ResidualSource residual = ResidualSource::kDecoderOutput;

  /// Throws ConfigError on indivisible sizes, non-increasing channels, etc.
  void validate() const;

  /// Spatial size of pyramid level l (0-based): (H / 2^(l+2), W / 2^(l+2)).
  std::array<std::size_t, 2> level_size(std::size_t level) const;

  /// Flat key=value text, one entry per line; inverse of parse().
  std::string serialize() const;
  static ModelConfig parse(const std::string& text);

  bool operator==(const ModelConfig&) const = default;
};

struct EncoderWeights {
  Linear patch_embed;  // 48 -> C1
  Tensor patch_ln_gamma, patch_ln_beta;
  std::array<Linear, kLevels - 1> down;  // 2x2 patch merge: 4*C_{l-1} -> C_l
  std::array<std::vector<vss::VSSWeights>, kLevels> stages;
};

struct MaskDecoderWeights {
  std::array<Linear, kLevels> skip;         // C_l -> C_l
  std::array<Linear, kLevels - 1> lateral;  // C_{l+1} -> C_l, applied before upsampling
  std::array<vss::VSSWeights, kLevels> blocks;
  Linear head;  // C1 -> mask classes
};

struct BlastEncoderWeights {
  std::array<Linear, kLevels> proj;  // 3 -> C_l
};

struct DamageDecoderWeights {
  std::array<vss::STSSWeights, kLevels> stss;
  std::array<Linear, kLevels - 1> lateral;  // C_{l+1} -> C_l
  Linear head;                              // C1 -> damage classes
};

/// All trainable state. The image encoder is shared by the pre- and
/// post-event branches.
struct ModelWeights {
  ModelConfig config;
  EncoderWeights encoder;
  MaskDecoderWeights mask_decoder;
  BlastEncoderWeights blast_encoder;
  DamageDecoderWeights damage_decoder;

  /// Every parameter with a stable hierarchical name, in a fixed order.
  ParamList named_parameters() const;
  std::vector<Tensor> parameters() const;
  std::size_t parameter_count() const;
};

ModelWeights init_model(const ModelConfig& config, std::uint64_t seed);

/// Deep copy; the result shares no storage with `w`.
ModelWeights clone_weights(const ModelWeights& w);

/// Replaces the damage head with a freshly initialised one producing
/// `damage_classes` logits. Every other tensor is carried over unchanged.
ModelWeights swap_head(const ModelWeights& w, std::size_t damage_classes, std::uint64_t seed);

/// Four feature maps at H/4, H/8, H/16, H/32 with channels C1..C4.
struct FeaturePyramid {
  std::array<Tensor, kLevels> levels;
};

/// Non-overlapping 4x4 patches flattened to 48 values, embedded to C1, then LayerNorm.
Tensor patch_partition(Tape& tape, const Tensor& image, const EncoderWeights& w);

FeaturePyramid encoder_forward(Tape& tape, const Tensor& image, const ModelWeights& w);

/// Building-segmentation logits [H x W x 2] from the pre-event pyramid only.
Tensor mask_decoder_forward(Tape& tape, const FeaturePyramid& pre, const ModelWeights& w);

/// Per-level blast features: bilinear resize to each level, then 1x1 conv to C_l.
std::array<Tensor, kLevels> blast_encoder_forward(Tape& tape, const Tensor& blast_map, const ModelWeights& w);

/// Damage logits [H x W x T]. Entries of `blast` may be undefined, which
/// runs the decoder with no blast gate at all.
Tensor damage_decoder_forward(Tape& tape, const FeaturePyramid& pre, const FeaturePyramid& post,
                              const std::array<Tensor, kLevels>& blast, const ModelWeights& w);

struct ModelOutput {
  Tensor mask_logits;    // [H x W x 2]
  Tensor damage_logits;  // [H x W x T]
};

/// Full forward pass. `blast_map` [H x W x 3] may be undefined for a blast-free run.
ModelOutput model_forward(Tape& tape, const ModelWeights& w, const Tensor& pre_image, const Tensor& post_image,
                          const Tensor& blast_map);

/// Per-pixel argmax over the last axis; ties go to the lowest index.
std::vector<std::int32_t> classify(const Tensor& logits);

}  // namespace bm
