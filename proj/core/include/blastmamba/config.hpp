#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>

#include "blastmamba/network.hpp"
#include "blastmamba/scene.hpp"
#include "blastmamba/training.hpp"

namespace bm {

enum class Stage { kGenerate, kPretrain, kFinetune, kEvaluate, kPredict };

std::string to_string(Stage s);
Stage parse_stage(const std::string& s);

/// Desk-scale defaults; the 10:1 pretrain/fine-tune ratio is kept.
inline constexpr double kPretrainLearningRate = 3e-3;
inline constexpr double kFinetuneLearningRate = 3e-4;

/// Flat key=value settings shared by every subcommand. Unset optional values
/// fall back to stage defaults.
struct RunConfig {
  Stage stage = Stage::kGenerate;
  std::string out_dir = "out";
  std::string data_dir;
  std::string checkpoint_in;
  std::optional<double> learning_rate;
  double weight_decay = 0.01;
  std::size_t steps = 300;
  std::size_t batch_size = 2;
  std::uint64_t seed = 0;
  BlastMode blast_mode = BlastMode::kFull;

  // generate
  std::size_t n_scenes = 50;
  SceneProfile profile = SceneProfile::kFinetune;
  std::size_t n_buildings = 10;
  double label_noise = 0.05;

  // finetune: permit training without a pretrained checkpoint
  bool from_scratch = false;
  // evaluate: score the labels themselves instead of model output
  bool oracle = false;
  std::string split = "test";

  // predict
  std::string pre_image;
  std::string post_image;
  std::string blast_map;

  ModelConfig model;

  double effective_learning_rate() const;
  SceneOptions scene_options() const;

  /// Throws ConfigError for out-of-range values.
  void validate() const;
};

/// Parses "key = value" lines; '#' starts a comment. Unknown keys throw.
std::map<std::string, std::string> parse_key_values(const std::string& text);

/// Applies one setting; throws ConfigError for unknown keys or bad values.
void set_config_value(RunConfig& c, const std::string& key, const std::string& value);

/// Applies every pair in order.
void apply_config_text(RunConfig& c, const std::string& text);

/// Reads BM_SEED from the environment, if set, and overrides `c.seed`.
void apply_seed_env(RunConfig& c);

}  // namespace bm
