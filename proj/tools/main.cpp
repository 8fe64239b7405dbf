// blastmamba: generate | pretrain | finetune | evaluate | predict
//
// Settings are resolved as config file, then BM_SEED, then flags.

#include <CLI11.hpp>

#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "blastmamba/binary_io.hpp"
#include "blastmamba/error.hpp"
#include "blastmamba/pipeline.hpp"

namespace {

struct Flags {
  std::string config;
  std::vector<std::string> sets;
  std::map<std::string, std::string> values;
};

// Registers `--name` as an override of config key `key`.
void bind(CLI::App* app, Flags& f, const std::string& flag, const std::string& key, const std::string& help) {
  app->add_option_function<std::string>(
      flag, [&f, key](const std::string& v) { f.values[key] = v; }, help);
}

void bind_flag(CLI::App* app, Flags& f, const std::string& flag, const std::string& key, const std::string& help) {
  app->add_flag_callback(flag, [&f, key] { f.values[key] = "true"; }, help);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Blast damage assessment with a state-space vision network"};
  app.require_subcommand(1);

  Flags flags;
  const std::vector<std::pair<std::string, std::string>> stages = {
      {"generate", "Write a synthetic dataset"},
      {"pretrain", "Train a reusable model on a pretraining dataset"},
      {"finetune", "Adapt a pretrained model with blast fusion"},
      {"evaluate", "Score a checkpoint on one split"},
      {"predict", "Predict damage for one image pair"},
  };
  for (const auto& [name, desc] : stages) {
    auto* sub = app.add_subcommand(name, desc);
    sub->add_option("--config", flags.config, "key=value config file");
    bind(sub, flags, "--out", "out_dir", "Output directory");
    bind(sub, flags, "--seed", "seed", "Random seed");
    sub->add_option("--set", flags.sets, "Extra key=value override (repeatable)");
    if (name == "generate") {
      bind(sub, flags, "--n-scenes", "n_scenes", "Number of scenes");
      bind(sub, flags, "--profile", "profile", "finetune or pretrain");
    } else {
      bind(sub, flags, "--data", "data_dir", "Dataset directory");
      bind(sub, flags, "--blast-mode", "blast_mode", "none, distance_only or full");
    }
    if (name != "generate") bind(sub, flags, "--checkpoint", "checkpoint_in", "Input checkpoint");
    if (name == "pretrain" || name == "finetune") {
      bind(sub, flags, "--steps", "steps", "Optimizer steps");
      bind(sub, flags, "--lr", "learning_rate", "Learning rate");
      bind(sub, flags, "--batch-size", "batch_size", "Batch size");
    }
    if (name == "finetune") bind_flag(sub, flags, "--from-scratch", "from_scratch", "Train without a checkpoint");
    if (name == "evaluate") {
      bind(sub, flags, "--split", "split", "train, val or test");
      bind_flag(sub, flags, "--oracle", "oracle", "Score the labels themselves");
    }
    if (name == "predict") {
      bind(sub, flags, "--pre", "pre_image", "Pre-event PPM");
      bind(sub, flags, "--post", "post_image", "Post-event PPM");
      bind(sub, flags, "--blast", "blast_map", "Blast map BFR (optional)");
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? bm::pipeline::kExitOk : bm::pipeline::kExitConfig;
  }

  bm::RunConfig cfg;
  try {
    cfg.stage = bm::parse_stage(app.get_subcommands().front()->get_name());
    if (!flags.config.empty()) bm::apply_config_text(cfg, bm::io::read_text(flags.config));
    bm::apply_seed_env(cfg);
    for (const auto& [k, v] : flags.values) bm::set_config_value(cfg, k, v);
    for (const auto& kv : flags.sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw bm::ConfigError("--set expects key=value, got '" + kv + "'");
      bm::set_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
  } catch (const bm::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return bm::pipeline::kExitConfig;
  } catch (const bm::DataError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return bm::pipeline::kExitConfig;
  }
  return bm::pipeline::run(cfg, std::cout, std::cerr);
}
