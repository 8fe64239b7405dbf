#include "blastmamba/pipeline.hpp"

#include <cstdio>
#include <ostream>

#include "blastmamba/binary_io.hpp"
#include "blastmamba/checkpoint.hpp"
#include "blastmamba/error.hpp"
#include "blastmamba/training.hpp"

namespace bm::pipeline {

namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kInitTag = 0x1417;
constexpr std::uint64_t kHeadTag = 0x4EAD;
constexpr std::uint64_t kShuffleTag = 0x5A0F;

fs::path require_dir(const std::string& dir, const char* key) {
  if (dir.empty()) throw ConfigError(std::string(key) + " is required");
  return dir;
}

DatasetInfo load_info(const RunConfig& c) {
  const auto root = require_dir(c.data_dir, "data_dir");
  if (!fs::exists(root / "manifest.json")) throw DataError("no manifest.json in " + root.string());
  const auto info = read_manifest(root);
  if (info.height != c.model.height || info.width != c.model.width) {
    throw DataError("dataset is " + std::to_string(info.height) + "x" + std::to_string(info.width) + ", model expects " +
                    std::to_string(c.model.height) + "x" + std::to_string(c.model.width));
  }
  return info;
}

ModelWeights load_model(const std::string& path) {
  if (path.empty()) throw ConfigError("checkpoint_in is required");
  if (!fs::exists(path)) throw DataError("checkpoint not found: " + path);
  return load_checkpoint(path);
}

TrainResult fit(ModelWeights& w, const std::vector<Sample>& data, const RunConfig& c, std::ostream& log) {
  TrainOptions o;
  o.learning_rate = c.effective_learning_rate();
  o.weight_decay = c.weight_decay;
  o.steps = c.steps;
  o.batch_size = c.batch_size;
  o.seed = derive_seed(c.seed, kShuffleTag);
  const std::size_t every = std::max<std::size_t>(1, c.steps / 10);
  return train(w, data, o, [&](std::size_t step, double loss) {
    if (step % every == 0 || step + 1 == c.steps) log << "step " << step << " loss " << loss << '\n';
  });
}

void save_outputs(const RunConfig& c, const ModelWeights& w, const TrainResult& r, const char* stage,
                  std::ostream& log) {
  const fs::path out = c.out_dir;
  save_checkpoint(out / kCheckpointFile, w);
  io::write_text(out / kLossCurveFile, loss_curve_csv(r));
  char buf[128];
  std::snprintf(buf, sizeof buf, "%s wall-clock: %.2f s for %zu steps\n", stage, r.seconds, r.losses.size());
  io::write_text(out / "timing.txt", buf);
  log << buf << "wrote " << (out / kCheckpointFile).string() << '\n';
}

Image8 overlay_image(const std::vector<std::int32_t>& damage, std::size_t h, std::size_t w) {
  Image8 img = Image8::blank(h, w, 3);
  for (std::size_t i = 0; i < damage.size(); ++i) {
    const auto col = palette_color(damage[i]);
    for (std::size_t k = 0; k < 3; ++k) img.data[i * 3 + k] = col[k];
  }
  return img;
}

void fold_if_pretrained(const ModelWeights& w, std::vector<std::int32_t>& pred) {
  if (w.config.damage_classes == kPretrainDamageClasses) {
    for (auto& v : pred) v = fold_pretrain_class(v);
  }
}

}  // namespace

std::uint64_t head_seed(std::uint64_t seed) { return derive_seed(seed, kHeadTag); }

std::array<std::uint8_t, 3> palette_color(std::int32_t c) {
  switch (c) {
    case 0: return {0, 0, 0};
    case 1: return {0, 200, 0};
    case 2: return {255, 220, 0};
    case 3: return {220, 0, 0};
    default: throw ConfigError("no palette colour for class " + std::to_string(c));
  }
}

DatasetInfo cmd_generate(const RunConfig& c, std::ostream& log) {
  c.validate();
  GenerateOptions o;
  o.n_scenes = c.n_scenes;
  o.seed = c.seed;
  o.scene = c.scene_options();
  const auto info = generate_dataset(c.out_dir, o);
  log << "generated " << c.n_scenes << " " << to_string(c.profile) << " scenes in " << c.out_dir << " (train "
      << info.split.train.size() << ", val " << info.split.val.size() << ", test " << info.split.test.size() << ")\n";
  return info;
}

ModelWeights cmd_pretrain(const RunConfig& c, std::ostream& log) {
  c.validate();
  const auto info = load_info(c);
  ModelConfig mc = c.model;
  mc.damage_classes = damage_classes(info.profile);
  ModelWeights w = init_model(mc, derive_seed(c.seed, kInitTag));
  const auto data = make_samples(load_split(c.data_dir, info, "train"), BlastMode::kNone);
  log << "pretraining on " << data.size() << " scenes, lr " << c.effective_learning_rate() << ", " << c.steps
      << " steps\n";
  const auto r = fit(w, data, c, log);
  save_outputs(c, w, r, "pretrain", log);
  return w;
}

ModelWeights cmd_finetune(const RunConfig& c, std::ostream& log) {
  c.validate();
  const auto info = load_info(c);
  const auto classes = damage_classes(info.profile);
  ModelWeights w;
  if (!c.checkpoint_in.empty()) {
    const auto base = load_model(c.checkpoint_in);
    if (base.config.height != info.height || base.config.width != info.width) {
      throw DataError("checkpoint was trained at " + std::to_string(base.config.height) + "x" +
                      std::to_string(base.config.width) + ", dataset is " + std::to_string(info.height) + "x" +
                      std::to_string(info.width));
    }
    w = swap_head(base, classes, head_seed(c.seed));
  } else if (c.from_scratch) {
    ModelConfig mc = c.model;
    mc.damage_classes = classes;
    w = init_model(mc, derive_seed(c.seed, kInitTag));
  } else {
    throw ConfigError("finetune needs checkpoint_in (or from_scratch=true)");
  }
  const auto data = make_samples(load_split(c.data_dir, info, "train"), c.blast_mode);
  log << "fine-tuning on " << data.size() << " scenes, blast_mode " << to_string(c.blast_mode) << ", lr "
      << c.effective_learning_rate() << ", " << c.steps << " steps\n";
  const auto r = fit(w, data, c, log);
  save_outputs(c, w, r, "finetune", log);
  return w;
}

metrics::MetricsReport cmd_evaluate(const RunConfig& c, std::ostream& log) {
  c.validate();
  const auto info = load_info(c);
  const auto classes = damage_classes(info.profile);
  if (classes != kFinetuneDamageClasses) throw DataError("evaluation needs a fine-tuning profile dataset");
  const auto& ids = info.split.split(c.split);
  const auto scenes = load_split(c.data_dir, info, c.split);
  if (scenes.empty()) throw DataError("split '" + c.split + "' is empty");

  ModelWeights w;
  if (!c.oracle) {
    w = load_model(c.checkpoint_in);
    if (w.config.damage_classes != classes && w.config.damage_classes != kPretrainDamageClasses) {
      throw ConfigError("checkpoint head has " + std::to_string(w.config.damage_classes) + " classes");
    }
  }

  const fs::path out = c.out_dir;
  metrics::Evaluator ev(classes);
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    const auto sample = make_sample(scenes[i], c.blast_mode);
    std::vector<std::int32_t> pred;
    if (c.oracle) {
      pred = sample.damage;
    } else {
      pred = predict(w, sample).damage;
      fold_if_pretrained(w, pred);
    }
    ev.add_scene(pred, sample.damage);
    write_pnm(out / "predictions" / (ids[i] + ".pgm"), labels_to_image(pred, info.height, info.width));
  }
  const auto report = ev.report();
  io::write_text(out / kMetricsFile, report.to_json());
  log << report.to_json();
  return report;
}

void cmd_predict(const RunConfig& c, std::ostream& log) {
  c.validate();
  const auto w = load_model(c.checkpoint_in);
  if (c.pre_image.empty() || c.post_image.empty()) throw ConfigError("predict needs pre_image and post_image");
  const std::size_t h = w.config.height, wd = w.config.width;
  const auto expect = std::to_string(h) + "x" + std::to_string(wd);
  const auto check = [&](std::size_t hh, std::size_t ww, std::size_t ch, const std::string& what) {
    if (hh != h || ww != wd || ch != 3) {
      throw DataError(what + " is " + std::to_string(hh) + "x" + std::to_string(ww) + "x" + std::to_string(ch) +
                      ", model expects " + expect + "x3");
    }
  };
  const auto pre = read_pnm(c.pre_image);
  const auto post = read_pnm(c.post_image);
  check(pre.height, pre.width, pre.channels, "pre_image");
  check(post.height, post.width, post.channels, "post_image");
  FloatRaster blast = FloatRaster::blank(h, wd, 3);
  if (!c.blast_map.empty()) {
    blast = read_bfr(c.blast_map);
    check(blast.height, blast.width, blast.channels, "blast_map");
  }

  Sample s;
  s.pre = image_to_tensor(pre);
  s.post = image_to_tensor(post);
  s.blast = apply_blast_mode(raster_to_tensor(blast), c.blast_mode);
  auto p = predict(w, s);
  fold_if_pretrained(w, p.damage);

  const fs::path out = c.out_dir;
  write_pnm(out / "mask.pgm", labels_to_image(p.mask, h, wd));
  write_pnm(out / "damage.pgm", labels_to_image(p.damage, h, wd));
  write_pnm(out / "overlay.ppm", overlay_image(p.damage, h, wd));
  log << "wrote mask.pgm, damage.pgm, overlay.ppm to " << out.string() << '\n';
}

int run(const RunConfig& c, std::ostream& log, std::ostream& err) {
  try {
    switch (c.stage) {
      case Stage::kGenerate: cmd_generate(c, log); break;
      case Stage::kPretrain: cmd_pretrain(c, log); break;
      case Stage::kFinetune: cmd_finetune(c, log); break;
      case Stage::kEvaluate: cmd_evaluate(c, log); break;
      case Stage::kPredict: cmd_predict(c, log); break;
    }
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const ShapeError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const fs::filesystem_error& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

}  // namespace bm::pipeline
