#include "blastmamba/dataset.hpp"

#include <cstdio>

#include <nlohmann/json.hpp>

#include "blastmamba/binary_io.hpp"
#include "blastmamba/error.hpp"

namespace bm {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {
constexpr std::uint64_t kSceneTagBase = 0x5CE0'0000;
constexpr std::uint64_t kScenarioTag = 7;
}  // namespace

const std::vector<std::string>& SplitManifest::split(const std::string& name) const {
  if (name == "train") return train;
  if (name == "val") return val;
  if (name == "test") return test;
  throw ConfigError("unknown split '" + name + "' (expected train, val or test)");
}

std::string scene_id(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "scene_%03zu", index);
  return buf;
}

SplitManifest make_split(std::size_t n) {
  const std::size_t held = n >= 3 ? std::max<std::size_t>(1, n / 5) : 0;
  SplitManifest m;
  for (std::size_t i = 0; i < n; ++i) {
    if (i < n - 2 * held) m.train.push_back(scene_id(i));
    else if (i < n - held) m.val.push_back(scene_id(i));
    else m.test.push_back(scene_id(i));
  }
  return m;
}

Scene make_dataset_scene(const GenerateOptions& o, std::size_t index) {
  const auto seed = derive_seed(o.seed, kSceneTagBase + index);
  Rng rng(derive_seed(seed, kScenarioTag));
  const auto scenario = sample_scenario(rng, o.scene.height, o.scene.width);
  return generate_scene(seed, scenario, o.scene);
}

void write_scene(const fs::path& dir, const Scene& s) {
  write_pnm(dir / "pre.ppm", s.pre);
  write_pnm(dir / "post.ppm", s.post);
  write_pnm(dir / "mask.pgm", s.mask);
  write_pnm(dir / "damage.pgm", s.damage);
  write_bfr(dir / "blast.bfr", s.blast);
}

Scene load_scene(const fs::path& dir) {
  Scene s;
  s.pre = read_pnm(dir / "pre.ppm");
  s.post = read_pnm(dir / "post.ppm");
  s.mask = read_pnm(dir / "mask.pgm");
  s.damage = read_pnm(dir / "damage.pgm");
  s.blast = read_bfr(dir / "blast.bfr");
  const auto h = s.pre.height, w = s.pre.width;
  const auto same = [&](std::size_t hh, std::size_t ww) { return hh == h && ww == w; };
  if (s.pre.channels != 3 || s.post.channels != 3 || !same(s.post.height, s.post.width)) {
    throw DataError(dir.string() + ": pre/post images must be RGB of equal size");
  }
  if (s.mask.channels != 1 || s.damage.channels != 1 || !same(s.mask.height, s.mask.width) ||
      !same(s.damage.height, s.damage.width)) {
    throw DataError(dir.string() + ": mask and damage must be single-channel " + std::to_string(h) + "x" +
                    std::to_string(w));
  }
  if (s.blast.channels != 3 || !same(s.blast.height, s.blast.width)) {
    throw DataError(dir.string() + ": blast map must be " + std::to_string(h) + "x" + std::to_string(w) + "x3");
  }
  return s;
}

void write_manifest(const fs::path& root, const DatasetInfo& info) {
  json j;
  j["profile"] = to_string(info.profile);
  j["height"] = info.height;
  j["width"] = info.width;
  j["seed"] = info.seed;
  j["train"] = info.split.train;
  j["val"] = info.split.val;
  j["test"] = info.split.test;
  io::write_text(root / "manifest.json", j.dump(2) + "\n");
}

DatasetInfo read_manifest(const fs::path& root) {
  json j;
  try {
    j = json::parse(io::read_text(root / "manifest.json"));
    DatasetInfo info;
    info.profile = parse_profile(j.at("profile").get<std::string>());
    info.height = j.at("height").get<std::size_t>();
    info.width = j.at("width").get<std::size_t>();
    info.seed = j.at("seed").get<std::uint64_t>();
    info.split.train = j.at("train").get<std::vector<std::string>>();
    info.split.val = j.at("val").get<std::vector<std::string>>();
    info.split.test = j.at("test").get<std::vector<std::string>>();
    return info;
  } catch (const json::exception& e) {
    throw DataError(root.string() + "/manifest.json: " + e.what());
  }
}

DatasetInfo generate_dataset(const fs::path& root, const GenerateOptions& o) {
  if (o.n_scenes == 0) throw ConfigError("n_scenes must be at least 1");
  o.scene.validate();
  DatasetInfo info{o.scene.profile, o.scene.height, o.scene.width, o.seed, make_split(o.n_scenes)};
  for (std::size_t i = 0; i < o.n_scenes; ++i) write_scene(root / "scenes" / scene_id(i), make_dataset_scene(o, i));
  write_manifest(root, info);
  return info;
}

std::vector<Scene> load_split(const fs::path& root, const DatasetInfo& info, const std::string& split) {
  std::vector<Scene> out;
  for (const auto& id : info.split.split(split)) {
    auto s = load_scene(root / "scenes" / id);
    if (s.pre.height != info.height || s.pre.width != info.width) {
      throw DataError(id + ": size differs from manifest");
    }
    s.profile = info.profile;
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace bm
