#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "blastmamba/scene.hpp"

namespace bm {

/// Scene ids per split. Generated splits use a 3:1:1 ratio: validation and
/// test each get floor(N / 5) scenes (at least one when N >= 3) and training
/// gets the rest, assigned in id order.
struct SplitManifest {
  std::vector<std::string> train;
  std::vector<std::string> val;
  std::vector<std::string> test;

  const std::vector<std::string>& split(const std::string& name) const;
  bool operator==(const SplitManifest&) const = default;
};

SplitManifest make_split(std::size_t n_scenes);
std::string scene_id(std::size_t index);

struct DatasetInfo {
  SceneProfile profile = SceneProfile::kFinetune;
  std::size_t height = 64;
  std::size_t width = 64;
  std::uint64_t seed = 0;
  SplitManifest split;
};

struct GenerateOptions {
  std::size_t n_scenes = 50;
  std::uint64_t seed = 0;
  SceneOptions scene;
};

/// Scene i is fully determined by (seed, i); the epicenter is drawn per scene.
Scene make_dataset_scene(const GenerateOptions& o, std::size_t index);

/// Writes scenes/<id>/{pre.ppm, post.ppm, mask.pgm, damage.pgm, blast.bfr}
/// and manifest.json under `root`.
DatasetInfo generate_dataset(const std::filesystem::path& root, const GenerateOptions& o);

void write_scene(const std::filesystem::path& dir, const Scene& s);
/// Rasters only; scenario metadata is not reloaded.
Scene load_scene(const std::filesystem::path& dir);

void write_manifest(const std::filesystem::path& root, const DatasetInfo& info);
DatasetInfo read_manifest(const std::filesystem::path& root);

/// Loads every scene of one split ("train", "val" or "test") in manifest order.
std::vector<Scene> load_split(const std::filesystem::path& root, const DatasetInfo& info, const std::string& split);

}  // namespace bm
