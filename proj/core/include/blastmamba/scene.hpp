#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "blastmamba/blastfield.hpp"
#include "blastmamba/raster.hpp"
#include "blastmamba/rng.hpp"

namespace bm {

/// Synthetic data flavours. The pretraining profile imitates a generic
/// multi-hazard corpus: different ground and roof textures, a random damage
/// field instead of a blast, five label classes and no blast map.
enum class SceneProfile { kFinetune, kPretrain };

std::string to_string(SceneProfile p);
SceneProfile parse_profile(const std::string& s);

/// Number of damage label classes (including background) for a profile.
std::size_t damage_classes(SceneProfile p);

struct SceneOptions {
  SceneProfile profile = SceneProfile::kFinetune;
  std::size_t height = 64;
  std::size_t width = 64;
  std::size_t n_buildings = 10;
  std::size_t min_side = 6;
  std::size_t max_side = 14;
  double theta_destroyed_kpa = 35.0;
  double theta_damaged_kpa = 7.0;
  double label_noise = 0.05;
  std::size_t max_placement_tries = 60;

  void validate() const;
};

struct Building {
  std::size_t row0, col0, rows, cols;
  std::int32_t clean_class;  // before label noise
  std::int32_t label;        // after label noise
};

struct Scene {
  Image8 pre;     // H x W x 3
  Image8 post;    // H x W x 3
  Image8 mask;    // H x W x 1, {0, 1}
  Image8 damage;  // H x W x 1, 0 = background
  FloatRaster blast;  // H x W x 3
  blast::BlastScenario scenario;
  SceneProfile profile = SceneProfile::kFinetune;
  std::uint64_t seed = 0;
  std::vector<Building> buildings;
};

/// Damage grade from peak overpressure: 3 destroyed, 2 damaged, 1 intact.
std::int32_t blast_damage_class(double overpressure_kpa, double theta_destroyed, double theta_damaged);

/// Default-charge scenario with the epicenter drawn uniformly from the tile
/// enlarged by a quarter of its size on every side.
blast::BlastScenario sample_scenario(Rng& rng, std::size_t height, std::size_t width);

/// Rectangular, non-overlapping buildings on textured ground. Buildings that
/// cannot be placed within the retry budget are skipped. Finetune-profile
/// labels come from the overpressure at each building centroid; pretraining
/// labels from a random hazard field. Bit-identical for identical inputs.
Scene generate_scene(std::uint64_t seed, const blast::BlastScenario& scenario, const SceneOptions& options);

}  // namespace bm
