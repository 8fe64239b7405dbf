#include "blastmamba/scene.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "blastmamba/error.hpp"

namespace bm {

namespace {

enum StreamTag : std::uint64_t { kLayoutStream = 1, kGroundStream, kRoofStream, kPostStream, kNoiseStream, kHazardStream };

using Rgb = std::array<double, 3>;

struct Palette {
  Rgb ground;
  double ground_noise;
  std::vector<Rgb> roofs;
  Rgb rubble;
};

const Palette& palette(SceneProfile p) {
  static const Palette urban{{112, 106, 96}, 14, {{150, 150, 155}, {170, 95, 80}, {95, 120, 160}, {200, 190, 170}}, {120, 110, 100}};
  static const Palette rural{{78, 112, 66}, 10, {{140, 95, 60}, {225, 225, 215}, {110, 60, 50}}, {110, 85, 55}};
  return p == SceneProfile::kFinetune ? urban : rural;
}

std::uint8_t to_u8(double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); }

void put_rgb(Image8& img, std::size_t r, std::size_t c, const Rgb& v) {
  for (std::size_t k = 0; k < 3; ++k) img.at(r, c, k) = to_u8(v[k]);
}

Rgb rgb_at(const Image8& img, std::size_t r, std::size_t c) {
  return {static_cast<double>(img.at(r, c, 0)), static_cast<double>(img.at(r, c, 1)), static_cast<double>(img.at(r, c, 2))};
}

// Ground: base colour, two low-frequency waves and per-pixel grain. The
// pretraining profile adds field stripes so the two domains look different.
void paint_ground(Image8& img, Rng& rng, SceneProfile profile) {
  const auto& pal = palette(profile);
  const double fy = rng.uniform(0.05, 0.2), fx = rng.uniform(0.05, 0.2);
  const double py = rng.uniform(0, 2 * std::numbers::pi), px = rng.uniform(0, 2 * std::numbers::pi);
  const double stripe = rng.uniform(0.3, 0.8);
  for (std::size_t r = 0; r < img.height; ++r) {
    for (std::size_t c = 0; c < img.width; ++c) {
      double shade = 8.0 * std::sin(fy * static_cast<double>(r) + py) + 8.0 * std::sin(fx * static_cast<double>(c) + px);
      if (profile == SceneProfile::kPretrain) shade += 10.0 * std::sin(stripe * static_cast<double>(r + c));
      const double grain = rng.uniform(-pal.ground_noise, pal.ground_noise);
      put_rgb(img, r, c, {pal.ground[0] + shade + grain, pal.ground[1] + shade + grain, pal.ground[2] + shade + grain});
    }
  }
}

bool overlaps(const Building& a, std::size_t r0, std::size_t c0, std::size_t rows, std::size_t cols) {
  // One-pixel gap keeps footprints separable.
  return !(r0 >= a.row0 + a.rows + 1 || a.row0 >= r0 + rows + 1 || c0 >= a.col0 + a.cols + 1 || a.col0 >= c0 + cols + 1);
}

std::vector<Building> place_buildings(Rng& rng, const SceneOptions& o) {
  std::vector<Building> out;
  const std::size_t max_side = std::min({o.max_side, o.height, o.width});
  const std::size_t min_side = std::min(o.min_side, max_side);
  for (std::size_t b = 0; b < o.n_buildings; ++b) {
    for (std::size_t attempt = 0; attempt < o.max_placement_tries; ++attempt) {
      const std::size_t rows = min_side + rng.below(max_side - min_side + 1);
      const std::size_t cols = min_side + rng.below(max_side - min_side + 1);
      const std::size_t r0 = rng.below(o.height - rows + 1);
      const std::size_t c0 = rng.below(o.width - cols + 1);
      const bool clash = std::any_of(out.begin(), out.end(), [&](const Building& e) { return overlaps(e, r0, c0, rows, cols); });
      if (!clash) {
        out.push_back({r0, c0, rows, cols, 0, 0});
        break;
      }
    }
  }
  return out;
}

// Smooth random field in [0, 1] built from a few Gaussian bumps.
struct HazardField {
  struct Bump {
    double row, col, sigma, amp;
  };
  std::vector<Bump> bumps;

  double at(double r, double c) const {
    double v = 0;
    for (const auto& b : bumps) {
      const double d2 = (r - b.row) * (r - b.row) + (c - b.col) * (c - b.col);
      v += b.amp * std::exp(-d2 / (2 * b.sigma * b.sigma));
    }
    return std::min(v, 1.0);
  }
};

HazardField sample_hazard(Rng& rng, std::size_t h, std::size_t w) {
  HazardField f;
  const std::size_t n = 2 + rng.below(2);
  const double scale = static_cast<double>(std::max(h, w));
  for (std::size_t i = 0; i < n; ++i) {
    f.bumps.push_back({rng.uniform(0, static_cast<double>(h)), rng.uniform(0, static_cast<double>(w)),
                       rng.uniform(0.15, 0.35) * scale, rng.uniform(0.6, 1.1)});
  }
  return f;
}

std::int32_t hazard_class(double v) {
  if (v >= 0.75) return 4;
  if (v >= 0.5) return 3;
  if (v >= 0.28) return 2;
  return 1;
}

// Shifts a grade by one step, reflecting at the ends so noise always changes it.
std::int32_t perturb(std::int32_t cls, std::int32_t max_cls, bool up) {
  if (max_cls <= 1) return cls;
  if (cls <= 1) return 2;
  if (cls >= max_cls) return max_cls - 1;
  return up ? cls + 1 : cls - 1;
}

// Darkens a random sub-rectangle covering roughly `lo`..`hi` of the roof and
// sprinkles crack pixels over the whole footprint.
void paint_partial_damage(Image8& post, Rng& rng, const Building& b, double lo, double hi, double factor,
                          double crack_rate) {
  const double frac = rng.uniform(lo, hi);
  const bool horizontal = rng.bernoulli(0.5);
  const std::size_t span = horizontal ? b.cols : b.rows;
  const auto extent = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(frac * static_cast<double>(span))));
  const std::size_t start = rng.below(span - std::min(extent, span) + 1);
  for (std::size_t r = b.row0; r < b.row0 + b.rows; ++r) {
    for (std::size_t c = b.col0; c < b.col0 + b.cols; ++c) {
      const std::size_t pos = horizontal ? c - b.col0 : r - b.row0;
      Rgb v = rgb_at(post, r, c);
      const bool in_patch = pos >= start && pos < start + extent;
      const bool crack = rng.bernoulli(crack_rate);
      double f = in_patch ? factor : 1.0;
      if (crack) f *= 0.6;
      for (auto& x : v) x *= f;
      put_rgb(post, r, c, v);
    }
  }
}

void paint_rubble(Image8& post, Rng& rng, const Building& b, const Rgb& base) {
  for (std::size_t r = b.row0; r < b.row0 + b.rows; ++r) {
    for (std::size_t c = b.col0; c < b.col0 + b.cols; ++c) {
      const double t = rng.uniform(-45, 45);
      put_rgb(post, r, c, {base[0] + t + rng.uniform(-10, 10), base[1] + t + rng.uniform(-10, 10), base[2] + t});
    }
  }
}

}  // namespace

std::string to_string(SceneProfile p) { return p == SceneProfile::kFinetune ? "finetune" : "pretrain"; }

SceneProfile parse_profile(const std::string& s) {
  if (s == "finetune") return SceneProfile::kFinetune;
  if (s == "pretrain") return SceneProfile::kPretrain;
  throw ConfigError("profile must be 'finetune' or 'pretrain', got '" + s + "'");
}

std::size_t damage_classes(SceneProfile p) { return p == SceneProfile::kFinetune ? 4 : 5; }

void SceneOptions::validate() const {
  if (height == 0 || width == 0) throw ConfigError("scene size must be positive");
  if (n_buildings == 0) throw ConfigError("n_buildings must be at least 1");
  if (min_side == 0 || min_side > max_side) throw ConfigError("building side range is invalid");
  if (!(theta_destroyed_kpa > theta_damaged_kpa && theta_damaged_kpa > 0)) {
    throw ConfigError("damage thresholds must satisfy theta_destroyed > theta_damaged > 0");
  }
  if (!(label_noise >= 0 && label_noise <= 1)) throw ConfigError("label_noise must be in [0, 1]");
}

std::int32_t blast_damage_class(double overpressure_kpa, double theta_destroyed, double theta_damaged) {
  if (overpressure_kpa >= theta_destroyed) return 3;
  if (overpressure_kpa >= theta_damaged) return 2;
  return 1;
}

blast::BlastScenario sample_scenario(Rng& rng, std::size_t height, std::size_t width) {
  blast::BlastScenario s;
  const double h = static_cast<double>(height), w = static_cast<double>(width);
  s.epicenter_row = rng.uniform(-0.25 * h, 1.25 * h);
  s.epicenter_col = rng.uniform(-0.25 * w, 1.25 * w);
  return s;
}

Scene generate_scene(std::uint64_t seed, const blast::BlastScenario& scenario, const SceneOptions& o) {
  o.validate();
  scenario.validate();
  const auto& pal = palette(o.profile);
  const auto max_cls = static_cast<std::int32_t>(damage_classes(o.profile) - 1);

  Scene s;
  s.seed = seed;
  s.profile = o.profile;
  s.scenario = scenario;

  Rng layout(derive_seed(seed, kLayoutStream));
  s.buildings = place_buildings(layout, o);

  HazardField hazard;
  if (o.profile == SceneProfile::kPretrain) {
    Rng hz(derive_seed(seed, kHazardStream));
    hazard = sample_hazard(hz, o.height, o.width);
  }

  Rng noise(derive_seed(seed, kNoiseStream));
  for (auto& b : s.buildings) {
    const double cr = static_cast<double>(b.row0) + static_cast<double>(b.rows) / 2.0 - 0.5;
    const double cc = static_cast<double>(b.col0) + static_cast<double>(b.cols) / 2.0 - 0.5;
    if (o.profile == SceneProfile::kFinetune) {
      const double p = blast::overpressure_surrogate(
          blast::scaled_distance(blast::pixel_range(scenario, cr, cc), scenario.charge_mass_kg));
      b.clean_class = blast_damage_class(p, o.theta_destroyed_kpa, o.theta_damaged_kpa);
    } else {
      b.clean_class = hazard_class(hazard.at(cr, cc));
    }
    // Both draws happen for every building so the stream stays aligned.
    const bool flip = noise.uniform() < o.label_noise;
    const bool up = noise.uniform() < 0.5;
    b.label = flip ? perturb(b.clean_class, max_cls, up) : b.clean_class;
  }

  s.pre = Image8::blank(o.height, o.width, 3);
  Rng ground(derive_seed(seed, kGroundStream));
  paint_ground(s.pre, ground, o.profile);

  s.mask = Image8::blank(o.height, o.width, 1);
  s.damage = Image8::blank(o.height, o.width, 1);
  Rng roof(derive_seed(seed, kRoofStream));
  for (const auto& b : s.buildings) {
    const Rgb base = pal.roofs[roof.below(pal.roofs.size())];
    const double tint = roof.uniform(-15, 15);
    for (std::size_t r = b.row0; r < b.row0 + b.rows; ++r) {
      for (std::size_t c = b.col0; c < b.col0 + b.cols; ++c) {
        const bool edge = r == b.row0 || c == b.col0 || r + 1 == b.row0 + b.rows || c + 1 == b.col0 + b.cols;
        const double e = edge ? -25.0 : 0.0;
        const double g = roof.uniform(-5, 5);
        put_rgb(s.pre, r, c, {base[0] + tint + e + g, base[1] + tint + e + g, base[2] + tint + e + g});
        s.mask.at(r, c) = 1;
        s.damage.at(r, c) = static_cast<std::uint8_t>(b.label);
      }
    }
  }

  // Post image: same scene under slightly different illumination and sensor
  // noise, with damage drawn from the physical (noise-free) grade.
  s.post = s.pre;
  Rng post(derive_seed(seed, kPostStream));
  const double gain = post.uniform(0.93, 1.07);
  for (auto& px : s.post.data) px = to_u8(static_cast<double>(px) * gain + post.uniform(-4, 4));
  for (const auto& b : s.buildings) {
    if (o.profile == SceneProfile::kFinetune) {
      if (b.clean_class == 2) paint_partial_damage(s.post, post, b, 0.3, 0.7, 0.55, 0.12);
      if (b.clean_class == 3) paint_rubble(s.post, post, b, pal.rubble);
    } else {
      if (b.clean_class == 2) paint_partial_damage(s.post, post, b, 0.15, 0.35, 0.7, 0.05);
      if (b.clean_class == 3) paint_partial_damage(s.post, post, b, 0.5, 0.9, 0.5, 0.15);
      if (b.clean_class == 4) paint_rubble(s.post, post, b, pal.rubble);
    }
  }

  s.blast = o.profile == SceneProfile::kFinetune ? blast::render_blast_map(scenario, o.height, o.width)
                                                 : FloatRaster::blank(o.height, o.width, 3);
  return s;
}

}  // namespace bm
