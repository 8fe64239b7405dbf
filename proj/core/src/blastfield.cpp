#include "blastmamba/blastfield.hpp"

#include <algorithm>
#include <cmath>

namespace bm::blast {

void BlastScenario::validate() const {
  if (!(charge_mass_kg > 0)) throw ConfigError("charge mass must be positive");
  if (!(meters_per_pixel > 0)) throw ConfigError("meters_per_pixel must be positive");
  if (!(burst_height_m >= 0)) throw ConfigError("burst height must be nonnegative");
}

double scaled_distance(double range_m, double mass_kg) {
  if (!(mass_kg > 0)) throw ConfigError("charge mass must be positive");
  if (range_m < 0) throw ConfigError("range must be nonnegative");
  return range_m / std::cbrt(mass_kg);
}

double slant_range(double ground_m, double height_m) { return std::hypot(ground_m, height_m); }

double overpressure_surrogate(double z) {
  z = std::max(z, kZMin);
  const double inv = 1.0 / z;
  return inv * (108.0 + inv * (-114.0 + inv * 1772.0));
}

double pixel_range(const BlastScenario& s, double row, double col) {
  const double dy = (row + 0.5 - s.epicenter_row) * s.meters_per_pixel;
  const double dx = (col + 0.5 - s.epicenter_col) * s.meters_per_pixel;
  return slant_range(std::hypot(dy, dx), s.burst_height_m);
}

FloatRaster render_blast_map(const BlastScenario& s, std::size_t height, std::size_t width) {
  s.validate();
  const double w13 = std::cbrt(s.charge_mass_kg);
  const double p_ref = std::log10(1.0 + overpressure_surrogate(kZMin));
  const double i_ref = std::log10(1.0 + overpressure_surrogate(kZMin) / kZMin);
  const double diag = slant_range(std::hypot(static_cast<double>(height), static_cast<double>(width)) * s.meters_per_pixel,
                                  s.burst_height_m);
  const double d_ref = std::log10(1.0 + diag);

  FloatRaster map = FloatRaster::blank(height, width, 3);
  for (std::size_t r = 0; r < height; ++r) {
    for (std::size_t c = 0; c < width; ++c) {
      const double range = pixel_range(s, static_cast<double>(r), static_cast<double>(c));
      const double z = std::max(range / w13, kZMin);
      const double p = overpressure_surrogate(z);
      map.at(r, c, 0) = static_cast<float>(std::clamp(std::log10(1.0 + p) / p_ref, 0.0, 1.0));
      map.at(r, c, 1) = static_cast<float>(std::clamp(std::log10(1.0 + p / z) / i_ref, 0.0, 1.0));
      map.at(r, c, 2) = static_cast<float>(std::clamp(std::log10(1.0 + range) / d_ref, 0.0, 1.0));
    }
  }
  return map;
}

}  // namespace bm::blast
