#pragma once

#include <cstddef>

#include "blastmamba/raster.hpp"

namespace bm::blast {

/// Scaled distances below this are clamped before evaluating the surrogate.
inline constexpr double kZMin = 0.05;

struct BlastScenario {
  double charge_mass_kg = 500'000.0;  // TNT equivalent
  double burst_height_m = 10.0;
  double epicenter_row = 0.0;  // pixel coordinates, may lie off-tile
  double epicenter_col = 0.0;
  double meters_per_pixel = 25.0;

  /// Throws ConfigError on a nonpositive mass or pixel size or a negative height.
  void validate() const;
};

/// Hopkinson-Cranz scaled distance Z = R / W^(1/3), in m/kg^(1/3).
double scaled_distance(double range_m, double mass_kg);

/// Distance from the charge to a ground point `ground_m` away from ground zero.
double slant_range(double ground_m, double height_m);

/// Peak incident overpressure in kPa: 1772/Z^3 - 114/Z^2 + 108/Z, Z clamped to kZMin.
/// Strictly decreasing for all Z > 0.
double overpressure_surrogate(double z);

/// Slant range in metres from the charge to the centre of pixel (r, c).
double pixel_range(const BlastScenario& s, double row, double col);

/// Three-channel map, each channel in [0, 1]:
///   0: log10(1 + P) / log10(1 + P(Z_min))
///   1: log10(1 + I) / log10(1 + I(Z_min)), impulse proxy I = P * W^(1/3) / R
///   2: log10(1 + R) / log10(1 + D), D = slant range across the tile diagonal
FloatRaster render_blast_map(const BlastScenario& s, std::size_t height, std::size_t width);

}  // namespace bm::blast
