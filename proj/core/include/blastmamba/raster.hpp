#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "blastmamba/error.hpp"
#include "blastmamba/tensor.hpp"

namespace bm {

/// 8-bit interleaved raster. One channel maps to PGM (P5), three to PPM (P6).
struct Image8 {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;
  std::vector<std::uint8_t> data;

  static Image8 blank(std::size_t h, std::size_t w, std::size_t c) { return {h, w, c, std::vector<std::uint8_t>(h * w * c)}; }
  std::uint8_t& at(std::size_t r, std::size_t col, std::size_t ch = 0) { return data[(r * width + col) * channels + ch]; }
  std::uint8_t at(std::size_t r, std::size_t col, std::size_t ch = 0) const {
    return data[(r * width + col) * channels + ch];
  }
  bool operator==(const Image8&) const = default;
};

/// f32 interleaved raster, stored on disk as BFR.
struct FloatRaster {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;
  std::vector<float> data;

  static FloatRaster blank(std::size_t h, std::size_t w, std::size_t c) {
    return {h, w, c, std::vector<float>(h * w * c, 0.0f)};
  }
  float& at(std::size_t r, std::size_t col, std::size_t ch) { return data[(r * width + col) * channels + ch]; }
  float at(std::size_t r, std::size_t col, std::size_t ch) const { return data[(r * width + col) * channels + ch]; }
  bool operator==(const FloatRaster&) const = default;
};

class RasterError : public DataError {
 public:
  enum class Kind { kMagic, kHeader, kTruncated };
  RasterError(Kind kind, const std::string& what) : DataError(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

/// PPM for 3 channels, PGM for 1 channel (maxval 255).
std::vector<std::uint8_t> encode_pnm(const Image8& img);
/// Accepts P5 and P6 with maxval 255; trailing bytes are ignored.
Image8 decode_pnm(const std::vector<std::uint8_t>& bytes);

/// "BFR1 <H> <W> <C>\n" followed by H*W*C little-endian f32 values.
std::vector<std::uint8_t> encode_bfr(const FloatRaster& r);
FloatRaster decode_bfr(const std::vector<std::uint8_t>& bytes);

void write_pnm(const std::filesystem::path& path, const Image8& img);
Image8 read_pnm(const std::filesystem::path& path);
void write_bfr(const std::filesystem::path& path, const FloatRaster& r);
FloatRaster read_bfr(const std::filesystem::path& path);

/// [H x W x C] tensor with values scaled to [0, 1].
Tensor image_to_tensor(const Image8& img);
Tensor raster_to_tensor(const FloatRaster& r);

/// Single-channel label image to a flat int32 vector.
std::vector<std::int32_t> labels_of(const Image8& img);
Image8 labels_to_image(const std::vector<std::int32_t>& labels, std::size_t h, std::size_t w);

}  // namespace bm
