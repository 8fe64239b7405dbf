#include "blastmamba/raster.hpp"

#include <cctype>
#include <charconv>
#include <string>

#include "blastmamba/binary_io.hpp"

namespace bm {

namespace {

using Kind = RasterError::Kind;

// Minimal cursor over a PNM/BFR ASCII header.
class HeaderCursor {
 public:
  explicit HeaderCursor(const std::vector<std::uint8_t>& b) : b_(b) {}

  void skip_space_and_comments() {
    while (pos_ < b_.size()) {
      if (std::isspace(b_[pos_])) {
        ++pos_;
      } else if (b_[pos_] == '#') {
        while (pos_ < b_.size() && b_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  std::size_t number(const char* what) {
    skip_space_and_comments();
    const auto* first = reinterpret_cast<const char*>(b_.data()) + pos_;
    const auto* last = reinterpret_cast<const char*>(b_.data()) + b_.size();
    std::size_t v = 0;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr == first) throw RasterError(Kind::kHeader, std::string("malformed header: ") + what);
    pos_ += static_cast<std::size_t>(ptr - first);
    return v;
  }

  // Exactly one whitespace byte separates the header from the payload.
  void single_space() {
    if (pos_ >= b_.size() || !std::isspace(b_[pos_])) throw RasterError(Kind::kHeader, "malformed header terminator");
    ++pos_;
  }

  std::size_t pos() const { return pos_; }

 private:
  const std::vector<std::uint8_t>& b_;
  std::size_t pos_ = 0;
};

bool starts_with(const std::vector<std::uint8_t>& b, std::string_view magic) {
  return b.size() >= magic.size() && std::equal(magic.begin(), magic.end(), b.begin());
}

void require_dims(std::size_t h, std::size_t w, std::size_t c) {
  if (h == 0 || w == 0 || c == 0) throw RasterError(Kind::kHeader, "malformed header: zero extent");
}

}  // namespace

std::vector<std::uint8_t> encode_pnm(const Image8& img) {
  if (img.channels != 1 && img.channels != 3) throw ShapeError("PNM needs 1 or 3 channels");
  if (img.data.size() != img.height * img.width * img.channels) throw ShapeError("image payload size mismatch");
  const std::string header = std::string(img.channels == 3 ? "P6" : "P5") + "\n" + std::to_string(img.width) + " " +
                             std::to_string(img.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), img.data.begin(), img.data.end());
  return out;
}

Image8 decode_pnm(const std::vector<std::uint8_t>& bytes) {
  std::size_t channels = 0;
  if (starts_with(bytes, "P6")) channels = 3;
  else if (starts_with(bytes, "P5")) channels = 1;
  else throw RasterError(Kind::kMagic, "not a binary PGM/PPM file");

  std::vector<std::uint8_t> rest(bytes.begin() + 2, bytes.end());
  HeaderCursor hc(rest);
  const auto width = hc.number("width");
  const auto height = hc.number("height");
  const auto maxval = hc.number("maxval");
  if (maxval != 255) throw RasterError(Kind::kHeader, "malformed header: only maxval 255 is supported");
  require_dims(height, width, channels);
  hc.single_space();
  const std::size_t offset = 2 + hc.pos();
  const std::size_t n = height * width * channels;
  if (bytes.size() - offset < n) throw RasterError(Kind::kTruncated, "truncated raster payload");
  Image8 img{height, width, channels, {}};
  img.data.assign(bytes.begin() + static_cast<std::ptrdiff_t>(offset),
                  bytes.begin() + static_cast<std::ptrdiff_t>(offset + n));
  return img;
}

std::vector<std::uint8_t> encode_bfr(const FloatRaster& r) {
  if (r.data.size() != r.height * r.width * r.channels) throw ShapeError("raster payload size mismatch");
  const std::string header =
      "BFR1 " + std::to_string(r.height) + " " + std::to_string(r.width) + " " + std::to_string(r.channels) + "\n";
  io::ByteWriter w;
  w.put_bytes(header.data(), header.size());
  for (float v : r.data) w.put(v);
  return std::move(w.bytes());
}

FloatRaster decode_bfr(const std::vector<std::uint8_t>& bytes) {
  if (!starts_with(bytes, "BFR1")) throw RasterError(Kind::kMagic, "not a BFR file");
  std::vector<std::uint8_t> rest(bytes.begin() + 4, bytes.end());
  HeaderCursor hc(rest);
  const auto h = hc.number("height");
  const auto w = hc.number("width");
  const auto c = hc.number("channels");
  require_dims(h, w, c);
  hc.single_space();
  const std::size_t offset = 4 + hc.pos();
  const std::size_t n = h * w * c;
  if ((bytes.size() - offset) / sizeof(float) < n) throw RasterError(Kind::kTruncated, "truncated BFR payload");
  std::vector<std::uint8_t> payload(bytes.begin() + static_cast<std::ptrdiff_t>(offset), bytes.end());
  io::ByteReader in(payload);
  FloatRaster r = FloatRaster::blank(h, w, c);
  for (float& v : r.data) v = in.get<float>();
  return r;
}

void write_pnm(const std::filesystem::path& path, const Image8& img) { io::write_file(path, encode_pnm(img)); }
Image8 read_pnm(const std::filesystem::path& path) { return decode_pnm(io::read_file(path)); }
void write_bfr(const std::filesystem::path& path, const FloatRaster& r) { io::write_file(path, encode_bfr(r)); }
FloatRaster read_bfr(const std::filesystem::path& path) { return decode_bfr(io::read_file(path)); }

Tensor image_to_tensor(const Image8& img) {
  std::vector<double> v(img.data.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>(img.data[i]) / 255.0;
  return Tensor::from({img.height, img.width, img.channels}, std::move(v));
}

Tensor raster_to_tensor(const FloatRaster& r) {
  std::vector<double> v(r.data.begin(), r.data.end());
  return Tensor::from({r.height, r.width, r.channels}, std::move(v));
}

std::vector<std::int32_t> labels_of(const Image8& img) {
  if (img.channels != 1) throw ShapeError("label image must have one channel");
  return {img.data.begin(), img.data.end()};
}

Image8 labels_to_image(const std::vector<std::int32_t>& labels, std::size_t h, std::size_t w) {
  if (labels.size() != h * w) throw ShapeError("label count does not match image size");
  Image8 img = Image8::blank(h, w, 1);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] > 255) throw ShapeError("label out of 8-bit range");
    img.data[i] = static_cast<std::uint8_t>(labels[i]);
  }
  return img;
}

}  // namespace bm
