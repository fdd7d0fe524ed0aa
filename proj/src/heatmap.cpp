#include "crcseg/heatmap.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <string>

#include <png.h>

#include "crcseg/error.hpp"
#include "crcseg/prediction_sets.hpp"
#include "file_util.hpp"

namespace crcseg {

namespace {

std::uint8_t round_byte(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::floor(v + 0.5), 0.0, 255.0));
}

} // namespace

Rgb palette_color(double intensity, std::span<const PaletteAnchor> palette) {
  const double t = std::clamp(intensity, 0.0, 1.0);
  std::size_t seg = 0;
  while (seg + 2 < palette.size() && t >= palette[seg + 1].position)
    ++seg;
  const auto& a = palette[seg];
  const auto& b = palette[seg + 1];
  const double frac = (t - a.position) / (b.position - a.position);
  Rgb out;
  for (int c = 0; c < 3; ++c)
    out[c] = round_byte(a.color[c] + (b.color[c] - a.color[c]) * frac);
  return out;
}

std::vector<double> intensity_map(const MultiMask& z, const HeatmapOptions& opts) {
  const auto sizes = set_size_map(z);
  double scale = z.dims().k;
  if (opts.normalization == Normalization::ByObservedMax) {
    const auto max_count = sizes.empty() ? 0 : *std::max_element(sizes.begin(), sizes.end());
    scale = max_count;
  }
  std::vector<double> out(sizes.size(), 0.0);
  if (scale <= 0.0)
    return out;
  for (std::size_t p = 0; p < sizes.size(); ++p)
    out[p] = sizes[p] / scale;
  return out;
}

RgbImage render(std::span<const double> intensity, int width, int height,
                const HeatmapOptions& opts) {
  if (opts.colormap != "thermal")
    throw Error(ErrorCode::InvalidArgument, "unknown colormap '" + opts.colormap + "'");
  if (width < 1 || height < 1 ||
      intensity.size() != static_cast<std::size_t>(width) * height)
    throw Error(ErrorCode::DimensionMismatch, "intensity map does not match image size");
  RgbImage img(width, height);
  for (std::size_t p = 0; p < intensity.size(); ++p) {
    const Rgb c = palette_color(intensity[p]);
    std::copy(c.begin(), c.end(), img.pixels.begin() + 3 * p);
  }
  return img;
}

RgbImage overlay(const RgbImage& heat, const RgbImage& photo, double blend) {
  if (!(blend >= 0.0 && blend <= 1.0))
    throw Error(ErrorCode::InvalidArgument, "blend must lie in [0,1]");
  if (heat.width != photo.width || heat.height != photo.height)
    throw Error(ErrorCode::DimensionMismatch,
                "overlay photo is " + std::to_string(photo.width) + "x" +
                    std::to_string(photo.height) + ", heatmap is " +
                    std::to_string(heat.width) + "x" + std::to_string(heat.height));
  RgbImage out(heat.width, heat.height);
  for (std::size_t i = 0; i < out.pixels.size(); ++i)
    out.pixels[i] = round_byte(blend * heat.pixels[i] + (1.0 - blend) * photo.pixels[i]);
  return out;
}

void blackout(RgbImage& image, std::span<const std::uint8_t> valid) {
  if (valid.size() * 3 != image.pixels.size())
    throw Error(ErrorCode::DimensionMismatch, "validity map does not match image");
  for (std::size_t p = 0; p < valid.size(); ++p)
    if (!valid[p])
      std::fill_n(image.pixels.begin() + 3 * p, 3, 0);
}

std::vector<std::uint8_t> encode_png(const RgbImage& image) {
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(image.width);
  png.height = static_cast<png_uint_32>(image.height);
  png.format = PNG_FORMAT_RGB;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&png, nullptr, &size, 0, image.pixels.data(), 0, nullptr))
    throw Error(ErrorCode::ImageFormatError, std::string("PNG encode failed: ") + png.message);
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&png, out.data(), &size, 0, image.pixels.data(), 0, nullptr))
    throw Error(ErrorCode::ImageFormatError, std::string("PNG encode failed: ") + png.message);
  out.resize(size);
  return out;
}

std::vector<std::uint8_t> encode_ppm(const RgbImage& image) {
  const std::string header = "P6\n" + std::to_string(image.width) + " " +
                             std::to_string(image.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), image.pixels.begin(), image.pixels.end());
  return out;
}

namespace {

RgbImage decode_png(std::span<const std::uint8_t> bytes) {
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&png, bytes.data(), bytes.size()))
    throw Error(ErrorCode::ImageFormatError, std::string("PNG decode failed: ") + png.message);
  png.format = PNG_FORMAT_RGB;
  RgbImage img(static_cast<int>(png.width), static_cast<int>(png.height));
  if (!png_image_finish_read(&png, nullptr, img.pixels.data(), 0, nullptr)) {
    png_image_free(&png);
    throw Error(ErrorCode::ImageFormatError, std::string("PNG decode failed: ") + png.message);
  }
  return img;
}

class PpmReader {
public:
  explicit PpmReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  long next_int() {
    skip_space();
    long v = 0;
    std::size_t digits = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      v = v * 10 + (bytes_[pos_++] - '0');
      if (++digits > 9)
        fail("number too large");
    }
    if (digits == 0)
      fail("expected a number");
    return v;
  }

  std::size_t finish_header() {
    if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_]))
      fail("missing separator before raster");
    return pos_ + 1;
  }

  [[noreturn]] static void fail(const std::string& what) {
    throw Error(ErrorCode::ImageFormatError, "PPM: " + what);
  }

private:
  void skip_space() {
    while (pos_ < bytes_.size()) {
      if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n')
          ++pos_;
      } else if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 2;
};

RgbImage decode_ppm(std::span<const std::uint8_t> bytes) {
  PpmReader reader(bytes);
  const long w = reader.next_int();
  const long h = reader.next_int();
  const long maxval = reader.next_int();
  if (w < 1 || h < 1)
    PpmReader::fail("empty image");
  if (maxval != 255)
    PpmReader::fail("only maxval 255 is supported");
  const std::size_t start = reader.finish_header();
  const std::size_t need = static_cast<std::size_t>(w) * h * 3;
  if (bytes.size() - start < need)
    PpmReader::fail("truncated raster");
  RgbImage img(static_cast<int>(w), static_cast<int>(h));
  std::memcpy(img.pixels.data(), bytes.data() + start, need);
  return img;
}

} // namespace

RgbImage decode_image(std::span<const std::uint8_t> bytes) {
  static constexpr std::uint8_t kPngSig[8] = {0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};
  if (bytes.size() >= 8 && std::equal(kPngSig, kPngSig + 8, bytes.begin()))
    return decode_png(bytes);
  if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '6')
    return decode_ppm(bytes);
  throw Error(ErrorCode::ImageFormatError, "unrecognized image format (expected PNG or P6 PPM)");
}

void write_image(const std::filesystem::path& path, const RgbImage& image) {
  const auto bytes = path.extension() == ".ppm" ? encode_ppm(image) : encode_png(image);
  detail::write_file(path, bytes);
}

RgbImage read_image(const std::filesystem::path& path) {
  return decode_image(detail::read_file(path));
}

} // namespace crcseg
