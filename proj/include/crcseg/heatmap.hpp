#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "crcseg/types.hpp"

namespace crcseg {

/// 8-bit RGB, row-major, interleaved.
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  RgbImage() = default;
  RgbImage(int w, int h) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h * 3, 0) {}

  bool operator==(const RgbImage&) const = default;
};

enum class Normalization { ByK, ByObservedMax };

struct HeatmapOptions {
  Normalization normalization = Normalization::ByK;
  std::string colormap = "thermal";
  std::optional<double> overlay_blend;
};

using Rgb = std::array<std::uint8_t, 3>;

struct PaletteAnchor {
  double position;
  Rgb color;
};

/// Blue to red diverging ramp, anchors at 0, .25, .5, .75, 1.
inline constexpr std::array<PaletteAnchor, 5> kThermalPalette{{
    {0.00, {49, 54, 149}},
    {0.25, {69, 117, 180}},
    {0.50, {254, 224, 144}},
    {0.75, {244, 109, 67}},
    {1.00, {165, 0, 38}},
}};

/// Piecewise-linear palette lookup, channels rounded half-up. Intensities
/// outside [0,1] are clamped.
Rgb palette_color(double intensity, std::span<const PaletteAnchor> palette = kThermalPalette);

/// Set size per pixel scaled to [0,1], by K or by the largest size present.
std::vector<double> intensity_map(const MultiMask& z, const HeatmapOptions& opts);

/// Throws InvalidArgument for an unknown colormap or a size mismatch.
RgbImage render(std::span<const double> intensity, int width, int height,
                const HeatmapOptions& opts);

/// round(blend * heat + (1 - blend) * photo) per channel, half-up.
RgbImage overlay(const RgbImage& heat, const RgbImage& photo, double blend);

/// Paints pixels whose validity flag is 0 black.
void blackout(RgbImage& image, std::span<const std::uint8_t> valid);

// Image files. PNG is 8-bit truecolor without alpha; PPM is binary P6 with
// maxval 255.
std::vector<std::uint8_t> encode_png(const RgbImage& image);
std::vector<std::uint8_t> encode_ppm(const RgbImage& image);
RgbImage decode_image(std::span<const std::uint8_t> bytes);

/// Format chosen by extension: ".ppm" writes P6, anything else PNG.
void write_image(const std::filesystem::path& path, const RgbImage& image);
/// Accepts PNG or PPM, detected from the leading bytes.
RgbImage read_image(const std::filesystem::path& path);

} // namespace crcseg
