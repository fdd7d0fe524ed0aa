#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "crcseg/types.hpp"

namespace crcseg {

/// Parsed NPY v1.0 header.
struct NpyHeader {
  std::string descr;
  bool fortran_order = false;
  std::vector<std::size_t> shape;
  /// Offset of the first data byte.
  std::size_t data_offset = 0;

  std::size_t element_count() const;
};

/// Parses the magic, version and header dictionary. Only version 1.0 is
/// accepted. Every malformed input raises a typed crcseg::Error.
NpyHeader parse_npy_header(std::span<const std::uint8_t> bytes);

/// Serialized header (magic through the trailing newline) for a C-order
/// array, padded so the data starts on a 64-byte boundary.
std::vector<std::uint8_t> make_npy_header(const std::string& descr,
                                          std::span<const std::size_t> shape);

/// Labels as stored on disk, before pairing with a class count. Void pixels
/// already carry kIgnore.
struct LabelImage {
  int h = 0;
  int w = 0;
  std::vector<Label> labels;
};

// Scores: '<f4', shape (K, H, W).
ScoreTensor parse_scores(std::span<const std::uint8_t> bytes, bool validate = true);
std::vector<std::uint8_t> encode_scores(const ScoreTensor& scores);
ScoreTensor read_scores(const std::filesystem::path& path, bool validate = true);
void write_scores(const std::filesystem::path& path, const ScoreTensor& scores);

// Masks: '|u1' (void = 255) or '<u2' (void = 65535), shape (H, W).
LabelImage parse_labels(std::span<const std::uint8_t> bytes);
/// Written as '|u1' when K <= 255, else '<u2'.
std::vector<std::uint8_t> encode_mask(const GroundTruthMask& mask);
LabelImage read_labels(const std::filesystem::path& path);
/// Pairs labels with a class count; throws LabelOutOfRange.
GroundTruthMask read_mask(const std::filesystem::path& path, int k);
void write_mask(const std::filesystem::path& path, const GroundTruthMask& mask);

// Multi-labeled masks: '|u1' 0/1, shape (K, H, W).
MultiMask parse_multimask(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_multimask(const MultiMask& z);
MultiMask read_multimask(const std::filesystem::path& path);
void write_multimask(const std::filesystem::path& path, const MultiMask& z);

} // namespace crcseg
