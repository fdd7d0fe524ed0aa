#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

namespace crcseg {

using Label = std::uint16_t;

/// Void pixel marker. On disk the sentinel is the maximum of the stored
/// integer type (255 for u1 masks, 65535 for u2); in memory it is always
/// the u2 maximum.
inline constexpr Label kIgnore = std::numeric_limits<Label>::max();

/// Tolerance on the per-pixel softmax sum used when validating scores.
inline constexpr double kSoftmaxTolerance = 1e-4;

struct Dims {
  int k = 0;
  int h = 0;
  int w = 0;

  std::size_t pixels() const { return static_cast<std::size_t>(h) * w; }
  std::size_t size() const { return pixels() * k; }

  /// Throws InvalidArgument unless every extent is positive and k >= 2.
  void validate() const;

  bool operator==(const Dims&) const = default;
};

/// Per-image softmax scores, channel-major (K, H, W).
class ScoreTensor {
public:
  ScoreTensor() = default;

  /// With `validate`, every entry must lie in [0,1] and every pixel must sum
  /// to 1 within kSoftmaxTolerance.
  ScoreTensor(Dims dims, std::vector<float> values, bool validate = true);

  const Dims& dims() const { return dims_; }
  std::span<const float> values() const { return values_; }
  std::span<const float> channel(int k) const {
    return std::span<const float>(values_).subspan(k * dims_.pixels(),
                                                   dims_.pixels());
  }
  float at(int k, int i, int j) const {
    return values_[k * dims_.pixels() + static_cast<std::size_t>(i) * dims_.w + j];
  }

  /// Index of the highest score at pixel `p`; ties go to the smallest class.
  int argmax(std::size_t p) const;

private:
  Dims dims_;
  std::vector<float> values_;
};

/// Ground-truth labels (H, W). `dims().k` is the class count the labels were
/// checked against.
class GroundTruthMask {
public:
  GroundTruthMask() = default;
  GroundTruthMask(Dims dims, std::vector<Label> labels);

  const Dims& dims() const { return dims_; }
  std::span<const Label> labels() const { return labels_; }
  Label at(int i, int j) const {
    return labels_[static_cast<std::size_t>(i) * dims_.w + j];
  }
  bool valid(std::size_t p) const { return labels_[p] != kIgnore; }
  std::size_t valid_pixel_count() const { return valid_count_; }

private:
  Dims dims_;
  std::vector<Label> labels_;
  std::size_t valid_count_ = 0;
};

/// Per-pixel label subsets stored as a (K, H, W) array of 0/1 bytes.
class MultiMask {
public:
  MultiMask() = default;
  MultiMask(Dims dims, std::vector<std::uint8_t> bits);

  static MultiMask zeros(Dims dims);
  static MultiMask ones(Dims dims);

  const Dims& dims() const { return dims_; }
  std::span<const std::uint8_t> bits() const { return bits_; }
  std::span<const std::uint8_t> channel(int k) const {
    return std::span<const std::uint8_t>(bits_).subspan(k * dims_.pixels(),
                                                        dims_.pixels());
  }
  bool at(int k, int i, int j) const {
    return bits_[k * dims_.pixels() + static_cast<std::size_t>(i) * dims_.w + j] != 0;
  }

  bool operator==(const MultiMask&) const = default;

private:
  Dims dims_;
  std::vector<std::uint8_t> bits_;
};

/// h(Y): one active class per labelled pixel, none on void pixels.
MultiMask one_hot(const GroundTruthMask& mask);

/// Z >= Z' elementwise. Throws DimensionMismatch on differing dims.
bool mask_contains(const MultiMask& a, const MultiMask& b);

/// Throws DimensionMismatch unless scores and mask describe the same grid
/// and class count.
void check_pair(const ScoreTensor& scores, const GroundTruthMask& mask);

} // namespace crcseg
