#include "crcseg/types.hpp"

#include <cmath>
#include <string>

#include "crcseg/error.hpp"

namespace crcseg {

namespace {

std::string dims_str(const Dims& d) {
  return "(" + std::to_string(d.k) + "," + std::to_string(d.h) + "," +
         std::to_string(d.w) + ")";
}

} // namespace

void Dims::validate() const {
  if (k < 2 || h < 1 || w < 1)
    throw Error(ErrorCode::InvalidArgument,
                "dims must satisfy K>=2, H>=1, W>=1, got " + dims_str(*this));
}

ScoreTensor::ScoreTensor(Dims dims, std::vector<float> values, bool validate)
    : dims_(dims), values_(std::move(values)) {
  dims_.validate();
  if (values_.size() != dims_.size())
    throw Error(ErrorCode::DimensionMismatch,
                "score buffer holds " + std::to_string(values_.size()) +
                    " values, dims " + dims_str(dims_) + " need " +
                    std::to_string(dims_.size()));
  if (!validate)
    return;
  const std::size_t n = dims_.pixels();
  for (std::size_t p = 0; p < n; ++p) {
    double sum = 0.0;
    for (int k = 0; k < dims_.k; ++k) {
      const float v = values_[k * n + p];
      if (!(v >= 0.0f && v <= 1.0f))
        throw Error(ErrorCode::SoftmaxValidation,
                    "score " + std::to_string(v) + " outside [0,1] at class " +
                        std::to_string(k) + ", pixel " + std::to_string(p));
      sum += v;
    }
    if (std::abs(sum - 1.0) > kSoftmaxTolerance)
      throw Error(ErrorCode::SoftmaxValidation,
                  "scores at pixel " + std::to_string(p) + " sum to " +
                      std::to_string(sum));
  }
}

int ScoreTensor::argmax(std::size_t p) const {
  const std::size_t n = dims_.pixels();
  int best = 0;
  float best_v = values_[p];
  for (int k = 1; k < dims_.k; ++k) {
    const float v = values_[k * n + p];
    if (v > best_v) {
      best_v = v;
      best = k;
    }
  }
  return best;
}

GroundTruthMask::GroundTruthMask(Dims dims, std::vector<Label> labels)
    : dims_(dims), labels_(std::move(labels)) {
  dims_.validate();
  if (labels_.size() != dims_.pixels())
    throw Error(ErrorCode::DimensionMismatch,
                "label buffer holds " + std::to_string(labels_.size()) +
                    " values, expected " + std::to_string(dims_.pixels()));
  for (std::size_t p = 0; p < labels_.size(); ++p) {
    const Label l = labels_[p];
    if (l == kIgnore)
      continue;
    if (l >= dims_.k)
      throw Error(ErrorCode::LabelOutOfRange,
                  "label " + std::to_string(l) + " at pixel " +
                      std::to_string(p) + " not below K=" +
                      std::to_string(dims_.k));
    ++valid_count_;
  }
}

MultiMask::MultiMask(Dims dims, std::vector<std::uint8_t> bits)
    : dims_(dims), bits_(std::move(bits)) {
  dims_.validate();
  if (bits_.size() != dims_.size())
    throw Error(ErrorCode::DimensionMismatch,
                "mask buffer holds " + std::to_string(bits_.size()) +
                    " values, dims " + dims_str(dims_) + " need " +
                    std::to_string(dims_.size()));
  for (auto b : bits_)
    if (b > 1)
      throw Error(ErrorCode::InvalidArgument,
                  "multi-labeled mask entries must be 0 or 1");
}

MultiMask MultiMask::zeros(Dims dims) {
  return MultiMask(dims, std::vector<std::uint8_t>(dims.size(), 0));
}

MultiMask MultiMask::ones(Dims dims) {
  return MultiMask(dims, std::vector<std::uint8_t>(dims.size(), 1));
}

MultiMask one_hot(const GroundTruthMask& mask) {
  const Dims& d = mask.dims();
  const std::size_t n = d.pixels();
  std::vector<std::uint8_t> bits(d.size(), 0);
  const auto labels = mask.labels();
  for (std::size_t p = 0; p < n; ++p)
    if (labels[p] != kIgnore)
      bits[labels[p] * n + p] = 1;
  return MultiMask(d, std::move(bits));
}

bool mask_contains(const MultiMask& a, const MultiMask& b) {
  if (a.dims() != b.dims())
    throw Error(ErrorCode::DimensionMismatch,
                "cannot compare masks " + dims_str(a.dims()) + " and " +
                    dims_str(b.dims()));
  const auto x = a.bits();
  const auto y = b.bits();
  for (std::size_t i = 0; i < x.size(); ++i)
    if (x[i] < y[i])
      return false;
  return true;
}

void check_pair(const ScoreTensor& scores, const GroundTruthMask& mask) {
  if (scores.dims() != mask.dims())
    throw Error(ErrorCode::DimensionMismatch,
                "scores " + dims_str(scores.dims()) + " vs mask " +
                    dims_str(mask.dims()));
}

} // namespace crcseg
