#include "crcseg/losses.hpp"

#include <cstdint>
#include <string>

#include "crcseg/error.hpp"

namespace crcseg {

std::string_view loss_kind_name(LossKind kind) {
  switch (kind) {
  case LossKind::Binary: return "binary";
  case LossKind::BinaryThreshold: return "binary-threshold";
  case LossKind::Miscoverage: return "miscoverage";
  case LossKind::WeightedMiscoverage: return "weighted-miscoverage";
  }
  return "unknown";
}

std::optional<LossKind> parse_loss_kind(std::string_view name) {
  for (auto kind : {LossKind::Binary, LossKind::BinaryThreshold,
                    LossKind::Miscoverage, LossKind::WeightedMiscoverage})
    if (loss_kind_name(kind) == name)
      return kind;
  return std::nullopt;
}

namespace {

LossSpec of_kind(LossKind kind) {
  LossSpec s;
  s.kind = kind;
  return s;
}

} // namespace

LossSpec LossSpec::binary() { return of_kind(LossKind::Binary); }

LossSpec LossSpec::binary_threshold(double tau) {
  LossSpec s = of_kind(LossKind::BinaryThreshold);
  s.tau = tau;
  s.validate();
  return s;
}

LossSpec LossSpec::miscoverage() { return of_kind(LossKind::Miscoverage); }

LossSpec LossSpec::weighted_miscoverage(std::vector<double> weights) {
  LossSpec s = of_kind(LossKind::WeightedMiscoverage);
  s.weights = std::move(weights);
  s.validate();
  return s;
}

void LossSpec::validate() const {
  if (!(bound_b > 0.0))
    throw Error(ErrorCode::InvalidArgument, "loss bound B must be positive");
  if (kind == LossKind::BinaryThreshold && !(tau > 0.0 && tau <= 1.0))
    throw Error(ErrorCode::InvalidArgument,
                "tau must lie in (0,1], got " + std::to_string(tau));
  if (kind == LossKind::WeightedMiscoverage) {
    double total = 0.0;
    for (double w : weights) {
      if (!(w >= 0.0))
        throw Error(ErrorCode::InvalidArgument, "class weights must be >= 0");
      total += w;
    }
    if (!(total > 0.0))
      throw Error(ErrorCode::InvalidArgument,
                  "class weights must have a positive sum");
  }
}

namespace {

void check_dims(const MultiMask& z, const MultiMask& y) {
  if (z.dims() != y.dims())
    throw Error(ErrorCode::DimensionMismatch,
                "prediction and ground-truth masks differ in shape");
}

struct Counts {
  std::size_t covered = 0;
  std::size_t labelled = 0;
};

Counts count_channel(std::span<const std::uint8_t> z, std::span<const std::uint8_t> y) {
  Counts c;
  for (std::size_t p = 0; p < y.size(); ++p) {
    c.labelled += y[p];
    c.covered += z[p] & y[p];
  }
  return c;
}

Counts count_all(const MultiMask& z, const MultiMask& y) {
  check_dims(z, y);
  const auto c = count_channel(z.bits(), y.bits());
  if (c.labelled == 0)
    throw Error(ErrorCode::ZeroValidPixels, "ground truth has no labelled pixel");
  return c;
}

} // namespace

double coverage_ratio(const MultiMask& z, const MultiMask& y) {
  const auto c = count_all(z, y);
  return static_cast<double>(c.covered) / static_cast<double>(c.labelled);
}

int loss_binary(const MultiMask& z, const MultiMask& y) {
  const auto c = count_all(z, y);
  return c.covered == c.labelled ? 0 : 1;
}

int loss_binary_threshold(const MultiMask& z, const MultiMask& y, double tau) {
  return coverage_ratio(z, y) < tau ? 1 : 0;
}

double loss_miscoverage(const MultiMask& z, const MultiMask& y) {
  return 1.0 - coverage_ratio(z, y);
}

double loss_weighted_miscoverage(const MultiMask& z, const MultiMask& y,
                                 const std::vector<double>& weights) {
  check_dims(z, y);
  const int k_count = y.dims().k;
  if (weights.size() != static_cast<std::size_t>(k_count))
    throw Error(ErrorCode::DimensionMismatch,
                "expected " + std::to_string(k_count) + " class weights, got " +
                    std::to_string(weights.size()));
  double weighted = 0.0;
  double norm = 0.0;
  bool any = false;
  for (int k = 0; k < k_count; ++k) {
    const auto c = count_channel(z.channel(k), y.channel(k));
    if (c.labelled == 0)
      continue;
    any = true;
    weighted += weights[k] * (static_cast<double>(c.covered) /
                              static_cast<double>(c.labelled));
    norm += weights[k];
  }
  if (!any)
    throw Error(ErrorCode::ZeroValidPixels, "ground truth has no labelled pixel");
  if (norm == 0.0)
    return 0.0;
  return 1.0 - weighted / norm;
}

ClassCoverage class_coverage(const MultiMask& z, const MultiMask& y) {
  check_dims(z, y);
  const int k_count = y.dims().k;
  ClassCoverage out(k_count);
  for (int k = 0; k < k_count; ++k) {
    const auto c = count_channel(z.channel(k), y.channel(k));
    out.covered[k] = c.covered;
    out.labelled[k] = c.labelled;
  }
  return out;
}

double loss_from_coverage(const LossSpec& spec, const ClassCoverage& counts) {
  std::size_t covered = 0;
  std::size_t labelled = 0;
  for (std::size_t k = 0; k < counts.labelled.size(); ++k) {
    covered += counts.covered[k];
    labelled += counts.labelled[k];
  }
  if (labelled == 0)
    return 0.0;
  const double ratio = static_cast<double>(covered) / static_cast<double>(labelled);
  switch (spec.kind) {
  case LossKind::Binary: return covered == labelled ? 0.0 : 1.0;
  case LossKind::BinaryThreshold: return ratio < spec.tau ? 1.0 : 0.0;
  case LossKind::Miscoverage: return 1.0 - ratio;
  case LossKind::WeightedMiscoverage: {
    if (spec.weights.size() != counts.labelled.size())
      throw Error(ErrorCode::DimensionMismatch,
                  "expected " + std::to_string(counts.labelled.size()) +
                      " class weights, got " + std::to_string(spec.weights.size()));
    double weighted = 0.0;
    double norm = 0.0;
    for (std::size_t k = 0; k < counts.labelled.size(); ++k) {
      if (counts.labelled[k] == 0)
        continue;
      weighted += spec.weights[k] * (static_cast<double>(counts.covered[k]) /
                                     static_cast<double>(counts.labelled[k]));
      norm += spec.weights[k];
    }
    return norm == 0.0 ? 0.0 : 1.0 - weighted / norm;
  }
  }
  return 0.0;
}

double compute_loss(const LossSpec& spec, const MultiMask& z, const MultiMask& y) {
  return loss_from_coverage(spec, class_coverage(z, y));
}

} // namespace crcseg
