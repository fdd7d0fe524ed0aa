#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "crcseg/types.hpp"

namespace crcseg {

enum class LossKind { Binary, BinaryThreshold, Miscoverage, WeightedMiscoverage };

/// CLI spelling: binary, binary-threshold, miscoverage, weighted-miscoverage.
std::string_view loss_kind_name(LossKind kind);
std::optional<LossKind> parse_loss_kind(std::string_view name);

/// A conformalization loss and its parameters. Every shipped kind maps into
/// [0, 1], so `bound_b` is 1.
struct LossSpec {
  LossKind kind = LossKind::Miscoverage;
  double tau = 1.0;            // BinaryThreshold only
  std::vector<double> weights; // WeightedMiscoverage only, one per class
  double bound_b = 1.0;

  static LossSpec binary();
  static LossSpec binary_threshold(double tau);
  static LossSpec miscoverage();
  static LossSpec weighted_miscoverage(std::vector<double> weights);

  /// Throws InvalidArgument when tau is outside (0,1], when weights are
  /// negative or sum to zero, or when bound_b is not positive.
  void validate() const;

  bool operator==(const LossSpec&) const = default;
};

// The functions below take `y` as a one-hot ground truth (see one_hot) and
// throw ZeroValidPixels when it has no active bit.

/// sum(Z*Y) / sum(Y): fraction of labelled pixels whose class is in the set.
double coverage_ratio(const MultiMask& z, const MultiMask& y);

/// 0 iff Z >= Y.
int loss_binary(const MultiMask& z, const MultiMask& y);

/// 1 iff coverage_ratio(z, y) < tau.
int loss_binary_threshold(const MultiMask& z, const MultiMask& y, double tau);

/// 1 - coverage_ratio(z, y).
double loss_miscoverage(const MultiMask& z, const MultiMask& y);

/// 1 - weighted mean of per-class coverage. Classes absent from `y` are
/// skipped and the weight normalizer is taken over present classes only;
/// if the present classes carry zero total weight the loss is 0.
double loss_weighted_miscoverage(const MultiMask& z, const MultiMask& y,
                                 const std::vector<double>& weights);

/// Per-class counts of labelled pixels and of labelled pixels whose true
/// class is in the prediction set. Every shipped loss is a function of
/// these counts alone.
struct ClassCoverage {
  std::vector<std::size_t> covered;
  std::vector<std::size_t> labelled;

  explicit ClassCoverage(int k) : covered(k, 0), labelled(k, 0) {}
};

ClassCoverage class_coverage(const MultiMask& z, const MultiMask& y);

/// Loss from per-class counts; 0 when nothing is labelled.
double loss_from_coverage(const LossSpec& spec, const ClassCoverage& counts);

/// Dispatches on `spec.kind`. An image without labelled pixels carries no
/// evidence and scores 0.
double compute_loss(const LossSpec& spec, const MultiMask& z, const MultiMask& y);

} // namespace crcseg
