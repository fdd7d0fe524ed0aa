#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "crcseg/calibration.hpp"
#include "crcseg/losses.hpp"
#include "crcseg/types.hpp"

namespace crcseg {

struct ImageMetrics {
  std::string id;
  double loss = 0.0;
  /// NaN when the image has no labelled pixel.
  double activation_ratio = 0.0;
  std::size_t valid_pixels = 0;
};

struct EvaluationReport {
  double empirical_risk = 0.0;
  double risk_std = 0.0;
  double activation_ratio = 0.0;
  double activation_ratio_std = 0.0;
  std::size_t n_test = 0;
  std::size_t runs = 1;
  double lambda_hat = 0.0;
  double alpha = 0.0;
  LossSpec loss;
  std::vector<ImageMetrics> per_image;
};

/// 1 for labelled pixels, 0 for void ones.
std::vector<std::uint8_t> validity_map(const GroundTruthMask& mask);

/// Mean prediction-set size over valid pixels. Throws ZeroValidPixels when
/// no pixel is valid.
double activation_ratio(const MultiMask& z, std::span<const std::uint8_t> valid);

/// Loss and activation ratio of every test image at the artifact's lambda.
/// `ids`, when non-empty, labels the per-image rows.
EvaluationReport evaluate(std::span<const Example> test_set,
                          const CalibrationArtifact& artifact, unsigned threads = 0,
                          std::span<const std::string> ids = {});

/// Mean and sample (n-1) standard deviation across runs that share alpha and
/// loss. Throws ConfigMismatch otherwise.
EvaluationReport aggregate_runs(std::span<const EvaluationReport> reports);

} // namespace crcseg
