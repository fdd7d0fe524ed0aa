#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "crcseg/calibration.hpp"
#include "crcseg/losses.hpp"
#include "crcseg/types.hpp"

namespace crcseg {

/// Synthetic segmentation task. Ground truth is a Voronoi partition of
/// `blob_count` uniformly placed sites, each with a uniform class. At every
/// pixel the predictor favours the true class, or with probability
/// `corruption` a uniformly chosen wrong one; logits are
/// (onehot(favoured) + noise * N(0,1)) / temperature, then softmaxed.
struct SynthConfig {
  Dims dims{5, 64, 64};
  std::size_t n_images = 2;
  int blob_count = 8;
  double temperature = 1.0;
  double corruption = 0.0;
  double noise = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Image i is drawn from its own stream derive_seed(seed, i), so the output
/// does not depend on `threads`.
std::vector<Example> generate(const SynthConfig& config, unsigned threads = 0);

struct TrialSummary {
  std::size_t trials = 0;
  double alpha = 0.0;
  LossSpec loss;
  double mean_test_risk = 0.0;
  double std_test_risk = 0.0;
  double standard_error = 0.0;
  double mean_activation_ratio = 0.0;
  double mean_lambda_hat = 0.0;
  /// mean_test_risk <= alpha + 3 * standard_error
  bool pass = false;
};

struct GuaranteeHarness {
  SynthConfig data;
  /// Calibration images per trial; the rest of data.n_images are test images.
  std::size_t n_cal = 1;
  std::size_t trials = 1;
};

/// Repeats `trials` times: generate a fresh dataset from a per-trial seed,
/// shuffle and split it, calibrate with every config and evaluate on the
/// held-out part. One summary per config, sharing the same data draws.
/// Throws InfeasibleAlphaError before any trial when a config cannot be met
/// with n_cal examples.
std::vector<TrialSummary> validate_guarantee(const GuaranteeHarness& harness,
                                             std::span<const CalibrationConfig> configs);

TrialSummary validate_guarantee(const GuaranteeHarness& harness,
                                const CalibrationConfig& config);

} // namespace crcseg
