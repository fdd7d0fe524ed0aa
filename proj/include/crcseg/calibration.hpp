#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "crcseg/losses.hpp"
#include "crcseg/types.hpp"

namespace crcseg {

/// One labelled image: softmax scores and the matching ground truth.
struct Example {
  ScoreTensor scores;
  GroundTruthMask mask;
};

struct CalibrationConfig {
  double alpha = 0.1;
  double epsilon = 1e-5;
  LossSpec loss = LossSpec::miscoverage();
  bool top1_fallback = true;
  std::uint64_t seed = 0;
  unsigned threads = 0;

  /// Requires 0 < alpha < 1, 0 < epsilon <= 1e-2 and a valid loss.
  void validate() const;
};

struct RiskSample {
  double lambda = 0.0;
  double risk = 0.0;

  bool operator==(const RiskSample&) const = default;
};

/// Deployable result of calibration.
struct CalibrationArtifact {
  double lambda_hat = 1.0;
  double alpha = 0.0;
  std::size_t n = 0;
  double bound_b = 1.0;
  double epsilon = 0.0;
  LossSpec loss;
  bool top1_fallback = true;
  std::uint64_t seed = 0;
  /// Empirical risk at every probed lambda, ascending in lambda.
  std::vector<RiskSample> risk_curve;
  std::string created_at;
  std::string tool_version;
};

/// Arithmetic mean. Throws EmptyCalibrationSet on an empty span.
double empirical_risk(std::span<const double> losses);

/// n/(n+1) * r_hat + b/(n+1) <= alpha.
bool crc_condition(double r_hat, std::size_t n, double b, double alpha);

/// Smallest alpha satisfiable with n examples when the full set has zero
/// risk: b/(n+1).
double min_feasible_alpha(std::size_t n, double b);

/// Smallest n with crc_condition(r_hat, n, b, alpha); 0 when no n works
/// (r_hat >= alpha).
std::size_t min_calibration_size(double alpha, double b, double r_hat = 0.0);

/// Throws InfeasibleAlphaError unless crc_condition holds at lambda = 1,
/// where every shipped loss is zero.
void feasibility_check(const CalibrationConfig& config, std::size_t n);

/// Result of the lambda search on an arbitrary non-increasing risk curve.
struct LambdaSearch {
  double lambda_hat = 1.0;
  std::vector<RiskSample> curve;
};

/// Bisection for inf{lambda : crc_condition(risk(lambda))}. Keeps the
/// condition false at `lo` and true at `hi`, stops once hi - lo <= epsilon
/// and returns hi, so the result satisfies the condition and exceeds the
/// infimum by at most epsilon. `risk` must be non-increasing.
LambdaSearch search_lambda(const std::function<double(double)>& risk,
                           std::size_t n, double bound_b, double alpha,
                           double epsilon);

/// Precomputed view of one calibration example that evaluates its loss at
/// any lambda in O(H*W). Equivalent to
/// compute_loss(loss, lac_set(scores, lambda, fallback), one_hot(mask)) since
/// every shipped loss depends on the prediction set only through the true
/// class of each labelled pixel.
class LossCurve {
public:
  LossCurve(const Example& example, bool top1_fallback);

  double operator()(const LossSpec& loss, double lambda) const;
  bool has_labelled_pixels() const { return !labels_.empty(); }

private:
  int k_ = 0;
  std::vector<float> true_scores_;
  std::vector<Label> labels_;
  std::vector<std::uint8_t> top1_;
};

/// Empirical risk R_n(lambda) over a calibration set, evaluated image by
/// image in ascending order.
class EmpiricalRisk {
public:
  EmpiricalRisk(std::span<const Example> examples, const CalibrationConfig& config);

  double operator()(double lambda) const;
  std::size_t size() const { return curves_.size(); }
  /// Indices of images without labelled pixels (their loss is 0).
  const std::vector<std::size_t>& empty_images() const { return empty_; }

private:
  std::vector<LossCurve> curves_;
  std::vector<std::size_t> empty_;
  LossSpec loss_;
  unsigned threads_;
};

/// Full calibration: feasibility check, empirical risk, lambda search.
CalibrationArtifact calibrate(std::span<const Example> cal_set,
                              const CalibrationConfig& config);

/// Re-checks the stored invariants: the curve is ascending in lambda and
/// non-increasing in risk, and the condition holds at lambda_hat.
bool artifact_consistent(const CalibrationArtifact& artifact);

} // namespace crcseg
