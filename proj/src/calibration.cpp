#include "crcseg/calibration.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <iomanip>
#include <sstream>

#include <spdlog/spdlog.h>

#include "crcseg/error.hpp"
#include "crcseg/parallel.hpp"
#include "crcseg/prediction_sets.hpp"
#include "crcseg/version.hpp"

namespace crcseg {

void CalibrationConfig::validate() const {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw Error(ErrorCode::InvalidArgument,
                "alpha must lie in (0,1), got " + std::to_string(alpha));
  if (!(epsilon > 0.0 && epsilon <= 1e-2))
    throw Error(ErrorCode::InvalidArgument,
                "epsilon must lie in (0, 1e-2], got " + std::to_string(epsilon));
  loss.validate();
}

double empirical_risk(std::span<const double> losses) {
  if (losses.empty())
    throw Error(ErrorCode::EmptyCalibrationSet, "no losses to average");
  double sum = 0.0;
  for (double l : losses)
    sum += l;
  return sum / static_cast<double>(losses.size());
}

bool crc_condition(double r_hat, std::size_t n, double b, double alpha) {
  const double np1 = static_cast<double>(n) + 1.0;
  return (static_cast<double>(n) / np1) * r_hat + b / np1 <= alpha;
}

double min_feasible_alpha(std::size_t n, double b) {
  return b / (static_cast<double>(n) + 1.0);
}

std::size_t min_calibration_size(double alpha, double b, double r_hat) {
  if (!(r_hat < alpha))
    return 0;
  // n*r + b <= alpha*(n+1)  <=>  n >= (b - alpha) / (alpha - r)
  const double guess = std::ceil((b - alpha) / (alpha - r_hat));
  auto n = static_cast<std::size_t>(std::max(guess, 1.0));
  // Settle floating-point rounding around the exact boundary.
  while (n > 1 && crc_condition(r_hat, n - 1, b, alpha))
    --n;
  while (!crc_condition(r_hat, n, b, alpha))
    ++n;
  return n;
}

void feasibility_check(const CalibrationConfig& config, std::size_t n) {
  const double b = config.loss.bound_b;
  if (!crc_condition(0.0, n, b, config.alpha))
    throw InfeasibleAlphaError(config.alpha, n, min_feasible_alpha(n, b),
                               min_calibration_size(config.alpha, b));
}

LambdaSearch search_lambda(const std::function<double(double)>& risk,
                           std::size_t n, double bound_b, double alpha,
                           double epsilon) {
  LambdaSearch out;
  auto holds = [&](double lambda) {
    const double r = risk(lambda);
    out.curve.push_back({lambda, r});
    return crc_condition(r, n, bound_b, alpha);
  };

  if (!holds(1.0)) {
    const double r1 = out.curve.back().risk;
    const double np1 = static_cast<double>(n) + 1.0;
    const double min_alpha = (static_cast<double>(n) * r1 + bound_b) / np1;
    throw InfeasibleAlphaError(alpha, n, min_alpha,
                               min_calibration_size(alpha, bound_b, r1));
  }
  if (holds(0.0)) {
    out.lambda_hat = 0.0;
  } else {
    double lo = 0.0;
    double hi = 1.0;
    while (hi - lo > epsilon) {
      const double mid = lo + 0.5 * (hi - lo);
      if (holds(mid))
        hi = mid;
      else
        lo = mid;
    }
    out.lambda_hat = hi;
  }
  std::sort(out.curve.begin(), out.curve.end(),
            [](const RiskSample& a, const RiskSample& b) { return a.lambda < b.lambda; });
  return out;
}

LossCurve::LossCurve(const Example& example, bool top1_fallback)
    : k_(example.scores.dims().k) {
  check_pair(example.scores, example.mask);
  const auto& scores = example.scores;
  const auto labels = example.mask.labels();
  const std::size_t n = labels.size();
  true_scores_.reserve(example.mask.valid_pixel_count());
  labels_.reserve(example.mask.valid_pixel_count());
  top1_.reserve(example.mask.valid_pixel_count());
  for (std::size_t p = 0; p < n; ++p) {
    const Label l = labels[p];
    if (l == kIgnore)
      continue;
    labels_.push_back(l);
    true_scores_.push_back(scores.values()[l * n + p]);
    top1_.push_back(top1_fallback && scores.argmax(p) == l ? 1 : 0);
  }
}

double LossCurve::operator()(const LossSpec& loss, double lambda) const {
  const CoverageParameter param(lambda);
  ClassCoverage counts(k_);
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    const Label l = labels_[i];
    ++counts.labelled[l];
    if (top1_[i] || threshold_indicator(true_scores_[i], param))
      ++counts.covered[l];
  }
  return loss_from_coverage(loss, counts);
}

EmpiricalRisk::EmpiricalRisk(std::span<const Example> examples,
                             const CalibrationConfig& config)
    : loss_(config.loss), threads_(config.threads) {
  if (examples.empty())
    throw Error(ErrorCode::EmptyCalibrationSet, "calibration set is empty");
  const Dims dims = examples.front().scores.dims();
  if (config.loss.kind == LossKind::WeightedMiscoverage &&
      config.loss.weights.size() != static_cast<std::size_t>(dims.k))
    throw Error(ErrorCode::DimensionMismatch,
                "expected " + std::to_string(dims.k) + " class weights, got " +
                    std::to_string(config.loss.weights.size()));
  for (const auto& ex : examples)
    if (ex.scores.dims().k != dims.k)
      throw Error(ErrorCode::DimensionMismatch,
                  "all calibration images must share the class count");
  curves_.reserve(examples.size());
  for (const auto& ex : examples)
    curves_.emplace_back(ex, config.top1_fallback);
  for (std::size_t i = 0; i < curves_.size(); ++i)
    if (!curves_[i].has_labelled_pixels())
      empty_.push_back(i);
}

double EmpiricalRisk::operator()(double lambda) const {
  std::vector<double> losses(curves_.size());
  parallel_for(curves_.size(), threads_,
               [&](std::size_t i) { losses[i] = curves_[i](loss_, lambda); });
  return empirical_risk(losses);
}

namespace {

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

} // namespace

CalibrationArtifact calibrate(std::span<const Example> cal_set,
                              const CalibrationConfig& config) {
  config.validate();
  if (cal_set.empty())
    throw Error(ErrorCode::EmptyCalibrationSet, "calibration set is empty");
  feasibility_check(config, cal_set.size());

  const EmpiricalRisk risk(cal_set, config);
  for (auto i : risk.empty_images())
    spdlog::warn("calibration image {} has no labelled pixels; its loss is 0", i);

  auto search = search_lambda([&](double lambda) { return risk(lambda); },
                              cal_set.size(), config.loss.bound_b, config.alpha,
                              config.epsilon);

  CalibrationArtifact art;
  art.lambda_hat = search.lambda_hat;
  art.alpha = config.alpha;
  art.n = cal_set.size();
  art.bound_b = config.loss.bound_b;
  art.epsilon = config.epsilon;
  art.loss = config.loss;
  art.top1_fallback = config.top1_fallback;
  art.seed = config.seed;
  art.risk_curve = std::move(search.curve);
  art.created_at = utc_timestamp();
  art.tool_version = std::string(kToolVersion);
  return art;
}

bool artifact_consistent(const CalibrationArtifact& artifact) {
  const auto& curve = artifact.risk_curve;
  for (std::size_t i = 1; i < curve.size(); ++i)
    if (curve[i].lambda < curve[i - 1].lambda || curve[i].risk > curve[i - 1].risk)
      return false;
  for (const auto& s : curve)
    if (s.lambda == artifact.lambda_hat)
      return crc_condition(s.risk, artifact.n, artifact.bound_b, artifact.alpha);
  return false;
}

} // namespace crcseg
