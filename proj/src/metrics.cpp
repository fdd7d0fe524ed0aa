#include "crcseg/metrics.hpp"

#include <cmath>
#include <limits>

#include "crcseg/error.hpp"
#include "crcseg/parallel.hpp"
#include "crcseg/prediction_sets.hpp"

namespace crcseg {

std::vector<std::uint8_t> validity_map(const GroundTruthMask& mask) {
  const auto labels = mask.labels();
  std::vector<std::uint8_t> valid(labels.size());
  for (std::size_t p = 0; p < labels.size(); ++p)
    valid[p] = labels[p] != kIgnore ? 1 : 0;
  return valid;
}

double activation_ratio(const MultiMask& z, std::span<const std::uint8_t> valid) {
  if (valid.size() != z.dims().pixels())
    throw Error(ErrorCode::DimensionMismatch, "validity map does not match mask");
  const auto sizes = set_size_map(z);
  std::size_t total = 0;
  std::size_t count = 0;
  for (std::size_t p = 0; p < valid.size(); ++p) {
    if (!valid[p])
      continue;
    total += static_cast<std::size_t>(sizes[p]);
    ++count;
  }
  if (count == 0)
    throw Error(ErrorCode::ZeroValidPixels, "no valid pixel for activation ratio");
  return static_cast<double>(total) / static_cast<double>(count);
}

EvaluationReport evaluate(std::span<const Example> test_set,
                          const CalibrationArtifact& artifact, unsigned threads,
                          std::span<const std::string> ids) {
  if (test_set.empty())
    throw Error(ErrorCode::EmptyCalibrationSet, "test set is empty");
  if (!ids.empty() && ids.size() != test_set.size())
    throw Error(ErrorCode::InvalidArgument, "one id per test image required");
  artifact.loss.validate();
  const CoverageParameter lambda(artifact.lambda_hat);

  EvaluationReport report;
  report.per_image.resize(test_set.size());
  parallel_for(test_set.size(), threads, [&](std::size_t i) {
    const auto& ex = test_set[i];
    check_pair(ex.scores, ex.mask);
    const MultiMask z = lac_set(ex.scores, lambda, artifact.top1_fallback);
    auto& row = report.per_image[i];
    row.id = ids.empty() ? std::to_string(i) : ids[i];
    row.valid_pixels = ex.mask.valid_pixel_count();
    row.loss = compute_loss(artifact.loss, z, one_hot(ex.mask));
    row.activation_ratio = row.valid_pixels == 0
                               ? std::numeric_limits<double>::quiet_NaN()
                               : activation_ratio(z, validity_map(ex.mask));
  });

  double loss_sum = 0.0;
  double ar_sum = 0.0;
  std::size_t ar_count = 0;
  for (const auto& row : report.per_image) {
    loss_sum += row.loss;
    if (row.valid_pixels > 0) {
      ar_sum += row.activation_ratio;
      ++ar_count;
    }
  }
  if (ar_count == 0)
    throw Error(ErrorCode::ZeroValidPixels, "no test image has labelled pixels");
  report.n_test = test_set.size();
  report.empirical_risk = loss_sum / static_cast<double>(test_set.size());
  report.activation_ratio = ar_sum / static_cast<double>(ar_count);
  report.lambda_hat = artifact.lambda_hat;
  report.alpha = artifact.alpha;
  report.loss = artifact.loss;
  return report;
}

namespace {

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

MeanStd mean_std(const std::vector<double>& xs) {
  MeanStd out;
  for (double x : xs)
    out.mean += x;
  out.mean /= static_cast<double>(xs.size());
  if (xs.size() < 2)
    return out;
  double ss = 0.0;
  for (double x : xs)
    ss += (x - out.mean) * (x - out.mean);
  out.std = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  return out;
}

} // namespace

EvaluationReport aggregate_runs(std::span<const EvaluationReport> reports) {
  if (reports.empty())
    throw Error(ErrorCode::InvalidArgument, "no reports to aggregate");
  if (reports.size() == 1) {
    EvaluationReport out = reports.front();
    out.risk_std = 0.0;
    out.activation_ratio_std = 0.0;
    return out;
  }
  const auto& first = reports.front();
  std::vector<double> risks;
  std::vector<double> ars;
  std::vector<double> lambdas;
  std::size_t n_test = 0;
  for (const auto& r : reports) {
    if (r.alpha != first.alpha || !(r.loss == first.loss))
      throw Error(ErrorCode::ConfigMismatch,
                  "runs differ in alpha or loss and cannot be aggregated");
    risks.push_back(r.empirical_risk);
    ars.push_back(r.activation_ratio);
    lambdas.push_back(r.lambda_hat);
    n_test += r.n_test;
  }
  const auto risk = mean_std(risks);
  const auto ar = mean_std(ars);
  EvaluationReport out;
  out.empirical_risk = risk.mean;
  out.risk_std = risk.std;
  out.activation_ratio = ar.mean;
  out.activation_ratio_std = ar.std;
  out.n_test = n_test;
  out.runs = reports.size();
  out.lambda_hat = mean_std(lambdas).mean;
  out.alpha = first.alpha;
  out.loss = first.loss;
  return out;
}

} // namespace crcseg
