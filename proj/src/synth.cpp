#include "crcseg/synth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "crcseg/error.hpp"
#include "crcseg/manifest.hpp"
#include "crcseg/metrics.hpp"
#include "crcseg/parallel.hpp"
#include "crcseg/rng.hpp"

namespace crcseg {

void SynthConfig::validate() const {
  dims.validate();
  if (dims.k >= kIgnore)
    throw Error(ErrorCode::InvalidArgument, "too many classes");
  if (n_images < 2)
    throw Error(ErrorCode::InvalidArgument, "n_images must be at least 2");
  if (blob_count < 1)
    throw Error(ErrorCode::InvalidArgument, "blob_count must be at least 1");
  if (!(temperature > 0.0))
    throw Error(ErrorCode::InvalidArgument, "temperature must be positive");
  if (!(corruption >= 0.0 && corruption <= 1.0))
    throw Error(ErrorCode::InvalidArgument, "corruption must lie in [0,1]");
  if (!(noise >= 0.0))
    throw Error(ErrorCode::InvalidArgument, "noise must be non-negative");
}

namespace {

Example generate_one(const SynthConfig& cfg, std::uint64_t seed) {
  const Dims d = cfg.dims;
  Xoshiro256 rng(seed);

  struct Site {
    double x, y;
    Label cls;
  };
  std::vector<Site> sites(cfg.blob_count);
  for (auto& s : sites) {
    s.x = rng.uniform() * d.w;
    s.y = rng.uniform() * d.h;
    s.cls = static_cast<Label>(rng.below(d.k));
  }

  const std::size_t n = d.pixels();
  std::vector<Label> labels(n);
  for (int i = 0; i < d.h; ++i) {
    for (int j = 0; j < d.w; ++j) {
      double best = std::numeric_limits<double>::infinity();
      Label cls = 0;
      for (const auto& s : sites) {
        const double dx = j + 0.5 - s.x;
        const double dy = i + 0.5 - s.y;
        const double dist = dx * dx + dy * dy;
        if (dist < best) {
          best = dist;
          cls = s.cls;
        }
      }
      labels[static_cast<std::size_t>(i) * d.w + j] = cls;
    }
  }

  std::vector<float> values(d.size());
  std::vector<double> logits(d.k);
  for (std::size_t p = 0; p < n; ++p) {
    int favoured = labels[p];
    if (rng.uniform() < cfg.corruption) {
      const int r = static_cast<int>(rng.below(d.k - 1));
      favoured = r >= favoured ? r + 1 : r;
    }
    double top = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < d.k; ++k) {
      logits[k] = ((k == favoured ? 1.0 : 0.0) + cfg.noise * rng.normal()) / cfg.temperature;
      top = std::max(top, logits[k]);
    }
    double sum = 0.0;
    for (int k = 0; k < d.k; ++k) {
      logits[k] = std::exp(logits[k] - top);
      sum += logits[k];
    }
    for (int k = 0; k < d.k; ++k)
      values[k * n + p] = static_cast<float>(logits[k] / sum);
  }
  return Example{ScoreTensor(d, std::move(values)),
                 GroundTruthMask(d, std::move(labels))};
}

struct RunningStats {
  std::vector<double> risks;
  double ar_sum = 0.0;
  double lambda_sum = 0.0;
};

} // namespace

std::vector<Example> generate(const SynthConfig& config, unsigned threads) {
  config.validate();
  std::vector<Example> out(config.n_images);
  parallel_for(config.n_images, threads, [&](std::size_t i) {
    out[i] = generate_one(config, derive_seed(config.seed, i));
  });
  return out;
}

std::vector<TrialSummary> validate_guarantee(const GuaranteeHarness& harness,
                                             std::span<const CalibrationConfig> configs) {
  harness.data.validate();
  if (harness.trials < 1)
    throw Error(ErrorCode::InvalidArgument, "trials must be at least 1");
  if (harness.n_cal < 1 || harness.n_cal >= harness.data.n_images)
    throw Error(ErrorCode::DegenerateSplit,
                "n_cal must leave at least one test image");
  for (const auto& c : configs) {
    c.validate();
    feasibility_check(c, harness.n_cal);
  }

  std::vector<RunningStats> stats(configs.size());
  for (std::size_t t = 0; t < harness.trials; ++t) {
    SynthConfig data_cfg = harness.data;
    data_cfg.seed = derive_seed(harness.data.seed, t);
    const unsigned threads = configs.empty() ? 0 : configs.front().threads;
    std::vector<Example> data = generate(data_cfg, threads);

    const auto order = shuffled_indices(data.size(), derive_seed(data_cfg.seed, data.size()));
    std::vector<Example> cal;
    std::vector<Example> test;
    for (std::size_t i = 0; i < order.size(); ++i)
      (i < harness.n_cal ? cal : test).push_back(std::move(data[order[i]]));

    for (std::size_t c = 0; c < configs.size(); ++c) {
      const auto artifact = calibrate(cal, configs[c]);
      const auto report = evaluate(test, artifact, configs[c].threads);
      stats[c].risks.push_back(report.empirical_risk);
      stats[c].ar_sum += report.activation_ratio;
      stats[c].lambda_sum += artifact.lambda_hat;
    }
  }

  std::vector<TrialSummary> out;
  const double r = static_cast<double>(harness.trials);
  for (std::size_t c = 0; c < configs.size(); ++c) {
    TrialSummary s;
    s.trials = harness.trials;
    s.alpha = configs[c].alpha;
    s.loss = configs[c].loss;
    double sum = 0.0;
    for (double x : stats[c].risks)
      sum += x;
    s.mean_test_risk = sum / r;
    if (harness.trials > 1) {
      double ss = 0.0;
      for (double x : stats[c].risks)
        ss += (x - s.mean_test_risk) * (x - s.mean_test_risk);
      s.std_test_risk = std::sqrt(ss / (r - 1.0));
    }
    s.standard_error = s.std_test_risk / std::sqrt(r);
    s.mean_activation_ratio = stats[c].ar_sum / r;
    s.mean_lambda_hat = stats[c].lambda_sum / r;
    s.pass = s.mean_test_risk <= s.alpha + 3.0 * s.standard_error;
    out.push_back(s);
  }
  return out;
}

TrialSummary validate_guarantee(const GuaranteeHarness& harness,
                                const CalibrationConfig& config) {
  return validate_guarantee(harness, std::span(&config, 1)).front();
}

} // namespace crcseg
