#include <doctest.h>

#include <cmath>

#include <crcseg/metrics.hpp>
#include <crcseg/prediction_sets.hpp>

#include "support.hpp"

using namespace crcseg;

namespace {

CalibrationArtifact artifact_at(double lambda, double alpha = 0.1) {
  CalibrationArtifact a;
  a.lambda_hat = lambda;
  a.alpha = alpha;
  a.loss = LossSpec::miscoverage();
  return a;
}

} // namespace

TEST_CASE("activation ratio examples") {
  const Dims d{4, 2, 2};
  const std::vector<std::uint8_t> all(4, 1);
  CHECK(activation_ratio(one_hot(GroundTruthMask(d, {0, 1, 2, 3})), all) == 1.0);
  CHECK(activation_ratio(MultiMask::ones({19, 2, 2}), all) == 19.0);

  // set sizes 1, 2, 1, 4
  MultiMask z(d, {1, 1, 1, 1, 0, 1, 0, 1, 0, 0, 0, 1, 0, 0, 0, 1});
  CHECK(activation_ratio(z, all) == doctest::Approx(2.0));

  // void pixels do not count
  CHECK(activation_ratio(z, std::vector<std::uint8_t>{1, 1, 1, 0}) == doctest::Approx(4.0 / 3.0));
  CHECK(testing::code_of([&] {
          (void)activation_ratio(z, std::vector<std::uint8_t>(4, 0));
        }) == ErrorCode::ZeroValidPixels);
}

TEST_CASE("activation ratio grows with lambda") {
  Xoshiro256 rng(40);
  const Dims d{5, 6, 6};
  for (int t = 0; t < 20; ++t) {
    auto s = testing::random_scores(d, rng);
    auto valid = validity_map(testing::random_mask(d, rng, 0.2));
    double prev = 0.0;
    for (int i = 0; i <= 20; ++i) {
      const double ar = activation_ratio(lac_set(s, CoverageParameter(i / 20.0)), valid);
      CHECK(ar >= prev);
      CHECK(ar >= 1.0);
      CHECK(ar <= d.k);
      prev = ar;
    }
  }
}

TEST_CASE("evaluate at the extremes") {
  auto test = testing::random_examples({4, 8, 8}, 10, 1);
  auto full = evaluate(test, artifact_at(1.0), 1);
  CHECK(full.empirical_risk == 0.0);
  CHECK(full.activation_ratio == 4.0);
  CHECK(full.n_test == 10);
  CHECK(full.per_image.size() == 10);

  auto narrow = evaluate(test, artifact_at(0.0), 1);
  CHECK(narrow.empirical_risk > 0.0);
  CHECK(narrow.activation_ratio == 1.0);
}

TEST_CASE("evaluate reports per-image rows and ids") {
  auto test = testing::random_examples({3, 5, 5}, 3, 2);
  test[1].mask = GroundTruthMask({3, 5, 5}, std::vector<Label>(25, kIgnore));
  const std::vector<std::string> ids{"a", "b", "c"};
  auto r = evaluate(test, artifact_at(0.3), 1, ids);
  REQUIRE(r.per_image.size() == 3);
  CHECK(r.per_image[1].id == "b");
  CHECK(r.per_image[1].loss == 0.0);
  CHECK(std::isnan(r.per_image[1].activation_ratio));
  CHECK(r.per_image[1].valid_pixels == 0);
  CHECK(r.activation_ratio ==
        doctest::Approx((r.per_image[0].activation_ratio + r.per_image[2].activation_ratio) / 2));
  CHECK(r.empirical_risk ==
        doctest::Approx((r.per_image[0].loss + r.per_image[2].loss) / 3));
}

TEST_CASE("evaluate is deterministic across thread counts") {
  auto test = testing::random_examples({4, 10, 10}, 12, 4);
  auto a = evaluate(test, artifact_at(0.4), 1);
  auto b = evaluate(test, artifact_at(0.4), 8);
  CHECK(a.empirical_risk == b.empirical_risk);
  CHECK(a.activation_ratio == b.activation_ratio);
}

TEST_CASE("aggregating runs") {
  EvaluationReport one;
  one.empirical_risk = 0.1;
  one.alpha = 0.1;
  auto single = aggregate_runs(std::vector<EvaluationReport>{one});
  CHECK(single.risk_std == 0.0);
  CHECK(single.runs == 1);

  EvaluationReport two = one;
  two.empirical_risk = 0.2;
  auto agg = aggregate_runs(std::vector<EvaluationReport>{one, two});
  CHECK(agg.empirical_risk == doctest::Approx(0.15));
  CHECK(agg.risk_std == doctest::Approx(0.0707106781));
  CHECK(agg.runs == 2);

  two.alpha = 0.05;
  CHECK(testing::code_of([&] { (void)aggregate_runs(std::vector<EvaluationReport>{one, two}); }) ==
        ErrorCode::ConfigMismatch);
}

TEST_CASE("activation ratio falls as alpha grows") {
  auto data = testing::random_examples({4, 8, 8}, 200, 7);
  std::span<const Example> cal(data.data(), 100), test(data.data() + 100, 100);
  double prev = 1e9;
  for (double alpha : {0.01, 0.05, 0.1}) {
    CalibrationConfig c;
    c.alpha = alpha;
    c.threads = 1;
    const double ar = evaluate(test, calibrate(cal, c), 1).activation_ratio;
    CHECK(ar <= prev);
    prev = ar;
  }
}
