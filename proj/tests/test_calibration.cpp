#include <doctest.h>

#include <cmath>
#include <numeric>

#include <crcseg/calibration.hpp>
#include <crcseg/prediction_sets.hpp>

#include "support.hpp"

using namespace crcseg;

namespace {

/// One labelled pixel per image, K = 2, true-class score s. Without the
/// top-1 fallback the binary loss of image i jumps from 1 to 0 at
/// lambda = 1 - s.
std::vector<Example> step_images(std::initializer_list<float> true_scores) {
  std::vector<Example> out;
  for (float s : true_scores)
    out.push_back({ScoreTensor({2, 1, 1}, {s, 1.0f - s}), GroundTruthMask({2, 1, 1}, {0})});
  return out;
}

CalibrationConfig config(double alpha, LossSpec loss = LossSpec::miscoverage()) {
  CalibrationConfig c;
  c.alpha = alpha;
  c.loss = std::move(loss);
  c.threads = 1;
  return c;
}

void strip_time(CalibrationArtifact& a) { a.created_at.clear(); }

bool same(const CalibrationArtifact& a, const CalibrationArtifact& b) {
  return a.lambda_hat == b.lambda_hat && a.n == b.n && a.alpha == b.alpha &&
         a.risk_curve == b.risk_curve && a.loss == b.loss;
}

} // namespace

TEST_CASE("empirical risk is the arithmetic mean") {
  const std::vector<double> a{0, 1, 0, 1};
  CHECK(empirical_risk(a) == 0.5);
  const std::vector<double> b{0.25};
  CHECK(empirical_risk(b) == 0.25);
  CHECK(testing::code_of([] { (void)empirical_risk({}); }) == ErrorCode::EmptyCalibrationSet);

  Xoshiro256 rng(1);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> v(1 + rng.below(200));
    long double ref = 0.0L;
    for (auto& x : v) {
      x = rng.uniform();
      ref += x;
    }
    CHECK(std::abs(empirical_risk(v) - static_cast<double>(ref / v.size())) <= 1e-12);
  }
}

TEST_CASE("risk condition arithmetic") {
  CHECK(crc_condition(0.0, 4, 1.0, 0.2));
  CHECK_FALSE(crc_condition(0.0, 4, 1.0, 0.1));
  CHECK(crc_condition(0.0, 99, 1.0, 0.01));
  CHECK(crc_condition(0.05, 100, 1.0, 0.1)); // 0.0495 + 0.0099
  CHECK_FALSE(crc_condition(0.1, 100, 1.0, 0.1));
  CHECK(min_feasible_alpha(4, 1.0) == doctest::Approx(0.2));
}

TEST_CASE("minimum calibration size") {
  CHECK(min_calibration_size(0.1, 1.0) == 9);
  CHECK(min_calibration_size(0.01, 1.0) == 99);
  CHECK(min_calibration_size(0.001, 1.0) == 999);
  CHECK(min_calibration_size(0.05, 1.0) == 19);
  CHECK(min_calibration_size(0.1, 1.0, 0.1) == 0);
  for (double alpha : {0.3, 0.1, 0.07, 0.01, 0.003}) {
    const std::size_t n = min_calibration_size(alpha, 1.0);
    CHECK(crc_condition(0.0, n, 1.0, alpha));
    CHECK_FALSE(crc_condition(0.0, n - 1, 1.0, alpha));
  }
}

TEST_CASE("feasibility check") {
  try {
    feasibility_check(config(0.1), 4);
    FAIL("n = 4 must be infeasible at alpha = 0.1");
  } catch (const InfeasibleAlphaError& e) {
    CHECK(e.code() == ErrorCode::InfeasibleAlpha);
    CHECK(e.min_alpha() == doctest::Approx(0.2));
    CHECK(e.min_n() == 9);
    CHECK(e.n() == 4);
  }
  CHECK_NOTHROW(feasibility_check(config(0.01), 99));
  CHECK_THROWS_AS(feasibility_check(config(0.01), 98), InfeasibleAlphaError);
  CHECK_NOTHROW(feasibility_check(config(0.1), 10000));
  try {
    feasibility_check(config(0.001), 100);
    FAIL("n = 100 must be infeasible at alpha = 0.001");
  } catch (const InfeasibleAlphaError& e) {
    CHECK(e.min_n() == 999);
    CHECK(std::string(e.what()).find("999") != std::string::npos);
  }
}

TEST_CASE("config validation") {
  CHECK(testing::code_of([] { config(0.0).validate(); }) == ErrorCode::InvalidArgument);
  CHECK(testing::code_of([] { config(1.0).validate(); }) == ErrorCode::InvalidArgument);
  auto c = config(0.1);
  c.epsilon = 0.0;
  CHECK(testing::code_of([&] { c.validate(); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("bisection on a step function") {
  // R(lambda) = fraction of jump points above lambda; condition needs R <= 0.375
  const double jumps[4] = {0.2, 0.4, 0.6, 0.8};
  auto risk = [&](double lambda) {
    int above = 0;
    for (double j : jumps)
      above += lambda < j;
    return above / 4.0;
  };
  const double eps = 1e-5;
  auto r = search_lambda(risk, 4, 1.0, 0.5, eps);
  CHECK(r.lambda_hat >= 0.6);
  CHECK(r.lambda_hat <= 0.6 + eps);
  CHECK(crc_condition(risk(r.lambda_hat), 4, 1.0, 0.5));
  for (std::size_t i = 1; i < r.curve.size(); ++i)
    CHECK(r.curve[i - 1].lambda < r.curve[i].lambda);
}

TEST_CASE("bisection endpoints") {
  auto zero = [](double) { return 0.0; };
  CHECK(search_lambda(zero, 100, 1.0, 0.1, 1e-5).lambda_hat == 0.0);
  auto one = [](double) { return 1.0; };
  CHECK_THROWS_AS(search_lambda(one, 100, 1.0, 0.1, 1e-5), InfeasibleAlphaError);
}

TEST_CASE("calibrating step images lands on the fourth jump") {
  auto cal = step_images({0.8f, 0.6f, 0.4f, 0.2f});
  auto c = config(0.5, LossSpec::binary());
  c.top1_fallback = false;
  auto art = calibrate(cal, c);
  CHECK(art.lambda_hat >= 0.6 - 1e-6);
  CHECK(art.lambda_hat <= 0.6 + c.epsilon);

  testing::GridOracle oracle(cal, false, testing::GridOracle::Kind::Binary);
  CHECK(std::abs(art.lambda_hat - oracle.lambda_hat(0.5, 1e-6)) <= c.epsilon);
}

TEST_CASE("bisection agrees with a grid scan") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto cal = testing::random_examples({4, 16, 16}, 50, 100 + seed);
    auto c = config(0.1);
    c.epsilon = 1e-4;
    auto art = calibrate(cal, c);
    testing::GridOracle oracle(cal, true, testing::GridOracle::Kind::Miscoverage);
    CHECK(std::abs(art.lambda_hat - oracle.lambda_hat(0.1, 1e-5)) <= c.epsilon);

    auto bt = config(0.2, LossSpec::binary_threshold(0.75));
    bt.epsilon = 1e-4;
    auto art_bt = calibrate(cal, bt);
    testing::GridOracle oracle_bt(cal, true, testing::GridOracle::Kind::BinaryThreshold, 0.75);
    CHECK(std::abs(art_bt.lambda_hat - oracle_bt.lambda_hat(0.2, 1e-5)) <= bt.epsilon);
  }
}

TEST_CASE("the fused loss path equals lac_set plus compute_loss") {
  Xoshiro256 rng(30);
  const Dims d{5, 7, 9};
  std::vector<LossSpec> losses{LossSpec::binary(), LossSpec::binary_threshold(0.6),
                               LossSpec::miscoverage(),
                               LossSpec::weighted_miscoverage({1, 0, 2, 3, 0.5})};
  for (int t = 0; t < 30; ++t) {
    Example ex{testing::random_scores(d, rng), testing::random_mask(d, rng, 0.2)};
    const auto y = one_hot(ex.mask);
    for (bool fb : {false, true}) {
      LossCurve curve(ex, fb);
      for (int i = 0; i < 20; ++i) {
        const double lambda = i == 0 ? 0.0 : rng.uniform();
        const auto z = lac_set(ex.scores, CoverageParameter(lambda), fb);
        for (const auto& spec : losses)
          CHECK(curve(spec, lambda) == compute_loss(spec, z, y));
      }
    }
  }
}

TEST_CASE("empirical risk over examples matches a direct sum") {
  auto cal = testing::random_examples({3, 6, 6}, 25, 9);
  auto c = config(0.1);
  EmpiricalRisk risk(cal, c);
  for (double lambda : {0.0, 0.1, 0.5, 0.9, 1.0}) {
    long double ref = 0.0L;
    for (const auto& ex : cal)
      ref += compute_loss(c.loss, lac_set(ex.scores, CoverageParameter(lambda)),
                          one_hot(ex.mask));
    CHECK(std::abs(risk(lambda) - static_cast<double>(ref / cal.size())) <= 1e-12);
  }
}

TEST_CASE("perfect predictor calibrates to zero") {
  std::vector<Example> cal;
  Xoshiro256 rng(6);
  const Dims d{3, 4, 4};
  for (int i = 0; i < 20; ++i) {
    auto m = testing::random_mask(d, rng, 0.0);
    std::vector<float> v(d.size(), 0.0f);
    for (std::size_t p = 0; p < d.pixels(); ++p)
      v[m.labels()[p] * d.pixels() + p] = 1.0f;
    cal.push_back({ScoreTensor(d, v), m});
  }
  CHECK(calibrate(cal, config(0.1)).lambda_hat == 0.0);
}

TEST_CASE("images without labelled pixels score zero") {
  auto cal = testing::random_examples({3, 4, 4}, 30, 2);
  cal[3].mask = GroundTruthMask({3, 4, 4}, std::vector<Label>(16, kIgnore));
  EmpiricalRisk risk(cal, config(0.1));
  REQUIRE(risk.empty_images().size() == 1);
  CHECK(risk.empty_images()[0] == 3);
  CHECK_NOTHROW(calibrate(cal, config(0.1)));
}

TEST_CASE("calibration input errors") {
  CHECK(testing::code_of([] { (void)calibrate({}, config(0.1)); }) ==
        ErrorCode::EmptyCalibrationSet);
  auto cal = testing::random_examples({3, 4, 4}, 20, 2);
  auto other = testing::random_examples({4, 4, 4}, 1, 3);
  cal.push_back(other[0]);
  CHECK(testing::code_of([&] { (void)calibrate(cal, config(0.1)); }) ==
        ErrorCode::DimensionMismatch);
  auto few = testing::random_examples({3, 4, 4}, 4, 2);
  CHECK_THROWS_AS(calibrate(few, config(0.1)), InfeasibleAlphaError);
}

TEST_CASE("lambda-hat is non-increasing in alpha") {
  auto cal = testing::random_examples({4, 8, 8}, 100, 77);
  double prev = 2.0;
  for (double alpha : {0.02, 0.05, 0.1, 0.2, 0.4}) {
    const double l = calibrate(cal, config(alpha)).lambda_hat;
    CHECK(l <= prev);
    prev = l;
  }
}

TEST_CASE("calibration is deterministic across thread counts") {
  auto cal = testing::random_examples({4, 12, 12}, 40, 5);
  auto c1 = config(0.1);
  auto a = calibrate(cal, c1);
  auto b = calibrate(cal, c1);
  c1.threads = 8;
  auto c = calibrate(cal, c1);
  strip_time(a);
  strip_time(b);
  strip_time(c);
  CHECK(same(a, b));
  CHECK(same(a, c));
}

TEST_CASE("artifact invariants") {
  auto cal = testing::random_examples({4, 8, 8}, 60, 15);
  auto art = calibrate(cal, config(0.1));
  CHECK(artifact_consistent(art));
  CHECK(art.n == 60);
  CHECK(art.risk_curve.front().lambda == 0.0);
  CHECK(art.risk_curve.back().lambda == 1.0);
  CHECK(art.risk_curve.back().risk == 0.0);
  CHECK(art.risk_curve.size() == 19);
  CHECK_FALSE(art.created_at.empty());
  CHECK(art.tool_version.find("crcseg") == 0);

  auto broken = art;
  std::swap(broken.risk_curve[0], broken.risk_curve[1]);
  CHECK_FALSE(artifact_consistent(broken));
}
