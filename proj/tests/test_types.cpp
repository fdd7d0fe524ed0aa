#include <doctest.h>

#include <crcseg/error.hpp>
#include <crcseg/types.hpp>

#include "support.hpp"

using namespace crcseg;

TEST_CASE("one_hot sets exactly the labelled class") {
  const Dims d{3, 1, 1};
  auto z = one_hot(GroundTruthMask(d, {2}));
  CHECK(z.bits()[0] == 0);
  CHECK(z.bits()[1] == 0);
  CHECK(z.bits()[2] == 1);

  auto v = one_hot(GroundTruthMask(d, {kIgnore}));
  CHECK(v == MultiMask::zeros(d));
}

TEST_CASE("one_hot channel sums on a 2x2 mask") {
  const Dims d{3, 2, 2};
  auto z = one_hot(GroundTruthMask(d, {0, 1, kIgnore, 0}));
  int sums[3] = {0, 0, 0};
  for (int k = 0; k < 3; ++k)
    for (auto b : z.channel(k))
      sums[k] += b;
  CHECK(sums[0] == 2);
  CHECK(sums[1] == 1);
  CHECK(sums[2] == 0);
}

TEST_CASE("one_hot activates one bit per valid pixel") {
  Xoshiro256 rng(11);
  for (int t = 0; t < 20; ++t) {
    const Dims d{4, 7, 5};
    auto m = testing::random_mask(d, rng, 0.3);
    auto z = one_hot(m);
    std::size_t active = 0;
    for (auto b : z.bits())
      active += b;
    CHECK(active == m.valid_pixel_count());
  }
}

TEST_CASE("mask_contains is a partial order") {
  const Dims d{3, 4, 4};
  Xoshiro256 rng(5);
  auto ones = MultiMask::ones(d);
  for (int t = 0; t < 100; ++t) {
    auto a = testing::random_multimask(d, rng, 0.8);
    auto b = testing::random_multimask(d, rng, 0.8);
    auto c = testing::random_multimask(d, rng, 0.8);
    CHECK(mask_contains(ones, a));
    CHECK(mask_contains(a, a));
    CHECK(mask_contains(a, MultiMask::zeros(d)));
    if (mask_contains(a, b) && mask_contains(b, a))
      CHECK(a == b);
    if (mask_contains(a, b) && mask_contains(b, c))
      CHECK(mask_contains(a, c));
  }
}

TEST_CASE("mask_contains fails on a single missing bit") {
  const Dims d{2, 2, 2};
  auto a = MultiMask::ones(d);
  std::vector<std::uint8_t> bits(d.size(), 1);
  bits[5] = 0;
  MultiMask b(d, bits);
  CHECK(mask_contains(a, b));
  CHECK_FALSE(mask_contains(b, a));
}

TEST_CASE("mask_contains rejects differing dims") {
  auto a = MultiMask::ones({2, 2, 2});
  auto b = MultiMask::ones({3, 2, 2});
  CHECK(testing::code_of([&] { (void)mask_contains(a, b); }) == ErrorCode::DimensionMismatch);
}

TEST_CASE("score tensor validation") {
  const Dims d{2, 1, 2};
  CHECK_NOTHROW(ScoreTensor(d, {0.25f, 0.5f, 0.75f, 0.5f}));
  CHECK(testing::code_of([&] { ScoreTensor(d, {0.25f, 0.5f, 0.70f, 0.5f}); }) ==
        ErrorCode::SoftmaxValidation);
  CHECK(testing::code_of([&] { ScoreTensor(d, {-0.1f, 0.5f, 1.1f, 0.5f}); }) ==
        ErrorCode::SoftmaxValidation);
  CHECK_NOTHROW(ScoreTensor(d, {0.25f, 0.5f, 0.70f, 0.5f}, false));
  CHECK(testing::code_of([&] { ScoreTensor(d, {0.5f, 0.5f}); }) == ErrorCode::DimensionMismatch);
  CHECK(testing::code_of([] { ScoreTensor(Dims{1, 1, 1}, {1.0f}); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("argmax breaks ties toward the smallest class") {
  ScoreTensor s({3, 1, 2}, {0.4f, 0.2f, 0.4f, 0.2f, 0.2f, 0.6f});
  CHECK(s.argmax(0) == 0);
  CHECK(s.argmax(1) == 2);
}

TEST_CASE("labels outside the class range are rejected") {
  CHECK(testing::code_of([] { GroundTruthMask({19, 1, 1}, {19}); }) == ErrorCode::LabelOutOfRange);
  GroundTruthMask ok({19, 1, 2}, {18, kIgnore});
  CHECK(ok.valid_pixel_count() == 1);
}

TEST_CASE("multi-mask bits must be 0 or 1") {
  CHECK(testing::code_of([] { MultiMask({2, 1, 1}, {1, 2}); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("check_pair compares grids and class counts") {
  Xoshiro256 rng(1);
  auto s = testing::random_scores({3, 2, 2}, rng);
  CHECK_NOTHROW(check_pair(s, GroundTruthMask({3, 2, 2}, {0, 1, 2, kIgnore})));
  CHECK(testing::code_of([&] { check_pair(s, GroundTruthMask({3, 2, 1}, {0, 1})); }) ==
        ErrorCode::DimensionMismatch);
}
