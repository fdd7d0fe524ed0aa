#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <doctest.h>

#include <crcseg/calibration.hpp>
#include <crcseg/error.hpp>
#include <crcseg/rng.hpp>
#include <crcseg/types.hpp>

namespace testing {

using namespace crcseg;

/// Code of the crcseg::Error thrown by `fn`; fails the test otherwise.
template <typename Fn>
ErrorCode code_of(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected crcseg::Error");
  return ErrorCode::Io;
}

/// Softmax-valid tensor with a few dominant entries so ties and near-ties
/// with the threshold both occur.
inline ScoreTensor random_scores(Dims d, Xoshiro256& rng) {
  std::vector<float> v(d.size());
  const std::size_t px = d.pixels();
  for (std::size_t p = 0; p < px; ++p) {
    double sum = 0.0;
    std::vector<double> raw(d.k);
    for (int k = 0; k < d.k; ++k) {
      raw[k] = -std::log(1.0 - rng.uniform());
      sum += raw[k];
    }
    for (int k = 0; k < d.k; ++k)
      v[k * px + p] = static_cast<float>(raw[k] / sum);
  }
  return ScoreTensor(d, std::move(v));
}

inline GroundTruthMask random_mask(Dims d, Xoshiro256& rng, double void_rate = 0.1) {
  std::vector<Label> y(d.pixels());
  for (auto& l : y)
    l = rng.uniform() < void_rate ? kIgnore : static_cast<Label>(rng.below(d.k));
  return GroundTruthMask(d, std::move(y));
}

inline MultiMask random_multimask(Dims d, Xoshiro256& rng, double density = 0.5) {
  std::vector<std::uint8_t> b(d.size());
  for (auto& x : b)
    x = rng.uniform() < density ? 1 : 0;
  return MultiMask(d, std::move(b));
}

inline std::vector<Example> random_examples(Dims d, std::size_t n, std::uint64_t seed,
                                            double void_rate = 0.1) {
  Xoshiro256 rng(seed);
  std::vector<Example> out;
  for (std::size_t i = 0; i < n; ++i) {
    auto s = random_scores(d, rng);
    auto m = random_mask(d, rng, void_rate);
    out.push_back({std::move(s), std::move(m)});
  }
  return out;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("crcseg_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

/// Reference lambda-hat by scanning a uniform grid from 0 upward. Built
/// directly from the sorted true-class scores of every labelled pixel, with
/// none of the library's loss or search code.
class GridOracle {
public:
  enum class Kind { Binary, BinaryThreshold, Miscoverage };

  GridOracle(std::span<const Example> examples, bool fallback, Kind kind, double tau = 1.0)
      : kind_(kind), tau_(tau) {
    for (const auto& ex : examples) {
      Image img;
      const auto& d = ex.scores.dims();
      for (std::size_t p = 0; p < d.pixels(); ++p) {
        const Label y = ex.mask.labels()[p];
        if (y == kIgnore)
          continue;
        ++img.labelled;
        float best = -1.0f;
        int arg = 0;
        for (int k = 0; k < d.k; ++k) {
          const float s = ex.scores.channel(k)[p];
          if (s > best) {
            best = s;
            arg = k;
          }
        }
        if (fallback && arg == y)
          ++img.always;
        else
          img.scores.push_back(ex.scores.channel(y)[p]);
      }
      std::sort(img.scores.begin(), img.scores.end());
      images_.push_back(std::move(img));
    }
  }

  double risk(double lambda) const {
    double total = 0.0;
    for (const auto& img : images_) {
      if (img.labelled == 0)
        continue;
      const double t = 1.0 - lambda;
      const auto first = std::lower_bound(img.scores.begin(), img.scores.end(), t,
                                          [](float s, double v) { return s < v; });
      const std::size_t covered = img.always + static_cast<std::size_t>(img.scores.end() - first);
      const double ratio = static_cast<double>(covered) / static_cast<double>(img.labelled);
      switch (kind_) {
      case Kind::Binary: total += covered == img.labelled ? 0.0 : 1.0; break;
      case Kind::BinaryThreshold: total += ratio < tau_ ? 1.0 : 0.0; break;
      case Kind::Miscoverage: total += 1.0 - ratio; break;
      }
    }
    return total / static_cast<double>(images_.size());
  }

  /// Smallest grid point lambda = i * step meeting the risk condition.
  double lambda_hat(double alpha, double step) const {
    const double n = static_cast<double>(images_.size());
    const auto steps = static_cast<std::size_t>(std::llround(1.0 / step));
    for (std::size_t i = 0; i <= steps; ++i) {
      const double lambda = std::min(1.0, static_cast<double>(i) * step);
      if (n / (n + 1.0) * risk(lambda) + 1.0 / (n + 1.0) <= alpha)
        return lambda;
    }
    return 2.0;
  }

private:
  struct Image {
    std::size_t labelled = 0;
    std::size_t always = 0;
    std::vector<float> scores;
  };
  std::vector<Image> images_;
  Kind kind_;
  double tau_;
};

} // namespace testing
