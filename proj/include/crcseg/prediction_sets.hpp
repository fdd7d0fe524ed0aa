#pragma once

#include <cstdint>
#include <vector>

#include "crcseg/types.hpp"

namespace crcseg {

/// Coverage parameter lambda in [0,1]; larger values admit more classes.
class CoverageParameter {
public:
  /// Throws InvalidArgument outside [0,1].
  explicit CoverageParameter(double lambda);

  double value() const { return lambda_; }
  /// Minimum score admitted into the set: 1 - lambda.
  double threshold() const { return 1.0 - lambda_; }

private:
  double lambda_;
};

/// T_lambda(p): 1 iff p >= 1 - lambda (inclusive).
inline bool threshold_indicator(double p, CoverageParameter lambda) {
  return p >= lambda.threshold();
}

/// LAC prediction set at every pixel. With `top1_fallback` the argmax class
/// (smallest index on ties) is always included.
MultiMask lac_set(const ScoreTensor& scores, CoverageParameter lambda,
                  bool top1_fallback = true);

/// Number of active classes per pixel, row-major (H, W).
std::vector<std::int32_t> set_size_map(const MultiMask& z);

} // namespace crcseg
