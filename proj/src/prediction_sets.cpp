#include "crcseg/prediction_sets.hpp"

#include <string>

#include "crcseg/error.hpp"

namespace crcseg {

CoverageParameter::CoverageParameter(double lambda) : lambda_(lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0))
    throw Error(ErrorCode::InvalidArgument,
                "coverage parameter must lie in [0,1], got " +
                    std::to_string(lambda));
}

MultiMask lac_set(const ScoreTensor& scores, CoverageParameter lambda,
                  bool top1_fallback) {
  const Dims& d = scores.dims();
  const std::size_t n = d.pixels();
  const auto values = scores.values();
  std::vector<std::uint8_t> bits(d.size());
  for (std::size_t i = 0; i < bits.size(); ++i)
    bits[i] = threshold_indicator(values[i], lambda) ? 1 : 0;
  if (top1_fallback)
    for (std::size_t p = 0; p < n; ++p)
      bits[scores.argmax(p) * n + p] = 1;
  return MultiMask(d, std::move(bits));
}

std::vector<std::int32_t> set_size_map(const MultiMask& z) {
  const Dims& d = z.dims();
  const std::size_t n = d.pixels();
  std::vector<std::int32_t> counts(n, 0);
  for (int k = 0; k < d.k; ++k) {
    const auto ch = z.channel(k);
    for (std::size_t p = 0; p < n; ++p)
      counts[p] += ch[p];
  }
  return counts;
}

} // namespace crcseg
