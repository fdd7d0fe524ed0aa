#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <crcseg/error.hpp>
#include <crcseg/npy.hpp>
#include <crcseg/rng.hpp>

namespace testing {

struct FuzzStats {
  std::size_t cases = 0;
  std::size_t accepted = 0;
  std::size_t typed_rejections = 0;
  std::size_t untyped_rejections = 0;
  std::vector<std::string> untyped_messages;
};

/// Mutates the header of a valid score file `cases` times and feeds every
/// variant to all three NPY readers.
inline FuzzStats fuzz_npy_headers(std::size_t cases, std::uint64_t seed) {
  using namespace crcseg;
  Xoshiro256 rng(seed);

  std::vector<float> v(2 * 3 * 4, 0.5f);
  const auto base = encode_scores(ScoreTensor({2, 3, 4}, v));
  const std::size_t header_end = parse_npy_header(base).data_offset;

  static const char* const fragments[] = {
      "'descr'", "'<f4'", "'|u1'", "'<u2'", "'>f4'", "'<f8'", "'fortran_order'", "True",
      "False", "'shape'", "(", ")", "{", "}", ",", ":", "'", "\"", "99999999999999999999",
      "4294967296", "-1", "0", "()", "(2,)", "(2, 3, 4, 5)", "\n", "\\", "\x80", " "};

  FuzzStats stats;
  for (std::size_t c = 0; c < cases; ++c) {
    std::vector<std::uint8_t> b = base;
    const int edits = 1 + static_cast<int>(rng.below(4));
    for (int e = 0; e < edits; ++e) {
      switch (rng.below(7)) {
      case 0: // flip a bit in the header
        if (b.empty())
          break;
        b[rng.below(std::min(header_end, b.size()))] ^= static_cast<std::uint8_t>(1u << rng.below(8));
        break;
      case 1: // overwrite a header byte
        if (b.empty())
          break;
        b[rng.below(std::min(header_end, b.size()))] = static_cast<std::uint8_t>(rng.below(256));
        break;
      case 2: // truncate
        b.resize(rng.below(b.size() + 1));
        break;
      case 3: { // splice a fragment into the dictionary text
        if (b.size() <= 10)
          break;
        const std::string f = fragments[rng.below(std::size(fragments))];
        const std::size_t at = 10 + rng.below(std::min(header_end, b.size()) - 10);
        b.insert(b.begin() + static_cast<std::ptrdiff_t>(at), f.begin(), f.end());
        break;
      }
      case 4: // rewrite the declared header length
        if (b.size() >= 10) {
          b[8] = static_cast<std::uint8_t>(rng.below(256));
          b[9] = static_cast<std::uint8_t>(rng.below(256));
        }
        break;
      case 5: { // replace a dictionary token
        if (b.size() <= 10)
          break;
        const std::size_t at = 10 + rng.below(std::min(header_end, b.size()) - 10);
        const std::string f = fragments[rng.below(std::size(fragments))];
        for (std::size_t i = 0; i < f.size() && at + i < b.size(); ++i)
          b[at + i] = static_cast<std::uint8_t>(f[i]);
        break;
      }
      case 6: // append or drop payload bytes
        if (rng.below(2) == 0)
          b.push_back(static_cast<std::uint8_t>(rng.below(256)));
        else if (!b.empty())
          b.pop_back();
        break;
      }
    }

    auto attempt = [&](auto&& parse) {
      ++stats.cases;
      try {
        parse(b);
        ++stats.accepted;
      } catch (const Error&) {
        ++stats.typed_rejections;
      } catch (const std::exception& ex) {
        ++stats.untyped_rejections;
        stats.untyped_messages.push_back(ex.what());
      } catch (...) {
        ++stats.untyped_rejections;
        stats.untyped_messages.push_back("non-standard exception");
      }
    };
    attempt([](const auto& x) { (void)parse_scores(x, false); });
    attempt([](const auto& x) { (void)parse_labels(x); });
    attempt([](const auto& x) { (void)parse_multimask(x); });
  }
  return stats;
}

} // namespace testing
