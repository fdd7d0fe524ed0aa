#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "crcseg/calibration.hpp"

namespace crcseg {

/// One line of a JSON Lines manifest:
///   {"id": "...", "scores_path": "...", "mask_path": "...", "image_path": "..."}
/// `image_path` is optional. Relative paths resolve against the manifest's
/// directory.
struct ManifestEntry {
  std::string id;
  std::filesystem::path scores_path;
  std::filesystem::path mask_path;
  std::optional<std::filesystem::path> image_path;

  bool operator==(const ManifestEntry&) const = default;
};

using Manifest = std::vector<ManifestEntry>;

/// Throws ManifestError on bad JSON, missing fields, empty paths or
/// duplicate ids. Blank lines are skipped.
Manifest parse_manifest(std::string_view text, const std::filesystem::path& base_dir = {});
Manifest read_manifest(const std::filesystem::path& path);
/// Paths are written as given.
std::string format_manifest(const Manifest& manifest);
void write_manifest(const std::filesystem::path& path, const Manifest& manifest);

struct SplitSpec {
  std::uint64_t seed = 0;
  double cal_fraction = 0.5;
};

/// Fisher-Yates permutation of [0, n) driven by Xoshiro256(seed): for i from
/// n-1 down to 1, swap i with below(i+1).
std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed);

/// Number of calibration entries: ceil(cal_fraction * n), where products
/// within 1e-9 of an integer count as that integer. Throws DegenerateSplit
/// unless both sides end up non-empty.
std::size_t calibration_count(std::size_t n, double cal_fraction);

/// Sorts by id, shuffles, and cuts the first calibration_count entries off
/// as the calibration manifest.
std::pair<Manifest, Manifest> split(const Manifest& manifest, const SplitSpec& spec);

/// Loads every entry. Scores fix K; masks are checked against it.
std::vector<Example> load_examples(const Manifest& manifest, bool validate = true,
                                   unsigned threads = 0);

} // namespace crcseg
