#include "crcseg/manifest.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include <json.hpp>

#include "crcseg/error.hpp"
#include "crcseg/npy.hpp"
#include "crcseg/parallel.hpp"
#include "crcseg/rng.hpp"
#include "file_util.hpp"

namespace crcseg {

namespace {

[[noreturn]] void manifest_error(std::size_t line, const std::string& what) {
  throw Error(ErrorCode::ManifestError, "line " + std::to_string(line) + ": " + what);
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  if (path.is_relative() && !base.empty())
    return base / path;
  return path;
}

std::string required_string(const nlohmann::json& obj, const char* key, std::size_t line) {
  if (!obj.contains(key) || !obj[key].is_string())
    manifest_error(line, std::string("missing string field '") + key + "'");
  auto s = obj[key].get<std::string>();
  if (s.empty())
    manifest_error(line, std::string("field '") + key + "' is empty");
  return s;
}

} // namespace

Manifest parse_manifest(std::string_view text, const std::filesystem::path& base_dir) {
  Manifest out;
  std::set<std::string> ids;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto end = std::min(text.find('\n', start), text.size());
    const std::string_view line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) {
      if (end == text.size())
        break;
      continue;
    }
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      manifest_error(line_no, e.what());
    }
    if (!obj.is_object())
      manifest_error(line_no, "entry is not a JSON object");
    ManifestEntry entry;
    entry.id = required_string(obj, "id", line_no);
    entry.scores_path = resolve(base_dir, required_string(obj, "scores_path", line_no));
    entry.mask_path = resolve(base_dir, required_string(obj, "mask_path", line_no));
    if (obj.contains("image_path") && !obj["image_path"].is_null())
      entry.image_path = resolve(base_dir, required_string(obj, "image_path", line_no));
    if (!ids.insert(entry.id).second)
      manifest_error(line_no, "duplicate id '" + entry.id + "'");
    out.push_back(std::move(entry));
    if (end == text.size())
      break;
  }
  return out;
}

Manifest read_manifest(const std::filesystem::path& path) {
  const auto bytes = detail::read_file(path);
  return parse_manifest(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()),
                        path.parent_path());
}

std::string format_manifest(const Manifest& manifest) {
  std::string out;
  for (const auto& e : manifest) {
    nlohmann::ordered_json obj;
    obj["id"] = e.id;
    obj["scores_path"] = e.scores_path.generic_string();
    obj["mask_path"] = e.mask_path.generic_string();
    if (e.image_path)
      obj["image_path"] = e.image_path->generic_string();
    out += obj.dump();
    out += '\n';
  }
  return out;
}

void write_manifest(const std::filesystem::path& path, const Manifest& manifest) {
  const auto text = format_manifest(manifest);
  detail::write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i)
    idx[i] = i;
  Xoshiro256 rng(seed);
  for (std::size_t i = n; i-- > 1;)
    std::swap(idx[i], idx[rng.below(i + 1)]);
  return idx;
}

std::size_t calibration_count(std::size_t n, double cal_fraction) {
  if (!(cal_fraction > 0.0 && cal_fraction < 1.0))
    throw Error(ErrorCode::DegenerateSplit, "cal_fraction must lie in (0,1)");
  const double x = cal_fraction * static_cast<double>(n);
  const double r = std::round(x);
  const double count = std::abs(x - r) < 1e-9 ? r : std::ceil(x);
  if (count < 1.0 || count > static_cast<double>(n) - 1.0)
    throw Error(ErrorCode::DegenerateSplit,
                "splitting " + std::to_string(n) + " entries with fraction " +
                    std::to_string(cal_fraction) + " leaves an empty side");
  return static_cast<std::size_t>(count);
}

std::pair<Manifest, Manifest> split(const Manifest& manifest, const SplitSpec& spec) {
  if (manifest.size() < 2)
    throw Error(ErrorCode::DegenerateSplit, "need at least 2 entries to split");
  const std::size_t n_cal = calibration_count(manifest.size(), spec.cal_fraction);
  Manifest sorted = manifest;
  std::sort(sorted.begin(), sorted.end(),
            [](const ManifestEntry& a, const ManifestEntry& b) { return a.id < b.id; });
  const auto order = shuffled_indices(sorted.size(), spec.seed);
  std::pair<Manifest, Manifest> out;
  for (std::size_t i = 0; i < order.size(); ++i)
    (i < n_cal ? out.first : out.second).push_back(sorted[order[i]]);
  return out;
}

std::vector<Example> load_examples(const Manifest& manifest, bool validate,
                                   unsigned threads) {
  std::vector<Example> out(manifest.size());
  parallel_for(manifest.size(), threads, [&](std::size_t i) {
    const auto& e = manifest[i];
    ScoreTensor scores = read_scores(e.scores_path, validate);
    GroundTruthMask mask = read_mask(e.mask_path, scores.dims().k);
    check_pair(scores, mask);
    out[i] = Example{std::move(scores), std::move(mask)};
  });
  return out;
}

} // namespace crcseg
