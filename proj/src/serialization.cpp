#include "crcseg/serialization.hpp"

#include <cmath>
#include <sstream>

#include "crcseg/error.hpp"
#include "file_util.hpp"

namespace crcseg {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

[[noreturn]] void bad_json(const std::string& what) {
  throw Error(ErrorCode::JsonFormatError, what);
}

template <typename T>
T field(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key))
    bad_json(std::string("missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    bad_json(std::string("field '") + key + "': " + e.what());
  }
}

json parse_file(const std::filesystem::path& path) {
  const auto bytes = detail::read_file(path);
  try {
    return json::parse(bytes.begin(), bytes.end());
  } catch (const json::parse_error& e) {
    bad_json(path.string() + ": " + e.what());
  }
}

ordered_json nan_as_null(double v) {
  if (std::isnan(v))
    return nullptr;
  return v;
}

} // namespace

ordered_json loss_to_json(const LossSpec& loss) {
  ordered_json j;
  j["kind"] = std::string(loss_kind_name(loss.kind));
  if (loss.kind == LossKind::BinaryThreshold)
    j["tau"] = loss.tau;
  if (loss.kind == LossKind::WeightedMiscoverage)
    j["weights"] = loss.weights;
  j["bound_b"] = loss.bound_b;
  return j;
}

LossSpec loss_from_json(const json& j) {
  const auto kind = parse_loss_kind(field<std::string>(j, "kind"));
  if (!kind)
    bad_json("unknown loss kind '" + j.at("kind").get<std::string>() + "'");
  LossSpec loss;
  loss.kind = *kind;
  if (loss.kind == LossKind::BinaryThreshold)
    loss.tau = field<double>(j, "tau");
  if (loss.kind == LossKind::WeightedMiscoverage)
    loss.weights = field<std::vector<double>>(j, "weights");
  loss.bound_b = field<double>(j, "bound_b");
  loss.validate();
  return loss;
}

ordered_json artifact_to_json(const CalibrationArtifact& a) {
  ordered_json j;
  j["lambda_hat"] = a.lambda_hat;
  j["alpha"] = a.alpha;
  j["n"] = a.n;
  j["bound_b"] = a.bound_b;
  j["epsilon"] = a.epsilon;
  j["loss"] = loss_to_json(a.loss);
  j["top1_fallback"] = a.top1_fallback;
  j["seed"] = a.seed;
  ordered_json curve = ordered_json::array();
  for (const auto& s : a.risk_curve)
    curve.push_back({{"lambda", s.lambda}, {"risk", s.risk}});
  j["risk_curve"] = std::move(curve);
  j["created_at"] = a.created_at;
  j["tool_version"] = a.tool_version;
  return j;
}

CalibrationArtifact artifact_from_json(const json& j) {
  CalibrationArtifact a;
  a.lambda_hat = field<double>(j, "lambda_hat");
  a.alpha = field<double>(j, "alpha");
  a.n = field<std::size_t>(j, "n");
  a.bound_b = field<double>(j, "bound_b");
  a.epsilon = field<double>(j, "epsilon");
  try {
    a.loss = loss_from_json(field<json>(j, "loss"));
  } catch (const Error& e) {
    bad_json(std::string("loss: ") + e.what());
  }
  a.top1_fallback = j.value("top1_fallback", true);
  a.seed = j.value("seed", std::uint64_t{0});
  for (const auto& s : field<json>(j, "risk_curve"))
    a.risk_curve.push_back({field<double>(s, "lambda"), field<double>(s, "risk")});
  a.created_at = j.value("created_at", std::string());
  a.tool_version = j.value("tool_version", std::string());
  if (!(a.lambda_hat >= 0.0 && a.lambda_hat <= 1.0))
    bad_json("lambda_hat outside [0,1]");
  return a;
}

CalibrationArtifact read_artifact(const std::filesystem::path& path) {
  return artifact_from_json(parse_file(path));
}

void write_artifact(const std::filesystem::path& path, const CalibrationArtifact& artifact) {
  write_text(path, artifact_to_json(artifact).dump(2) + "\n");
}

ordered_json report_to_json(const EvaluationReport& r, bool per_image) {
  ordered_json j;
  j["empirical_risk"] = r.empirical_risk;
  j["risk_std"] = r.risk_std;
  j["activation_ratio"] = r.activation_ratio;
  j["activation_ratio_std"] = r.activation_ratio_std;
  j["n_test"] = r.n_test;
  j["runs"] = r.runs;
  j["lambda_hat"] = r.lambda_hat;
  j["alpha"] = r.alpha;
  j["loss"] = loss_to_json(r.loss);
  if (per_image) {
    ordered_json rows = ordered_json::array();
    for (const auto& row : r.per_image)
      rows.push_back({{"id", row.id},
                      {"loss", row.loss},
                      {"activation_ratio", nan_as_null(row.activation_ratio)},
                      {"valid_pixels", row.valid_pixels}});
    j["per_image"] = std::move(rows);
  }
  return j;
}

std::string report_to_csv(const EvaluationReport& report) {
  std::ostringstream os;
  os.precision(17);
  os << "id,loss,activation_ratio,valid_pixels\n";
  for (const auto& row : report.per_image) {
    os << row.id << ',' << row.loss << ',';
    if (!std::isnan(row.activation_ratio))
      os << row.activation_ratio;
    os << ',' << row.valid_pixels << '\n';
  }
  return os.str();
}

ordered_json summary_to_json(const TrialSummary& s) {
  ordered_json j;
  j["trials"] = s.trials;
  j["alpha"] = s.alpha;
  j["loss"] = loss_to_json(s.loss);
  j["mean_test_risk"] = s.mean_test_risk;
  j["std_test_risk"] = s.std_test_risk;
  j["standard_error"] = s.standard_error;
  j["mean_activation_ratio"] = s.mean_activation_ratio;
  j["mean_lambda_hat"] = s.mean_lambda_hat;
  j["pass"] = s.pass;
  return j;
}

std::vector<double> read_weights(const std::filesystem::path& path) {
  const json j = parse_file(path);
  const json& arr = j.is_object() ? field<json>(j, "weights") : j;
  if (!arr.is_array())
    bad_json("weights must be a JSON array of numbers");
  std::vector<double> out;
  for (const auto& v : arr) {
    if (!v.is_number())
      bad_json("weights must be a JSON array of numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

void write_text(const std::filesystem::path& path, std::string_view text) {
  detail::write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

} // namespace crcseg
