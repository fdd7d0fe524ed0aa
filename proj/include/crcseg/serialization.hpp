#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include <json.hpp>

#include "crcseg/calibration.hpp"
#include "crcseg/losses.hpp"
#include "crcseg/metrics.hpp"
#include "crcseg/synth.hpp"

namespace crcseg {

// JSON documents exchanged by the CLI. Keys mirror the struct field names;
// doubles are written in shortest round-trip form so reading them back is
// exact. Parse failures raise JsonFormatError.

nlohmann::ordered_json loss_to_json(const LossSpec& loss);
LossSpec loss_from_json(const nlohmann::json& j);

nlohmann::ordered_json artifact_to_json(const CalibrationArtifact& artifact);
CalibrationArtifact artifact_from_json(const nlohmann::json& j);
CalibrationArtifact read_artifact(const std::filesystem::path& path);
void write_artifact(const std::filesystem::path& path, const CalibrationArtifact& artifact);

nlohmann::ordered_json report_to_json(const EvaluationReport& report, bool per_image = true);
/// id,loss,activation_ratio,valid_pixels with a header row.
std::string report_to_csv(const EvaluationReport& report);

nlohmann::ordered_json summary_to_json(const TrialSummary& summary);

/// Reads a JSON array of non-negative class weights, or an object
/// {"weights": [...]}.
std::vector<double> read_weights(const std::filesystem::path& path);

void write_text(const std::filesystem::path& path, std::string_view text);

} // namespace crcseg
