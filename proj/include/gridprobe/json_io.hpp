#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "gridprobe/certificate.hpp"
#include "gridprobe/identifiability.hpp"
#include "gridprobe/pattern.hpp"
#include "gridprobe/probing.hpp"
#include "gridprobe/zip.hpp"

namespace gridprobe {

using Json = nlohmann::ordered_json;

Json verdict_to_json(const IdentifiabilityVerdict& verdict);
IdentifiabilityVerdict verdict_from_json(const Json& j);

Json rank_report_to_json(const RankReport& report);
Json assignment_to_json(const BlockAssignment& assignment);

Json plan_to_json(const ProbingPlan& plan);
ProbingPlan plan_from_json(const Json& j);

Json dataset_to_json(const ProbingDataset& dataset);
ProbingDataset dataset_from_json(const Json& j);

/// {"loads": [{"bus", "p", "q"} | {"bus", "zip_p": [a, b, c], "zip_q": [a, b, c]}]}
Json load_model_to_json(const LoadModel& loads);
LoadModel load_model_from_json(const Json& j);

Json recovery_to_json(const RecoveryResult& result);
Json zip_fit_to_json(const ZipFit& fit);
Json diagnostics_to_json(const VandermondeDiagnostics& diag);

/// Reads and parses a JSON file; ParseError on failure.
Json read_json_file(const std::filesystem::path& path);

/// Writes text to a temporary sibling and renames it over the target.
void write_file_atomic(const std::filesystem::path& path, const std::string& text);

}  // namespace gridprobe
