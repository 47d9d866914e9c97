#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "bohm/measurement.hpp"

namespace bohm {

using json = nlohmann::ordered_json;

struct PresetInfo {
  std::string name;
  std::string module;
  std::string description;
};

/// The nine presets in a fixed order.
const std::vector<PresetInfo>& list_experiments();

/// Every key of a preset with its default value.
json default_config(const std::string& experiment);

/// Parses a JSON config file; throws ConfigParse.
json load_config(const std::filesystem::path& path);

/// Applies "a.b.c=value" to a (user) config. The value is parsed as JSON
/// and falls back to a plain string.
void apply_override(json& config, std::string_view assignment);

/// Fills defaults into a user config. Unknown keys and type mismatches throw
/// ConfigParse naming the dotted key.
json resolve_config(const json& user);

/// Runs every range and consistency check of a resolved config without
/// running it; throws ValidationFailure naming the first offending field.
void validate_config(const json& resolved);

struct CheckResult {
  std::string name;
  double value = 0.0;
  std::string relation;
  double threshold = 0.0;
  bool passed = false;
  std::string oracle;
};

struct RunArtifacts {
  std::filesystem::path directory;
  json summary;
  /// (file name, SHA-256 hex) for every written file except the manifest.
  std::vector<std::pair<std::string, std::string>> manifest;
  std::vector<CheckResult> checks;
  bool passed = false;
};

/// Runs a resolved config and writes config.json, summary.json, the data
/// CSVs and manifest.sha256 into out_dir (created if needed).
RunArtifacts run_experiment(const json& resolved, const std::filesystem::path& out_dir);

/// $BOHMSIM_OUT_ROOT (or ./runs) / <experiment>-seed<seed>.
std::filesystem::path default_output_dir(const json& resolved);

std::string sha256_hex(std::string_view data);

json to_json(const OutcomeStatistics& stats);

}  // namespace bohm
