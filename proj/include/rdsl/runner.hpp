#pragma once

#include "rdsl/common.hpp"
#include "rdsl/measure.hpp"
#include "rdsl/models.hpp"

#include <json.hpp>

#include <optional>
#include <string>

namespace rdsl {

inline constexpr const char* kArtifactVersion = "0.1.0";
inline constexpr int kReportFormatVersion = 1;

using Json = nlohmann::json;

/// Built experiment inputs shared by the runner and the export command.
struct ExperimentContext {
  Model model;
  DrivingMeasure measure;
  std::string experiment;
  Json parameters;
  std::uint64_t seed = 0;
  Budget budget;
  Json config_echo;
  std::uint64_t config_hash = 0;
};

/// Strict parse: unknown keys are rejected with their JSON path.
ExperimentContext parse_config(const Json& config);

Model parse_model(const Json& j, const std::string& path);
DrivingMeasure parse_measure(const Json& j, const Model& model,
                             const std::string& path);

struct RunOutput {
  Json report;
  std::string csv;       // flat data
  std::string csv_name;  // "series.csv" or "table.csv"
};

/// Execute one experiment. Deterministic: the results payload depends only
/// on the config (and effective seed), never on thread count.
RunOutput run_experiment(const ExperimentContext& ctx,
                         Exec exec = Exec::Parallel);

struct CliOptions {
  std::string out_dir;  // empty: derive a timestamped directory
  std::optional<std::uint64_t> seed_override;
  int threads = 0;
};

/// Load, run, and persist one config. Returns the output directory.
std::string run_config_file(const std::string& config_path,
                            const CliOptions& opts);

struct SuiteRow {
  std::string config;
  std::string assertion;
  double measured = 0.0;
  std::string threshold;
  bool pass = false;
};

struct SuiteResult {
  std::vector<SuiteRow> rows;
  bool all_passed = true;
};

/// Run every config in a manifest and evaluate its assertions against the
/// report payloads.
SuiteResult run_suite(const std::string& manifest_path, const CliOptions& opts);

/// Build the operator named by a config and write it in the binary format.
void export_operator_from_config(const std::string& config_path,
                                 const std::string& out_file);

std::string format_double(double v);  // shortest-faithful, locale-free

}  // namespace rdsl
