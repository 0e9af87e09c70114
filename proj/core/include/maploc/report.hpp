#pragma once

#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "maploc/types.hpp"

namespace maploc {

inline constexpr const char* kToolVersion = "0.1.0";

using Json = nlohmann::ordered_json;

/// Report skeleton with stable key order: tool version, subcommand, config
/// echo, dataset hash, per-query rows, aggregates, wall clock.
Json make_report(const std::string& subcommand, const Json& config,
                 std::uint64_t dataset_hash, const Json& rows,
                 const Json& aggregates, double wall_clock_sec);

/// FNV-1a over the file bytes; identifies the dataset a report ran on.
std::uint64_t hash_file(const std::filesystem::path& path);

Json load_report(const std::filesystem::path& path);
void save_report(const Json& report, const std::filesystem::path& path);

enum class MetricDirection { HigherBetter, LowerBetter, Neutral };

/// Direction by metric name: precision/recall/success/rate improve upward,
/// error/failure/loss/residual improve downward, anything else is neutral.
MetricDirection metric_direction(const std::string& name);

enum class CompareStatus { Match, Regression, Incomparable };

struct MetricDelta {
  std::string name;
  double baseline = 0.0;
  double candidate = 0.0;
  double delta = 0.0;  // candidate - baseline
  bool regression = false;
};

struct CompareResult {
  CompareStatus status = CompareStatus::Match;
  std::vector<MetricDelta> deltas;  // aggregate metrics present in both
  std::string message;
};

/// Flat numeric aggregate comparison. Reports from different subcommands or
/// dataset hashes are Incomparable; a metric moving against its direction by
/// more than the tolerance is a Regression.
CompareResult compare_reports(const Json& baseline, const Json& candidate,
                              double tolerance = 1e-9);

/// Plain text table; column widths fit the widest cell.
std::string render_table(const std::vector<std::string>& headers,
                         const std::vector<std::vector<std::string>>& rows);

}  // namespace maploc
