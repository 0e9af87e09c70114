#include "maploc/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "maploc/rng.hpp"

namespace maploc {

Json make_report(const std::string& subcommand, const Json& config,
                 std::uint64_t dataset_hash, const Json& rows,
                 const Json& aggregates, double wall_clock_sec) {
  Json r;
  r["tool_version"] = kToolVersion;
  r["subcommand"] = subcommand;
  r["config"] = config;
  std::ostringstream hex;
  hex << std::hex << dataset_hash;
  r["dataset_hash"] = hex.str();
  r["rows"] = rows;
  r["aggregates"] = aggregates;
  r["wall_clock_sec"] = wall_clock_sec;
  return r;
}

std::uint64_t hash_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::uint64_t h = 14695981039346656037ull;
  char buf[1 << 16];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ull;
    }
    if (!in) break;
  }
  return h;
}

Json load_report(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void save_report(const Json& report, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << report.dump(2) << "\n";
}

MetricDirection metric_direction(const std::string& name) {
  static const std::vector<std::string> up{"precision", "recall", "success",
                                           "rate"};
  static const std::vector<std::string> down{"error", "failure", "loss",
                                             "residual"};
  for (const std::string& token : up)
    if (name.find(token) != std::string::npos) return MetricDirection::HigherBetter;
  for (const std::string& token : down)
    if (name.find(token) != std::string::npos) return MetricDirection::LowerBetter;
  return MetricDirection::Neutral;
}

namespace {

void flatten(const Json& j, const std::string& prefix,
             std::vector<std::pair<std::string, double>>& out) {
  if (j.is_object()) {
    for (auto it = j.begin(); it != j.end(); ++it)
      flatten(it.value(), prefix.empty() ? it.key() : prefix + "." + it.key(), out);
  } else if (j.is_number()) {
    out.push_back({prefix, j.get<double>()});
  }
}

}  // namespace

CompareResult compare_reports(const Json& baseline, const Json& candidate,
                              double tolerance) {
  CompareResult out;
  for (const char* key : {"subcommand", "dataset_hash", "aggregates"}) {
    if (!baseline.contains(key) || !candidate.contains(key)) {
      out.status = CompareStatus::Incomparable;
      out.message = std::string("missing key '") + key + "'";
      return out;
    }
  }
  if (baseline["subcommand"] != candidate["subcommand"]) {
    out.status = CompareStatus::Incomparable;
    out.message = "reports come from different subcommands";
    return out;
  }
  if (baseline["dataset_hash"] != candidate["dataset_hash"]) {
    out.status = CompareStatus::Incomparable;
    out.message = "reports were produced from different datasets";
    return out;
  }

  std::vector<std::pair<std::string, double>> base_metrics, cand_metrics;
  flatten(baseline["aggregates"], "", base_metrics);
  flatten(candidate["aggregates"], "", cand_metrics);
  std::sort(base_metrics.begin(), base_metrics.end());
  std::sort(cand_metrics.begin(), cand_metrics.end());

  bool regressed = false;
  for (const auto& [name, base_value] : base_metrics) {
    auto it = std::lower_bound(
        cand_metrics.begin(), cand_metrics.end(), name,
        [](const auto& a, const std::string& b) { return a.first < b; });
    if (it == cand_metrics.end() || it->first != name) continue;
    MetricDelta d;
    d.name = name;
    d.baseline = base_value;
    d.candidate = it->second;
    d.delta = d.candidate - d.baseline;
    // The subtraction rounds, so a drop of exactly the tolerance can land one
    // ulp past it; the strict bound gets that much slack.
    const double bound =
        tolerance + 1e-12 * std::max({1.0, std::abs(d.baseline),
                                      std::abs(d.candidate)});
    switch (metric_direction(name)) {
      case MetricDirection::HigherBetter:
        d.regression = d.delta < -bound;
        break;
      case MetricDirection::LowerBetter:
        d.regression = d.delta > bound;
        break;
      case MetricDirection::Neutral:
        d.regression = false;
        break;
    }
    regressed = regressed || d.regression;
    out.deltas.push_back(std::move(d));
  }

  out.status = regressed ? CompareStatus::Regression : CompareStatus::Match;
  out.message = regressed ? "at least one metric regressed past tolerance"
                          : "no regressions";
  return out;
}

std::string render_table(const std::vector<std::string>& headers,
                         const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> widths(headers.size());
  for (std::size_t c = 0; c < headers.size(); ++c) widths[c] = headers[c].size();
  for (const auto& row : rows)
    for (std::size_t c = 0; c < row.size() && c < widths.size(); ++c)
      widths[c] = std::max(widths[c], row[c].size());

  std::ostringstream os;
  auto emit_row = [&](const std::vector<std::string>& row) {
    for (std::size_t c = 0; c < widths.size(); ++c) {
      const std::string cell = c < row.size() ? row[c] : "";
      os << cell << std::string(widths[c] - cell.size(), ' ');
      os << (c + 1 < widths.size() ? "  " : "");
    }
    os << "\n";
  };
  emit_row(headers);
  std::vector<std::string> rule;
  for (std::size_t w : widths) rule.push_back(std::string(w, '-'));
  emit_row(rule);
  for (const auto& row : rows) emit_row(row);
  return os.str();
}

}  // namespace maploc
