#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <unistd.h>

#include "maploc/report.hpp"

using namespace maploc;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("maploc-test-" + std::to_string(::getpid()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

Json sample_report(double recall, double error, const char* hash = "abc123") {
  Json agg;
  agg["recall"] = recall;
  agg["median_position_error_m"] = error;
  Json rows = Json::array();
  rows.push_back({{"query_id", "s/q0"}, {"recall", recall}});
  Json config;
  config["policy"] = "r30";
  Json r = make_report("coarse", config, 0, rows, agg, 1.5);
  r["dataset_hash"] = hash;
  return r;
}

}  // namespace

TEST_CASE("reports carry a fixed key order and echo their inputs") {
  Json config;
  config["threads"] = 4;
  Json rows = Json::array();
  Json agg;
  agg["top1_match_rate"] = 0.75;
  const Json r = make_report("oracle", config, 0xdeadbeefull, rows, agg, 0.25);

  std::vector<std::string> keys;
  for (auto it = r.begin(); it != r.end(); ++it) keys.push_back(it.key());
  CHECK(keys == std::vector<std::string>{"tool_version", "subcommand", "config",
                                         "dataset_hash", "rows", "aggregates",
                                         "wall_clock_sec"});
  CHECK(r["tool_version"] == kToolVersion);
  CHECK(r["subcommand"] == "oracle");
  CHECK(r["config"]["threads"] == 4);
  CHECK(r["dataset_hash"] == "deadbeef");  // lowercase hex
  CHECK(r["aggregates"]["top1_match_rate"] == 0.75);
  CHECK(r["wall_clock_sec"] == 0.25);
}

TEST_CASE("file hashing is stable and content-sensitive") {
  TempDir tmp;
  const fs::path a = tmp.path / "a.bin";
  const fs::path b = tmp.path / "b.bin";
  std::ofstream(a) << "landmarks";
  std::ofstream(b) << "landmarkt";

  CHECK(hash_file(a) == hash_file(a));
  CHECK(hash_file(a) != hash_file(b));

  // FNV-1a of the empty input is the offset basis
  const fs::path empty = tmp.path / "empty.bin";
  std::ofstream(empty).flush();
  CHECK(hash_file(empty) == 14695981039346656037ull);

  CHECK_THROWS_AS(hash_file(tmp.path / "missing.bin"), Error);
}

TEST_CASE("reports round-trip through disk") {
  TempDir tmp;
  const Json r = sample_report(0.9, 1.25);
  const fs::path p = tmp.path / "report.json";
  save_report(r, p);
  const Json back = load_report(p);
  CHECK(back == r);

  std::ofstream(tmp.path / "broken.json") << "{ not json";
  CHECK_THROWS_AS(load_report(tmp.path / "broken.json"), ParseError);
  CHECK_THROWS_AS(load_report(tmp.path / "absent.json"), Error);
}

TEST_CASE("metric directions follow the name") {
  CHECK(metric_direction("recall") == MetricDirection::HigherBetter);
  CHECK(metric_direction("precision") == MetricDirection::HigherBetter);
  CHECK(metric_direction("success_rate") == MetricDirection::HigherBetter);
  CHECK(metric_direction("top1_match_rate") == MetricDirection::HigherBetter);
  CHECK(metric_direction("median_position_error_m") == MetricDirection::LowerBetter);
  CHECK(metric_direction("failure_count") == MetricDirection::LowerBetter);
  CHECK(metric_direction("triplet_loss") == MetricDirection::LowerBetter);
  CHECK(metric_direction("residual_norm") == MetricDirection::LowerBetter);
  CHECK(metric_direction("query_count") == MetricDirection::Neutral);
}

TEST_CASE("identical reports compare as a match with zero deltas") {
  const Json r = sample_report(0.9, 1.25);
  const CompareResult c = compare_reports(r, r);
  CHECK(c.status == CompareStatus::Match);
  REQUIRE(c.deltas.size() == 2);
  for (const auto& d : c.deltas) {
    CHECK(d.delta == 0.0);
    CHECK_FALSE(d.regression);
  }
}

TEST_CASE("a recall drop past tolerance is a regression") {
  const Json base = sample_report(0.90, 1.25);
  const Json cand = sample_report(0.85, 1.25);
  const CompareResult c = compare_reports(base, cand, 0.01);
  CHECK(c.status == CompareStatus::Regression);
  bool saw = false;
  for (const auto& d : c.deltas)
    if (d.name == "recall") {
      saw = true;
      CHECK(d.regression);
      CHECK(d.delta == doctest::Approx(-0.05));
    }
  CHECK(saw);

  // improvement in a lower-is-better metric is never a regression
  const Json better = sample_report(0.90, 0.5);
  CHECK(compare_reports(base, better, 0.01).status == CompareStatus::Match);
  // and a worsening one is
  const Json worse = sample_report(0.90, 2.0);
  CHECK(compare_reports(base, worse, 0.01).status == CompareStatus::Regression);
}

TEST_CASE("tolerance bounds are strict") {
  const Json base = sample_report(0.90, 1.0);
  // drop of exactly the tolerance: not a regression
  CHECK(compare_reports(base, sample_report(0.85, 1.0), 0.05).status ==
        CompareStatus::Match);
  CHECK(compare_reports(base, sample_report(0.8499, 1.0), 0.05).status ==
        CompareStatus::Regression);
}

TEST_CASE("reports from different runs are incomparable") {
  const Json base = sample_report(0.9, 1.0, "aaa");
  const Json other_hash = sample_report(0.9, 1.0, "bbb");
  CHECK(compare_reports(base, other_hash).status == CompareStatus::Incomparable);

  Json other_cmd = sample_report(0.9, 1.0, "aaa");
  other_cmd["subcommand"] = "fine";
  CHECK(compare_reports(base, other_cmd).status == CompareStatus::Incomparable);

  Json missing = sample_report(0.9, 1.0, "aaa");
  missing.erase("aggregates");
  CHECK(compare_reports(base, missing).status == CompareStatus::Incomparable);
}

TEST_CASE("nested aggregates are compared by dotted name") {
  Json base_agg;
  base_agg["fine"]["median_position_error_m"] = 1.0;
  base_agg["fine"]["localized_rate"] = 0.8;
  Json base = make_report("fine", Json::object(), 1, Json::array(), base_agg, 0.0);

  Json cand_agg = base_agg;
  cand_agg["fine"]["median_position_error_m"] = 3.0;
  Json cand = make_report("fine", Json::object(), 1, Json::array(), cand_agg, 0.0);

  const CompareResult c = compare_reports(base, cand, 0.1);
  CHECK(c.status == CompareStatus::Regression);
  bool saw = false;
  for (const auto& d : c.deltas)
    if (d.name == "fine.median_position_error_m") {
      saw = true;
      CHECK(d.regression);
    }
  CHECK(saw);
}

TEST_CASE("metrics missing from the candidate are skipped, not regressions") {
  const Json base = sample_report(0.9, 1.0);
  Json cand = sample_report(0.9, 1.0);
  cand["aggregates"].erase("median_position_error_m");
  const CompareResult c = compare_reports(base, cand);
  CHECK(c.status == CompareStatus::Match);
  CHECK(c.deltas.size() == 1);  // only the shared metric
}

TEST_CASE("wall clock never participates in comparison") {
  const Json base = sample_report(0.9, 1.0);
  Json cand = sample_report(0.9, 1.0);
  cand["wall_clock_sec"] = 9999.0;
  CHECK(compare_reports(base, cand).status == CompareStatus::Match);
}

TEST_CASE("tables align columns to the widest cell") {
  const std::string t = render_table({"id", "value"}, {{"q0", "1"},
                                                       {"longer-id", "2.5"}});
  // header, rule, two rows
  CHECK(t == "id         value\n"
             "---------  -----\n"
             "q0         1    \n"
             "longer-id  2.5  \n");
}
