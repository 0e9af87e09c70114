// Command-line harness: dataset generation, statistics, the brute-force
// solvability oracle, coarse retrieval, fine localization, report diffing.
// Configuration errors exit nonzero; per-query task failures stay in the
// report with exit 0. Reports are byte-identical for a fixed seed and
// thread-count independent (reductions run in query-id order).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "maploc/coarse.hpp"
#include "maploc/dataset.hpp"
#include "maploc/fine.hpp"
#include "maploc/matching.hpp"
#include "maploc/parallel.hpp"
#include "maploc/pipeline.hpp"
#include "maploc/report.hpp"
#include "maploc/rng.hpp"

namespace {

using maploc::Json;

struct GlobalFlags {
  std::uint64_t seed = 0;
  unsigned threads = 0;  // 0 = hardware concurrency
};

std::string fmt(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

/// Relative dataset paths fall back to $MAPLOC_DATA_DIR when they do not
/// resolve from the working directory.
std::filesystem::path resolve_data_path(const std::string& p) {
  std::filesystem::path path(p);
  if (path.is_absolute() || std::filesystem::exists(path)) return path;
  if (const char* dir = std::getenv("MAPLOC_DATA_DIR")) {
    const std::filesystem::path candidate = std::filesystem::path(dir) / path;
    if (std::filesystem::exists(candidate)) return candidate;
  }
  return path;
}

maploc::LocalMapSource parse_source(const std::string& s) {
  if (s == "gt") return maploc::LocalMapSource::GroundTruthBased;
  if (s == "estimated") return maploc::LocalMapSource::DepthBased;
  throw CLI::ValidationError("--query-source", "expected gt or estimated");
}

/// Queries surviving the --split filter, in query-id order. Queries without
/// full GT matches never classify as Easy.
std::vector<const maploc::QueryRecord*> filter_split(const maploc::Dataset& ds,
                                                     const std::string& split) {
  std::vector<const maploc::QueryRecord*> out;
  for (const maploc::QueryRecord& q : ds.queries) {
    if (split == "easy") {
      if (!q.fully_matched()) continue;
      if (maploc::classify_query(q, ds.map_for(q.scene_id)) !=
          maploc::Easiness::Easy)
        continue;
    }
    out.push_back(&q);
  }
  std::sort(out.begin(), out.end(),
            [](const auto* a, const auto* b) { return a->query_id < b->query_id; });
  return out;
}

std::vector<int> gt_landmark_ids(const maploc::QueryRecord& q) {
  std::vector<int> ids;
  for (const maploc::QueryObject& o : q.objects)
    if (o.landmark_id) ids.push_back(*o.landmark_id);
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

void write_report_if_requested(const Json& report, const std::string& out_path) {
  if (out_path.empty()) return;
  maploc::save_report(report, out_path);
  std::cout << "report written to " << out_path << "\n";
}

double median_of(std::vector<double> values) {
  return values.empty() ? 0.0 : maploc::lower_median(std::move(values));
}

// ---------------------------------------------------------------------------
// generate

int run_generate(const GlobalFlags& g, const std::string& spec_path,
                 const std::string& out_path) {
  std::ifstream in(resolve_data_path(spec_path));
  if (!in) {
    std::cerr << "error: cannot open scene spec " << spec_path << "\n";
    return 1;
  }
  std::vector<maploc::SceneSpec> specs =
      maploc::scene_specs_from_json(nlohmann::json::parse(in));
  // The global seed perturbs every per-scene seed, so one spec file can
  // produce independent datasets per --seed while staying deterministic.
  for (maploc::SceneSpec& s : specs)
    s.seed = maploc::derive_seed(g.seed, s.seed);

  std::vector<maploc::GeneratedScene> scenes(specs.size());
  maploc::parallel_for(specs.size(), g.threads, [&](std::size_t i) {
    scenes[i] = maploc::generate_scene(specs[i]);
  });
  const maploc::Dataset ds = maploc::to_dataset(scenes);
  maploc::save_dataset(ds, out_path);

  std::vector<std::vector<std::string>> rows;
  for (const maploc::GeneratedScene& s : scenes)
    rows.push_back({s.scene.scene_id,
                    std::to_string(s.planted_map.landmarks.size()),
                    std::to_string(s.queries.size())});
  std::cout << maploc::render_table({"scene", "landmarks", "queries"}, rows)
            << "dataset written to " << out_path << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// stats

int run_stats(const std::string& dataset_path, const std::string& out_path) {
  const std::filesystem::path path = resolve_data_path(dataset_path);
  const auto t0 = std::chrono::steady_clock::now();
  const maploc::Dataset ds = maploc::load_dataset(path);
  const maploc::MapStatistics stats = maploc::map_statistics(ds);

  std::vector<std::vector<std::string>> table;
  Json rows = Json::array();
  auto emit = [&](const maploc::CityStatistics& c) {
    table.push_back({c.city, std::to_string(c.scene_count), fmt(c.avg_objects, 1),
                     fmt(c.avg_queries, 1), fmt(c.avg_area_km2, 3),
                     c.density_defined ? fmt(c.avg_density_per_km2, 1) : "n/a",
                     std::to_string(c.scenes_without_area)});
    Json r;
    r["city"] = c.city;
    r["scene_count"] = c.scene_count;
    r["avg_objects"] = c.avg_objects;
    r["avg_queries"] = c.avg_queries;
    r["avg_area_km2"] = c.avg_area_km2;
    if (c.density_defined) r["avg_density_per_km2"] = c.avg_density_per_km2;
    r["scenes_without_area"] = c.scenes_without_area;
    rows.push_back(std::move(r));
  };
  for (const maploc::CityStatistics& c : stats.per_city) emit(c);
  emit(stats.overall);
  std::cout << maploc::render_table({"city", "scenes", "avg objects", "avg queries",
                                     "avg area km2", "objects/km2", "no-area"},
                                    table);

  Json aggregates;
  aggregates["scene_count"] = stats.overall.scene_count;
  aggregates["query_count"] = static_cast<int>(ds.queries.size());
  aggregates["avg_objects"] = stats.overall.avg_objects;
  aggregates["avg_queries"] = stats.overall.avg_queries;
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  Json config;
  config["dataset"] = path.string();
  write_report_if_requested(
      maploc::make_report("stats", config, maploc::hash_file(path), rows,
                          aggregates, wall),
      out_path);
  return 0;
}

// ---------------------------------------------------------------------------
// oracle

int run_oracle(const GlobalFlags& g, const std::string& dataset_path,
               const std::string& split, const std::string& source_name,
               std::uint64_t budget, std::size_t max_hypotheses,
               const std::string& out_path) {
  const std::filesystem::path path = resolve_data_path(dataset_path);
  const auto t0 = std::chrono::steady_clock::now();
  const maploc::Dataset ds = maploc::load_dataset(path);
  const maploc::LocalMapSource source = parse_source(source_name);
  const auto queries = filter_split(ds, split);

  maploc::BruteForceOptions opts;
  opts.max_alignments = budget;
  opts.max_hypotheses = max_hypotheses;

  struct Row {
    std::string status;  // complete | budget_exceeded | unmatchable | skipped
    bool matched = false;
    bool ambiguous = false;
    double residual_norm = 0.0;
    double position_error_m = -1.0;
    double heading_error_rad = -1.0;
    std::uint64_t expansions = 0;
  };
  std::vector<Row> results(queries.size());
  maploc::parallel_for(queries.size(), g.threads, [&](std::size_t i) {
    const maploc::QueryRecord& q = *queries[i];
    Row& row = results[i];
    if (!q.has_positions(source)) {
      row.status = "skipped";
      return;
    }
    const maploc::LocalMap lm = maploc::local_map_from_query(q, source);
    try {
      const maploc::BruteForceResult r =
          maploc::brute_force_localize(lm, ds.map_for(q.scene_id), opts);
      row.status =
          r.status == maploc::SearchStatus::Complete ? "complete" : "budget_exceeded";
      row.ambiguous = r.ambiguous;
      row.expansions = r.expansions;
      row.residual_norm = r.best().residual_norm;
      if (lm.gt_matches) {
        auto gt = *lm.gt_matches;
        auto est = r.best().assignment;
        std::sort(gt.begin(), gt.end());
        std::sort(est.begin(), est.end());
        row.matched = gt == est;
      }
      if (q.gt_pose) {
        row.position_error_m = (r.best().pose.position - q.gt_pose->position).norm();
        row.heading_error_rad =
            maploc::angular_error(r.best().pose.heading, q.gt_pose->heading);
      }
    } catch (const maploc::UnmatchableError&) {
      row.status = "unmatchable";
    } catch (const maploc::DegenerateError&) {
      row.status = "degenerate";
    }
  });

  Json rows = Json::array();
  int evaluated = 0, matched = 0, ambiguous = 0, exceeded = 0;
  std::vector<double> pos_errors, heading_errors;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    const Row& r = results[i];
    Json row;
    row["query_id"] = queries[i]->query_id;
    row["status"] = r.status;
    if (r.status == "complete" || r.status == "budget_exceeded") {
      ++evaluated;
      matched += r.matched ? 1 : 0;
      ambiguous += r.ambiguous ? 1 : 0;
      exceeded += r.status == "budget_exceeded" ? 1 : 0;
      row["top1_matches_gt"] = r.matched;
      row["ambiguous"] = r.ambiguous;
      row["residual_norm"] = r.residual_norm;
      row["expansions"] = r.expansions;
      if (r.position_error_m >= 0.0) {
        row["position_error_m"] = r.position_error_m;
        row["heading_error_rad"] = r.heading_error_rad;
        pos_errors.push_back(r.position_error_m);
        heading_errors.push_back(r.heading_error_rad);
      }
    }
    rows.push_back(std::move(row));
  }

  Json aggregates;
  aggregates["queries"] = static_cast<int>(queries.size());
  aggregates["evaluated"] = evaluated;
  aggregates["top1_match_rate"] =
      evaluated > 0 ? static_cast<double>(matched) / evaluated : 0.0;
  aggregates["ambiguous_count"] = ambiguous;
  aggregates["budget_exceeded_count"] = exceeded;
  aggregates["median_position_error_m"] = median_of(pos_errors);
  aggregates["median_heading_error_rad"] = median_of(heading_errors);

  std::cout << maploc::render_table(
      {"metric", "value"},
      {{"queries", std::to_string(queries.size())},
       {"evaluated", std::to_string(evaluated)},
       {"top1 match rate", fmt(aggregates["top1_match_rate"].get<double>())},
       {"ambiguous", std::to_string(ambiguous)},
       {"budget exceeded", std::to_string(exceeded)},
       {"median position error (m)", fmt(median_of(pos_errors), 6)},
       {"median heading error (rad)", fmt(median_of(heading_errors), 6)}});

  Json config;
  config["dataset"] = path.string();
  config["split"] = split;
  config["query_source"] = source_name;
  config["budget"] = budget;
  config["max_hypotheses"] = max_hypotheses;
  config["seed"] = g.seed;
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_report_if_requested(
      maploc::make_report("oracle", config, maploc::hash_file(path), rows,
                          aggregates, wall),
      out_path);
  return 0;
}

// ---------------------------------------------------------------------------
// coarse

maploc::SelectionPolicy parse_policy(const std::string& s) {
  if (s == "nlm") return maploc::SelectionPolicy::TopN_LM;
  if (s == "2nlm") return maploc::SelectionPolicy::Top2N_LM;
  if (s == "r30") return maploc::SelectionPolicy::Radius30;
  if (s == "coarsebb") return maploc::SelectionPolicy::CoarseBB;
  if (s == "noisygt") return maploc::SelectionPolicy::NoisyGT;
  if (s == "gt") return maploc::SelectionPolicy::GT;
  throw CLI::ValidationError("--policy",
                             "expected nlm|2nlm|r30|coarsebb|noisygt|gt");
}

int run_coarse(const GlobalFlags& g, const std::string& dataset_path,
               const std::string& split, const std::string& source_name,
               const std::string& policy_name, double radius_m,
               std::uint64_t sample_budget, const std::string& out_path) {
  const std::filesystem::path path = resolve_data_path(dataset_path);
  const auto t0 = std::chrono::steady_clock::now();
  const maploc::Dataset ds = maploc::load_dataset(path);
  const maploc::LocalMapSource source = parse_source(source_name);
  const maploc::SelectionPolicy policy = parse_policy(policy_name);
  const auto queries = filter_split(ds, split);

  const bool needs_field = policy == maploc::SelectionPolicy::TopN_LM ||
                           policy == maploc::SelectionPolicy::Top2N_LM ||
                           policy == maploc::SelectionPolicy::Radius30;

  struct Row {
    std::string skipped_reason;  // empty = evaluated
    std::vector<int> selected;
    maploc::CoarseMetrics metrics;
    bool has_metrics = false;
  };
  std::vector<Row> results(queries.size());
  maploc::parallel_for(queries.size(), g.threads, [&](std::size_t i) {
    const maploc::QueryRecord& q = *queries[i];
    Row& row = results[i];
    if (!q.has_positions(source)) {
      row.skipped_reason = "no positions for source " + source_name;
      return;
    }
    const maploc::LocalMap lm = maploc::local_map_from_query(q, source);
    const maploc::ReferenceMap& m = ds.map_for(q.scene_id);
    maploc::NodeSelection sel;
    try {
      if (needs_field) {
        maploc::SimilarityParams params;
        params.radius_m = radius_m;
        params.sample_budget = sample_budget;
        params.seed = g.seed;
        params.threads = 1;  // parallelism lives at the query level
        sel = maploc::select_nodes(maploc::similarity_field(lm, m, params), lm, m,
                                   policy);
      } else if (policy == maploc::SelectionPolicy::CoarseBB) {
        sel = maploc::coarse_bb(lm, m);
      } else if (policy == maploc::SelectionPolicy::NoisyGT) {
        sel = maploc::noisy_gt(lm, m);
      } else {
        sel = maploc::gt_selection(lm);
      }
    } catch (const maploc::PreconditionError& e) {
      row.skipped_reason = e.what();
      return;
    }
    row.selected = sel.selected;
    const std::vector<int> gt = gt_landmark_ids(q);
    if (!gt.empty()) {
      row.metrics = maploc::coarse_metrics(sel, gt);
      row.has_metrics = true;
    }
  });

  Json rows = Json::array();
  std::vector<maploc::CoarseMetrics> evaluated;
  int skipped = 0;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    Row& r = results[i];
    Json row;
    row["query_id"] = queries[i]->query_id;
    row["scene_id"] = queries[i]->scene_id;
    row["policy"] = maploc::to_string(policy);
    if (!r.skipped_reason.empty()) {
      row["skipped"] = r.skipped_reason;
      ++skipped;
    } else {
      row["selected"] = r.selected;
      if (r.has_metrics) {
        row["precision"] = r.metrics.precision;
        row["recall"] = r.metrics.recall;
        row["success"] = r.metrics.success;
        evaluated.push_back(r.metrics);
      }
    }
    rows.push_back(std::move(row));
  }
  const maploc::CoarseMetrics agg = maploc::aggregate_metrics(evaluated);

  Json aggregates;
  aggregates["queries"] = static_cast<int>(queries.size());
  aggregates["evaluated"] = static_cast<int>(evaluated.size());
  aggregates["skipped"] = skipped;
  aggregates["precision"] = agg.precision;
  aggregates["recall"] = agg.recall;
  aggregates["success_rate"] = agg.success;

  std::cout << maploc::render_table(
      {"policy", "split", "source", "precision", "recall", "success"},
      {{maploc::to_string(policy), split, source_name, fmt(agg.precision),
        fmt(agg.recall), fmt(agg.success)}});

  Json config;
  config["dataset"] = path.string();
  config["split"] = split;
  config["query_source"] = source_name;
  config["policy"] = policy_name;
  config["radius_m"] = radius_m;
  config["sample_budget"] = sample_budget;
  config["seed"] = g.seed;
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_report_if_requested(
      maploc::make_report("coarse", config, maploc::hash_file(path), rows,
                          aggregates, wall),
      out_path);
  return 0;
}

// ---------------------------------------------------------------------------
// fine

int run_fine(const GlobalFlags& g, const std::string& dataset_path,
             const std::string& regions, const std::string& split,
             const std::string& source_name, double inlier_threshold,
             std::uint64_t iterations, std::uint64_t bf_budget,
             const std::string& out_path) {
  const std::filesystem::path path = resolve_data_path(dataset_path);
  const auto t0 = std::chrono::steady_clock::now();
  const maploc::Dataset ds = maploc::load_dataset(path);
  const maploc::LocalMapSource source = parse_source(source_name);
  const auto queries = filter_split(ds, split);

  // Regions come from a chained coarse report's "selected" rows, or from one
  // of the GT-derived policies computed on the fly.
  std::map<std::string, std::vector<int>> from_report;
  const bool use_report =
      regions != "gt" && regions != "coarsebb" && regions != "noisygt";
  if (use_report) {
    const Json report = maploc::load_report(resolve_data_path(regions));
    if (!report.contains("rows") || report["subcommand"] != "coarse") {
      std::cerr << "error: --regions file is not a coarse report\n";
      return 1;
    }
    if (report.contains("dataset_hash")) {
      std::ostringstream hex;
      hex << std::hex << maploc::hash_file(path);
      if (report["dataset_hash"] != hex.str()) {
        std::cerr << "error: coarse report was produced from a different dataset\n";
        return 2;
      }
    }
    for (const auto& row : report["rows"])
      if (row.contains("selected"))
        from_report[row["query_id"].get<std::string>()] =
            row["selected"].get<std::vector<int>>();
  }

  maploc::FineParams params;
  params.inlier_threshold = inlier_threshold;
  params.ransac_iterations = iterations;
  params.brute_force_budget = bf_budget;
  params.seed = g.seed;

  struct Row {
    std::string skipped_reason;
    maploc::FineResult result;
    double position_error_m = -1.0;
    double heading_error_deg = -1.0;
  };
  std::vector<Row> results(queries.size());
  maploc::parallel_for(queries.size(), g.threads, [&](std::size_t i) {
    const maploc::QueryRecord& q = *queries[i];
    Row& row = results[i];
    if (!q.has_positions(source)) {
      row.skipped_reason = "no positions for source " + source_name;
      return;
    }
    const maploc::LocalMap lm = maploc::local_map_from_query(q, source);
    const maploc::ReferenceMap& m = ds.map_for(q.scene_id);
    maploc::RegionProposal region;
    try {
      if (use_report) {
        auto it = from_report.find(q.query_id);
        if (it == from_report.end()) {
          row.skipped_reason = "query absent from the coarse report";
          return;
        }
        region = maploc::make_region(m, it->second, maploc::RegionProvenance::CoarseOutput);
      } else if (regions == "coarsebb") {
        region = maploc::make_region(m, maploc::coarse_bb(lm, m).selected,
                                     maploc::RegionProvenance::CoarseBB);
      } else if (regions == "noisygt") {
        region = maploc::make_region(m, maploc::noisy_gt(lm, m).selected,
                                     maploc::RegionProvenance::NoisyGT);
      } else {
        region = maploc::make_region(m, maploc::gt_selection(lm).selected,
                                     maploc::RegionProvenance::GT);
      }
    } catch (const maploc::Error& e) {
      row.skipped_reason = e.what();
      return;
    }
    row.result = maploc::fine_localize(lm, region, params);
    if (row.result.status == maploc::FineStatus::Localized && q.gt_pose) {
      row.position_error_m = (row.result.pose.position - q.gt_pose->position).norm();
      row.heading_error_deg =
          maploc::angular_error(row.result.pose.heading, q.gt_pose->heading) *
          180.0 / std::numbers::pi;
    }
  });

  Json rows = Json::array();
  int localized = 0, failed = 0, skipped = 0;
  std::vector<double> pos_errors, heading_errors;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    const Row& r = results[i];
    Json row;
    row["query_id"] = queries[i]->query_id;
    if (!r.skipped_reason.empty()) {
      row["skipped"] = r.skipped_reason;
      ++skipped;
      rows.push_back(std::move(row));
      continue;
    }
    row["status"] = maploc::to_string(r.result.status);
    if (r.result.status == maploc::FineStatus::Localized) {
      ++localized;
      row["position"] = {r.result.pose.position.x(), r.result.pose.position.y()};
      row["heading_rad"] = r.result.pose.heading;
      row["residual_norm"] = r.result.residual_norm;
      row["match_count"] = static_cast<int>(r.result.matches.size());
      if (r.position_error_m >= 0.0) {
        row["position_error_m"] = r.position_error_m;
        row["heading_error_deg"] = r.heading_error_deg;
        pos_errors.push_back(r.position_error_m);
        heading_errors.push_back(r.heading_error_deg);
      }
    } else {
      ++failed;
      row["failure_reason"] = r.result.failure_reason;
    }
    rows.push_back(std::move(row));
  }

  Json aggregates;
  const int evaluated = localized + failed;
  aggregates["queries"] = static_cast<int>(queries.size());
  aggregates["evaluated"] = evaluated;
  aggregates["skipped"] = skipped;
  aggregates["localized_rate"] =
      evaluated > 0 ? static_cast<double>(localized) / evaluated : 0.0;
  aggregates["failure_count"] = failed;
  aggregates["median_position_error_m"] = median_of(pos_errors);
  aggregates["median_orientation_error_deg"] = median_of(heading_errors);

  std::cout << maploc::render_table(
      {"regions", "split", "source", "localized", "failed",
       "median pos err (m)", "median heading err (deg)"},
      {{regions, split, source_name, std::to_string(localized),
        std::to_string(failed), fmt(median_of(pos_errors), 3),
        fmt(median_of(heading_errors), 3)}});

  Json config;
  config["dataset"] = path.string();
  config["regions"] = regions;
  config["split"] = split;
  config["query_source"] = source_name;
  config["inlier_threshold"] = inlier_threshold;
  config["ransac_iterations"] = iterations;
  config["brute_force_budget"] = bf_budget;
  config["seed"] = g.seed;
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_report_if_requested(
      maploc::make_report("fine", config, maploc::hash_file(path), rows,
                          aggregates, wall),
      out_path);
  return 0;
}

// ---------------------------------------------------------------------------
// compare

int run_compare(const std::string& baseline_path, const std::string& candidate_path,
                double tolerance) {
  const maploc::CompareResult r =
      maploc::compare_reports(maploc::load_report(resolve_data_path(baseline_path)),
                              maploc::load_report(resolve_data_path(candidate_path)),
                              tolerance);
  if (r.status == maploc::CompareStatus::Incomparable) {
    std::cerr << "incomparable: " << r.message << "\n";
    return 2;
  }
  std::vector<std::vector<std::string>> table;
  for (const maploc::MetricDelta& d : r.deltas)
    table.push_back({d.name, fmt(d.baseline, 6), fmt(d.candidate, 6),
                     fmt(d.delta, 6), d.regression ? "REGRESSION" : ""});
  std::cout << maploc::render_table(
      {"metric", "baseline", "candidate", "delta", ""}, table);
  std::cout << r.message << "\n";
  return r.status == maploc::CompareStatus::Regression ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Object-based 2D-map visual localization toolkit"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Read options from an INI/TOML file");

  GlobalFlags g;
  app.add_option("--seed", g.seed, "Base RNG seed")->capture_default_str();
  app.add_option("--threads", g.threads,
                 "Worker threads (0 = hardware concurrency)")
      ->capture_default_str();

  // generate
  auto* gen = app.add_subcommand("generate", "Generate a synthetic dataset");
  std::string gen_spec, gen_out = "dataset.json";
  gen->add_option("--spec", gen_spec, "Scene spec JSON file")->required();
  gen->add_option("--out", gen_out, "Output dataset path")->capture_default_str();

  // stats
  auto* stats = app.add_subcommand("stats", "Dataset statistics table");
  std::string stats_dataset, stats_out;
  stats->add_option("--dataset", stats_dataset, "Dataset JSON file")->required();
  stats->add_option("--out", stats_out, "Write a JSON report here");

  // oracle
  auto* oracle = app.add_subcommand(
      "oracle", "Brute-force solvability check over all queries");
  std::string o_dataset, o_split = "all", o_source = "gt", o_out;
  std::uint64_t o_budget = 10'000'000;
  std::size_t o_hypotheses = 16;
  oracle->add_option("--dataset", o_dataset, "Dataset JSON file")->required();
  oracle->add_option("--split", o_split, "easy|all")->capture_default_str();
  oracle->add_option("--query-source", o_source, "gt|estimated")
      ->capture_default_str();
  oracle->add_option("--budget", o_budget, "Node-expansion budget")
      ->capture_default_str();
  oracle->add_option("--max-hypotheses", o_hypotheses, "Ranked hypotheses kept")
      ->capture_default_str();
  oracle->add_option("--out", o_out, "Write a JSON report here");

  // coarse
  auto* coarse = app.add_subcommand("coarse", "Coarse landmark retrieval");
  std::string c_dataset, c_split = "all", c_source = "gt", c_policy = "nlm", c_out;
  double c_radius = 50.0;
  std::uint64_t c_samples = 20'000;
  coarse->add_option("--dataset", c_dataset, "Dataset JSON file")->required();
  coarse->add_option("--split", c_split, "easy|all")->capture_default_str();
  coarse->add_option("--query-source", c_source, "gt|estimated")
      ->capture_default_str();
  coarse->add_option("--policy", c_policy, "nlm|2nlm|r30|coarsebb|noisygt|gt")
      ->capture_default_str();
  coarse->add_option("--radius", c_radius, "Similarity neighborhood radius (m)")
      ->capture_default_str();
  coarse->add_option("--sample-budget", c_samples,
                     "Subset samples per landmark neighborhood")
      ->capture_default_str();
  coarse->add_option("--out", c_out, "Write a JSON report here");

  // fine
  auto* fine = app.add_subcommand("fine", "Fine 3DoF localization");
  std::string f_dataset, f_regions = "gt", f_split = "all", f_source = "gt", f_out;
  double f_inlier = 0.05;
  std::uint64_t f_iters = 2000, f_bf = 200'000;
  fine->add_option("--dataset", f_dataset, "Dataset JSON file")->required();
  fine->add_option("--regions", f_regions,
                   "coarse report path, or gt|coarsebb|noisygt")
      ->capture_default_str();
  fine->add_option("--split", f_split, "easy|all")->capture_default_str();
  fine->add_option("--query-source", f_source, "gt|estimated")
      ->capture_default_str();
  fine->add_option("--inlier-threshold", f_inlier,
                   "Inlier residual bound (normalized units)")
      ->capture_default_str();
  fine->add_option("--iterations", f_iters, "RANSAC iterations")
      ->capture_default_str();
  fine->add_option("--bf-budget", f_bf,
                   "Assignment count below which enumeration replaces RANSAC")
      ->capture_default_str();
  fine->add_option("--out", f_out, "Write a JSON report here");

  // compare
  auto* compare = app.add_subcommand("compare", "Diff two reports' aggregates");
  std::string cmp_base, cmp_cand;
  double cmp_tol = 1e-9;
  compare->add_option("--baseline", cmp_base, "Baseline report")->required();
  compare->add_option("--candidate", cmp_cand, "Candidate report")->required();
  compare->add_option("--tolerance", cmp_tol, "Absolute regression tolerance")
      ->capture_default_str();

  // --seed / --threads read naturally after the subcommand name too
  for (CLI::App* sub : app.get_subcommands({})) sub->fallthrough();

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return run_generate(g, gen_spec, gen_out);
    if (stats->parsed()) return run_stats(stats_dataset, stats_out);
    if (oracle->parsed())
      return run_oracle(g, o_dataset, o_split, o_source, o_budget, o_hypotheses,
                        o_out);
    if (coarse->parsed())
      return run_coarse(g, c_dataset, c_split, c_source, c_policy, c_radius,
                        c_samples, c_out);
    if (fine->parsed())
      return run_fine(g, f_dataset, f_regions, f_split, f_source, f_inlier,
                      f_iters, f_bf, f_out);
    if (compare->parsed()) return run_compare(cmp_base, cmp_cand, cmp_tol);
  } catch (const CLI::Error& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
