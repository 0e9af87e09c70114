#pragma once

#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "maploc/types.hpp"

namespace maploc {

struct QueryObject {
  int slot = -1;
  ClassId class_id = -1;
  std::optional<Vec2> gt_local;   // normalized camera frame
  std::optional<Vec2> est_local;  // normalized camera frame, depth-based
  std::optional<int> landmark_id;
};

struct QueryRecord {
  std::string query_id;
  std::string scene_id;
  std::optional<std::string> image_token;
  std::optional<Pose3DoF> gt_pose;
  std::vector<QueryObject> objects;

  bool fully_matched() const;
  bool has_positions(LocalMapSource source) const;
};

struct Dataset {
  ClassRegistry classes;
  std::vector<ReferenceMap> maps;
  std::vector<QueryRecord> queries;
  /// How local positions were normalized; the only supported convention
  /// divides by the maximum object distance from the camera.
  std::string local_map_convention = "max_range";

  const ReferenceMap& map_for(const std::string& scene_id) const;
  const QueryRecord& query(const std::string& query_id) const;
  void validate() const;  // cross-reference integrity
};

/// Parses the dataset schema. Throws ParseError naming the offending key on
/// malformed input and IntegrityError on dangling scene references.
Dataset dataset_from_json(const nlohmann::json& j);
nlohmann::json dataset_to_json(const Dataset& ds);

Dataset load_dataset(const std::filesystem::path& path);
void save_dataset(const Dataset& ds, const std::filesystem::path& path);

/// View of one query as a LocalMap with positions from the chosen source.
/// Throws PreconditionError when the source positions are absent or fewer
/// than 3 objects carry them.
LocalMap local_map_from_query(const QueryRecord& q, LocalMapSource source);

enum class Easiness { Easy, HardOnly };

/// Easy iff the query has >= 5 objects and the matched landmarks span less
/// than 100 m pairwise in the map frame. Throws PreconditionError unless
/// every object carries a landmark match.
Easiness classify_query(const QueryRecord& q, const ReferenceMap& m);

struct SplitOptions {
  std::uint64_t seed = 0;
  /// Stratify the 80/10/10 draw by scene (default); false pools all queries.
  bool per_scene = true;
};

struct SplitAssignment {
  // Indexed by [SplitKind][Partition].
  std::vector<DatasetSplit> splits;

  const DatasetSplit& at(SplitKind k, Partition p) const;
};

/// Deterministic 80/10/10 partition of both tracks. Easy-track queries are a
/// subset of the All track partition-by-partition; each partition size stays
/// within 1 of its exact proportional target.
SplitAssignment make_splits(const Dataset& ds, const SplitOptions& opts);

struct CityStatistics {
  std::string city;
  int scene_count = 0;
  double avg_objects = 0.0;
  double avg_queries = 0.0;
  double avg_area_km2 = 0.0;
  /// Mean over scenes with positive bounding-box area.
  double avg_density_per_km2 = 0.0;
  bool density_defined = false;
  int scenes_without_area = 0;
};

struct MapStatistics {
  std::vector<CityStatistics> per_city;  // ordered by city name
  CityStatistics overall;                // city = "all"
};

/// Per-city scene counts, mean landmark/query counts, mean landmark
/// bounding-box area (km²) and mean density (landmarks per km²). Scenes with
/// fewer than 2 landmarks have zero area and are excluded from the density
/// mean; such scenes are counted in scenes_without_area.
MapStatistics map_statistics(const Dataset& ds);

}  // namespace maploc
