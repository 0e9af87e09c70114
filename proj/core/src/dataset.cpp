#include "maploc/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include "maploc/rng.hpp"

namespace maploc {

namespace {

using nlohmann::json;

const json& require_key(const json& j, const char* key, const std::string& ctx) {
  if (!j.is_object())
    throw ParseError(ctx + ": expected an object");
  auto it = j.find(key);
  if (it == j.end()) throw ParseError(ctx + ": missing key '" + key + "'");
  return *it;
}

double as_number(const json& j, const char* key, const std::string& ctx) {
  const json& v = require_key(j, key, ctx);
  if (!v.is_number()) throw ParseError(ctx + ": key '" + key + "' must be a number");
  return v.get<double>();
}

int as_int(const json& j, const char* key, const std::string& ctx) {
  const json& v = require_key(j, key, ctx);
  if (!v.is_number_integer())
    throw ParseError(ctx + ": key '" + key + "' must be an integer");
  return v.get<int>();
}

std::string as_string(const json& j, const char* key, const std::string& ctx) {
  const json& v = require_key(j, key, ctx);
  if (!v.is_string()) throw ParseError(ctx + ": key '" + key + "' must be a string");
  return v.get<std::string>();
}

Vec2 as_point(const json& v, const char* key, const std::string& ctx) {
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
    throw ParseError(ctx + ": key '" + key + "' must be a [x, y] number pair");
  return {v[0].get<double>(), v[1].get<double>()};
}

}  // namespace

bool QueryRecord::fully_matched() const {
  if (objects.empty()) return false;
  return std::all_of(objects.begin(), objects.end(),
                     [](const QueryObject& o) { return o.landmark_id.has_value(); });
}

bool QueryRecord::has_positions(LocalMapSource source) const {
  std::size_t have = 0;
  for (const QueryObject& o : objects) {
    const auto& p =
        source == LocalMapSource::GroundTruthBased ? o.gt_local : o.est_local;
    if (p) ++have;
  }
  return have >= 3;
}

const ReferenceMap& Dataset::map_for(const std::string& scene_id) const {
  for (const auto& m : maps)
    if (m.scene_id == scene_id) return m;
  throw IntegrityError("no reference map with scene_id '" + scene_id + "'");
}

const QueryRecord& Dataset::query(const std::string& query_id) const {
  for (const auto& q : queries)
    if (q.query_id == query_id) return q;
  throw IntegrityError("no query with query_id '" + query_id + "'");
}

void Dataset::validate() const {
  std::set<std::string> scene_ids;
  for (const auto& m : maps) {
    m.validate();
    if (!scene_ids.insert(m.scene_id).second)
      throw IntegrityError("duplicate scene_id '" + m.scene_id + "'");
  }
  std::set<std::string> query_ids;
  for (const auto& q : queries) {
    if (!query_ids.insert(q.query_id).second)
      throw IntegrityError("duplicate query_id '" + q.query_id + "'");
    if (!scene_ids.count(q.scene_id))
      throw IntegrityError("query '" + q.query_id +
                           "' references unknown scene_id '" + q.scene_id + "'");
    const ReferenceMap& m = map_for(q.scene_id);
    for (const QueryObject& o : q.objects)
      if (o.landmark_id && !m.find(*o.landmark_id))
        throw IntegrityError("query '" + q.query_id + "' slot " +
                             std::to_string(o.slot) +
                             " references unknown landmark " +
                             std::to_string(*o.landmark_id));
  }
}

Dataset dataset_from_json(const json& j) {
  Dataset ds;
  if (!j.is_object()) throw ParseError("dataset: top level must be an object");
  if (auto it = j.find("local_map_convention"); it != j.end()) {
    if (!it->is_string())
      throw ParseError("dataset: key 'local_map_convention' must be a string");
    ds.local_map_convention = it->get<std::string>();
    if (ds.local_map_convention != "max_range")
      throw ParseError("dataset: key 'local_map_convention' has unsupported value '" +
                       ds.local_map_convention + "'");
  }

  const json& maps_j = require_key(j, "reference_maps", "dataset");
  if (!maps_j.is_array())
    throw ParseError("dataset: key 'reference_maps' must be an array");
  for (const json& mj : maps_j) {
    ReferenceMap m;
    m.scene_id = as_string(mj, "scene_id", "reference_maps entry");
    const std::string ctx = "reference map '" + m.scene_id + "'";
    m.city = as_string(mj, "city", ctx);
    if (auto it = mj.find("anchor"); it != mj.end() && !it->is_null()) {
      GeodeticAnchor a;
      a.lat_deg = as_number(*it, "lat_deg", ctx + " anchor");
      a.lon_deg = as_number(*it, "lon_deg", ctx + " anchor");
      a.m_per_deg_lat = as_number(*it, "m_per_deg_lat", ctx + " anchor");
      a.m_per_deg_lon = as_number(*it, "m_per_deg_lon", ctx + " anchor");
      m.anchor = a;
    }
    const json& lms = require_key(mj, "landmarks", ctx);
    if (!lms.is_array()) throw ParseError(ctx + ": key 'landmarks' must be an array");
    for (const json& lj : lms) {
      ObjectLandmark lm;
      lm.id = as_int(lj, "id", ctx + " landmark");
      lm.class_id = ds.classes.add(as_string(lj, "class", ctx + " landmark"));
      lm.position = {as_number(lj, "x_m", ctx + " landmark"),
                     as_number(lj, "y_m", ctx + " landmark")};
      m.landmarks.push_back(lm);
    }
    ds.maps.push_back(std::move(m));
  }

  const json& queries_j = require_key(j, "queries", "dataset");
  if (!queries_j.is_array())
    throw ParseError("dataset: key 'queries' must be an array");
  for (const json& qj : queries_j) {
    QueryRecord q;
    q.query_id = as_string(qj, "query_id", "queries entry");
    const std::string ctx = "query '" + q.query_id + "'";
    q.scene_id = as_string(qj, "scene_id", ctx);
    if (auto it = qj.find("image_token"); it != qj.end() && !it->is_null()) {
      if (!it->is_string())
        throw ParseError(ctx + ": key 'image_token' must be a string");
      q.image_token = it->get<std::string>();
    }
    if (auto it = qj.find("gt_pose"); it != qj.end() && !it->is_null()) {
      Pose3DoF p;
      p.position = {as_number(*it, "x_m", ctx + " gt_pose"),
                    as_number(*it, "y_m", ctx + " gt_pose")};
      p.heading = normalize_angle(as_number(*it, "theta_rad", ctx + " gt_pose"));
      q.gt_pose = p;
    }
    const json& objs = require_key(qj, "objects", ctx);
    if (!objs.is_array()) throw ParseError(ctx + ": key 'objects' must be an array");
    for (const json& oj : objs) {
      QueryObject o;
      o.slot = as_int(oj, "slot", ctx + " object");
      o.class_id = ds.classes.add(as_string(oj, "class", ctx + " object"));
      if (auto it = oj.find("gt_local"); it != oj.end() && !it->is_null())
        o.gt_local = as_point(*it, "gt_local", ctx + " object");
      if (auto it = oj.find("est_local"); it != oj.end() && !it->is_null())
        o.est_local = as_point(*it, "est_local", ctx + " object");
      if (auto it = oj.find("landmark_id"); it != oj.end() && !it->is_null()) {
        if (!it->is_number_integer())
          throw ParseError(ctx + ": key 'landmark_id' must be an integer");
        o.landmark_id = it->get<int>();
      }
      q.objects.push_back(o);
    }
    ds.queries.push_back(std::move(q));
  }

  ds.validate();
  return ds;
}

json dataset_to_json(const Dataset& ds) {
  json j;
  j["local_map_convention"] = ds.local_map_convention;
  j["reference_maps"] = json::array();
  for (const auto& m : ds.maps) {
    json mj;
    mj["scene_id"] = m.scene_id;
    mj["city"] = m.city;
    if (m.anchor)
      mj["anchor"] = {{"lat_deg", m.anchor->lat_deg},
                      {"lon_deg", m.anchor->lon_deg},
                      {"m_per_deg_lat", m.anchor->m_per_deg_lat},
                      {"m_per_deg_lon", m.anchor->m_per_deg_lon}};
    mj["landmarks"] = json::array();
    for (const auto& lm : m.landmarks)
      mj["landmarks"].push_back({{"id", lm.id},
                                 {"class", ds.classes.at(lm.class_id).name},
                                 {"x_m", lm.position.x()},
                                 {"y_m", lm.position.y()}});
    j["reference_maps"].push_back(std::move(mj));
  }
  j["queries"] = json::array();
  for (const auto& q : ds.queries) {
    json qj;
    qj["query_id"] = q.query_id;
    qj["scene_id"] = q.scene_id;
    if (q.image_token) qj["image_token"] = *q.image_token;
    if (q.gt_pose)
      qj["gt_pose"] = {{"x_m", q.gt_pose->position.x()},
                       {"y_m", q.gt_pose->position.y()},
                       {"theta_rad", q.gt_pose->heading}};
    qj["objects"] = json::array();
    for (const auto& o : q.objects) {
      json oj;
      oj["slot"] = o.slot;
      oj["class"] = ds.classes.at(o.class_id).name;
      if (o.gt_local) oj["gt_local"] = {o.gt_local->x(), o.gt_local->y()};
      if (o.est_local) oj["est_local"] = {o.est_local->x(), o.est_local->y()};
      if (o.landmark_id) oj["landmark_id"] = *o.landmark_id;
      qj["objects"].push_back(std::move(oj));
    }
    j["queries"].push_back(std::move(qj));
  }
  return j;
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open dataset file: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ParseError("dataset file " + path.string() + ": " + e.what());
  }
  return dataset_from_json(j);
}

void save_dataset(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write dataset file: " + path.string());
  out << dataset_to_json(ds).dump(2) << '\n';
}

LocalMap local_map_from_query(const QueryRecord& q, LocalMapSource source) {
  LocalMap lm;
  lm.query_id = q.query_id;
  lm.scene_id = q.scene_id;
  lm.source = source;
  lm.gt_pose = q.gt_pose;
  bool all_matched = true;
  std::vector<std::pair<int, int>> matches;
  for (const QueryObject& o : q.objects) {
    const auto& p =
        source == LocalMapSource::GroundTruthBased ? o.gt_local : o.est_local;
    if (!p) continue;
    lm.objects.push_back({o.slot, o.class_id, *p});
    if (o.landmark_id)
      matches.emplace_back(o.slot, *o.landmark_id);
    else
      all_matched = false;
  }
  if (lm.objects.size() < 3)
    throw PreconditionError("query '" + q.query_id + "' has fewer than 3 " +
                            std::string(to_string(source)) + " positions");
  if (all_matched) lm.gt_matches = std::move(matches);
  lm.validate();
  return lm;
}

Easiness classify_query(const QueryRecord& q, const ReferenceMap& m) {
  if (!q.fully_matched())
    throw PreconditionError("query '" + q.query_id +
                            "' lacks full landmark matches");
  if (q.objects.size() < 5) return Easiness::HardOnly;
  std::vector<Vec2> pos;
  pos.reserve(q.objects.size());
  for (const QueryObject& o : q.objects)
    pos.push_back(m.landmark(*o.landmark_id).position);
  double max_sq = 0.0;
  for (std::size_t i = 0; i < pos.size(); ++i)
    for (std::size_t j = i + 1; j < pos.size(); ++j)
      max_sq = std::max(max_sq, (pos[i] - pos[j]).squaredNorm());
  return max_sq < 100.0 * 100.0 ? Easiness::Easy : Easiness::HardOnly;
}

const DatasetSplit& SplitAssignment::at(SplitKind k, Partition p) const {
  for (const auto& s : splits)
    if (s.split == k && s.partition == p) return s;
  throw Error("split assignment is incomplete");
}

namespace {

constexpr std::array<double, 3> kSplitFractions{0.8, 0.1, 0.1};

/// Largest-remainder apportionment of n items over kSplitFractions with a
/// running carry; each partition's cumulative count stays within 1 of its
/// exact proportional target.
std::array<int, 3> apportion(int n, std::array<double, 3>& carry) {
  std::array<double, 3> ideal{};
  std::array<int, 3> counts{};
  int assigned = 0;
  for (int i = 0; i < 3; ++i) {
    ideal[i] = n * kSplitFractions[i] + carry[i];
    counts[i] = std::max(0, static_cast<int>(std::floor(ideal[i])));
    assigned += counts[i];
  }
  // Hand out the remainder by largest fractional part, ties to earlier
  // partitions (Train before Val before Test).
  std::array<int, 3> order{0, 1, 2};
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    const double fa = ideal[a] - counts[a], fb = ideal[b] - counts[b];
    if (fa != fb) return fa > fb;
    return a < b;
  });
  for (int i = 0; assigned < n; ++i) {
    counts[order[static_cast<std::size_t>(i % 3)]] += 1;
    ++assigned;
  }
  for (int i = 0; i < 3; ++i) carry[i] = ideal[i] - counts[i];
  return counts;
}

void assign(const std::vector<std::string>& ids, const std::array<int, 3>& counts,
            std::array<std::vector<std::string>*, 3> sinks) {
  std::size_t pos = 0;
  for (int part = 0; part < 3; ++part)
    for (int i = 0; i < counts[static_cast<std::size_t>(part)]; ++i)
      sinks[static_cast<std::size_t>(part)]->push_back(ids[pos++]);
}

}  // namespace

SplitAssignment make_splits(const Dataset& ds, const SplitOptions& opts) {
  if (ds.queries.empty())
    throw PreconditionError("make_splits: empty query list");

  // Strata ordered by scene id (one pooled stratum when per_scene is off),
  // each holding (easy, hard) query-id lists in query-id order.
  std::map<std::string, std::pair<std::vector<std::string>, std::vector<std::string>>>
      strata;
  for (const QueryRecord& q : ds.queries) {
    const std::string key = opts.per_scene ? q.scene_id : std::string{};
    const bool easy = q.fully_matched() &&
                      classify_query(q, ds.map_for(q.scene_id)) == Easiness::Easy;
    auto& [easy_ids, hard_ids] = strata[key];
    (easy ? easy_ids : hard_ids).push_back(q.query_id);
  }
  for (auto& [key, lists] : strata) {
    std::sort(lists.first.begin(), lists.first.end());
    std::sort(lists.second.begin(), lists.second.end());
  }

  SeededRng rng(derive_seed(opts.seed, "splits"));
  std::array<std::vector<std::string>, 3> easy_parts, all_parts;
  std::array<std::vector<std::string>*, 3> easy_sinks{
      &easy_parts[0], &easy_parts[1], &easy_parts[2]};
  std::array<std::vector<std::string>*, 3> all_sinks{
      &all_parts[0], &all_parts[1], &all_parts[2]};

  // Easy queries first: their assignment is shared by both tracks, so the
  // Easy track is a subset of the All track partition by partition. The hard
  // pass inherits the easy carry, which keeps the All-track totals within 1
  // of target as well.
  std::array<double, 3> carry{0.0, 0.0, 0.0};
  for (auto& [key, lists] : strata) {
    auto& ids = lists.first;
    rng.shuffle(ids);
    const auto counts = apportion(static_cast<int>(ids.size()), carry);
    assign(ids, counts, easy_sinks);
    assign(ids, counts, all_sinks);
  }
  for (auto& [key, lists] : strata) {
    auto& ids = lists.second;
    rng.shuffle(ids);
    const auto counts = apportion(static_cast<int>(ids.size()), carry);
    assign(ids, counts, all_sinks);
  }

  SplitAssignment out;
  const std::array<Partition, 3> parts{Partition::Train, Partition::Val,
                                       Partition::Test};
  for (int i = 0; i < 3; ++i) {
    std::sort(easy_parts[static_cast<std::size_t>(i)].begin(),
              easy_parts[static_cast<std::size_t>(i)].end());
    std::sort(all_parts[static_cast<std::size_t>(i)].begin(),
              all_parts[static_cast<std::size_t>(i)].end());
    out.splits.push_back({SplitKind::Easy, parts[static_cast<std::size_t>(i)],
                          easy_parts[static_cast<std::size_t>(i)]});
  }
  for (int i = 0; i < 3; ++i)
    out.splits.push_back({SplitKind::All, parts[static_cast<std::size_t>(i)],
                          all_parts[static_cast<std::size_t>(i)]});
  return out;
}

namespace {

struct SceneTally {
  std::string city;
  int landmarks = 0;
  int queries = 0;
  double area_km2 = 0.0;
  bool has_area = false;
};

CityStatistics summarize(const std::string& city,
                         const std::vector<const SceneTally*>& scenes) {
  CityStatistics cs;
  cs.city = city;
  cs.scene_count = static_cast<int>(scenes.size());
  if (scenes.empty()) return cs;
  double density_sum = 0.0;
  int density_scenes = 0;
  for (const SceneTally* t : scenes) {
    cs.avg_objects += t->landmarks;
    cs.avg_queries += t->queries;
    cs.avg_area_km2 += t->area_km2;
    if (t->has_area) {
      density_sum += t->landmarks / t->area_km2;
      ++density_scenes;
    } else {
      ++cs.scenes_without_area;
    }
  }
  const double n = static_cast<double>(scenes.size());
  cs.avg_objects /= n;
  cs.avg_queries /= n;
  cs.avg_area_km2 /= n;
  cs.density_defined = density_scenes > 0;
  if (cs.density_defined) cs.avg_density_per_km2 = density_sum / density_scenes;
  return cs;
}

}  // namespace

MapStatistics map_statistics(const Dataset& ds) {
  std::vector<SceneTally> tallies;
  tallies.reserve(ds.maps.size());
  for (const ReferenceMap& m : ds.maps) {
    SceneTally t;
    t.city = m.city;
    t.landmarks = static_cast<int>(m.landmarks.size());
    if (m.landmarks.size() >= 2) {
      Vec2 lo = m.landmarks.front().position, hi = lo;
      for (const auto& lm : m.landmarks) {
        lo = lo.cwiseMin(lm.position);
        hi = hi.cwiseMax(lm.position);
      }
      const Vec2 ext = hi - lo;
      t.area_km2 = ext.x() * ext.y() * 1e-6;
      t.has_area = t.area_km2 > 0.0;
    }
    tallies.push_back(t);
  }
  for (const QueryRecord& q : ds.queries)
    for (std::size_t i = 0; i < ds.maps.size(); ++i)
      if (ds.maps[i].scene_id == q.scene_id)
        tallies[i].queries += 1;

  std::map<std::string, std::vector<const SceneTally*>> by_city;
  std::vector<const SceneTally*> all;
  for (const SceneTally& t : tallies) {
    by_city[t.city].push_back(&t);
    all.push_back(&t);
  }

  MapStatistics out;
  for (const auto& [city, scenes] : by_city)
    out.per_city.push_back(summarize(city, scenes));
  out.overall = summarize("all", all);
  return out;
}

}  // namespace maploc
