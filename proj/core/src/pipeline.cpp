#include "maploc/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <unordered_map>

#include "maploc/rng.hpp"

namespace maploc {

VoteResult vote_labels(const SyntheticScene& scene) {
  VoteResult out;
  out.labels.reserve(scene.points.size());
  out.tie.reserve(scene.points.size());
  for (const ScenePoint& p : scene.points) {
    if (p.observations.empty())
      throw PreconditionError("point " + std::to_string(p.id) +
                              " has no labeled observations");
    std::map<ClassId, int> votes;
    for (const PointObservation& obs : p.observations) votes[obs.label] += 1;
    ClassId best = -1;
    int best_count = -1;
    int top_count_classes = 0;
    for (const auto& [cls, count] : votes) {
      if (count > best_count) {
        best = cls;
        best_count = count;
        top_count_classes = 1;
      } else if (count == best_count) {
        ++top_count_classes;
      }
    }
    out.labels.push_back(best);  // ties resolve to the smallest class id
    out.tie.push_back(top_count_classes > 1);
  }
  return out;
}

namespace {

struct CellKey {
  long x, y, z;
  bool operator==(const CellKey&) const = default;
};

struct CellHash {
  std::size_t operator()(const CellKey& k) const {
    std::uint64_t h = 1469598103934665603ull;
    for (long v : {k.x, k.y, k.z}) {
      h ^= static_cast<std::uint64_t>(v);
      h *= 1099511628211ull;
    }
    return static_cast<std::size_t>(h);
  }
};

CellKey cell_of(const Vec3& p, double eps) {
  return {static_cast<long>(std::floor(p.x() / eps)),
          static_cast<long>(std::floor(p.y() / eps)),
          static_cast<long>(std::floor(p.z() / eps))};
}

Vec3 bbox_center(const std::vector<int>& member_ids,
                 const std::unordered_map<int, Vec3>& positions) {
  Vec3 lo = positions.at(member_ids.front());
  Vec3 hi = lo;
  for (int id : member_ids) {
    const Vec3& p = positions.at(id);
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  return 0.5 * (lo + hi);
}

void canonicalize(std::vector<ObjectCluster>& clusters) {
  for (ObjectCluster& c : clusters)
    std::sort(c.member_ids.begin(), c.member_ids.end());
  std::sort(clusters.begin(), clusters.end(),
            [](const ObjectCluster& a, const ObjectCluster& b) {
              return a.member_ids.front() < b.member_ids.front();
            });
}

}  // namespace

std::vector<ObjectCluster> density_cluster(
    const std::vector<std::pair<int, Vec3>>& points, double eps, int min_pts) {
  if (eps <= 0.0) throw PreconditionError("density_cluster: eps must be > 0");
  if (min_pts < 1) throw PreconditionError("density_cluster: min_pts must be >= 1");
  if (points.empty()) return {};

  // Canonical id order makes the outcome independent of input permutation.
  std::vector<std::pair<int, Vec3>> pts = points;
  std::sort(pts.begin(), pts.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  const std::size_t n = pts.size();

  std::unordered_map<CellKey, std::vector<std::size_t>, CellHash> grid;
  for (std::size_t i = 0; i < n; ++i)
    grid[cell_of(pts[i].second, eps)].push_back(i);

  auto neighbors = [&](std::size_t i) {
    std::vector<std::size_t> out;
    const CellKey c = cell_of(pts[i].second, eps);
    for (long dx = -1; dx <= 1; ++dx)
      for (long dy = -1; dy <= 1; ++dy)
        for (long dz = -1; dz <= 1; ++dz) {
          auto it = grid.find({c.x + dx, c.y + dy, c.z + dz});
          if (it == grid.end()) continue;
          for (std::size_t j : it->second)
            if ((pts[i].second - pts[j].second).norm() <= eps) out.push_back(j);
        }
    std::sort(out.begin(), out.end());
    return out;  // includes i itself
  };

  std::vector<std::vector<std::size_t>> nbrs(n);
  std::vector<bool> core(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    nbrs[i] = neighbors(i);
    core[i] = nbrs[i].size() >= static_cast<std::size_t>(min_pts);
  }

  // Clusters = connected components of core points; grown in id order.
  std::vector<int> cluster_of(n, -1);
  int next_cluster = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!core[i] || cluster_of[i] != -1) continue;
    const int cid = next_cluster++;
    std::vector<std::size_t> frontier{i};
    cluster_of[i] = cid;
    while (!frontier.empty()) {
      const std::size_t cur = frontier.back();
      frontier.pop_back();
      for (std::size_t j : nbrs[cur]) {
        if (!core[j] || cluster_of[j] != -1) continue;
        cluster_of[j] = cid;
        frontier.push_back(j);
      }
    }
  }

  // Border points join the cluster of their nearest core neighbor (ties to
  // the smallest core id), which is permutation-stable.
  for (std::size_t i = 0; i < n; ++i) {
    if (core[i] || cluster_of[i] != -1) continue;
    double best_d = std::numeric_limits<double>::infinity();
    int best_cluster = -1;
    for (std::size_t j : nbrs[i]) {
      if (!core[j]) continue;
      const double d = (pts[i].second - pts[j].second).norm();
      if (d < best_d) {
        best_d = d;
        best_cluster = cluster_of[j];
      }
    }
    cluster_of[i] = best_cluster;  // stays -1 (noise) without a core neighbor
  }

  std::vector<ObjectCluster> clusters(static_cast<std::size_t>(next_cluster));
  std::unordered_map<int, Vec3> positions;
  for (std::size_t i = 0; i < n; ++i) {
    positions[pts[i].first] = pts[i].second;
    if (cluster_of[i] >= 0)
      clusters[static_cast<std::size_t>(cluster_of[i])].member_ids.push_back(
          pts[i].first);
  }
  std::erase_if(clusters,
                [](const ObjectCluster& c) { return c.member_ids.empty(); });
  for (ObjectCluster& c : clusters) c.centroid = bbox_center(c.member_ids, positions);
  canonicalize(clusters);
  return clusters;
}

namespace {

/// point id -> image id -> detection id, from the scene's observations.
using DetectionIndex = std::unordered_map<int, std::map<int, int>>;

DetectionIndex index_detections(const SyntheticScene& scene) {
  DetectionIndex idx;
  for (const ScenePoint& p : scene.points) {
    auto& per_image = idx[p.id];
    for (const PointObservation& obs : p.observations)
      per_image.emplace(obs.image_id, obs.detection_id);
  }
  return idx;
}

/// Images co-observing both clusters, and how many of those share a
/// detection id across the two.
std::pair<int, int> co_observation(const ObjectCluster& a, const ObjectCluster& b,
                                   const DetectionIndex& dets) {
  std::map<int, std::set<int>> dets_a, dets_b;  // image -> det ids
  for (int id : a.member_ids) {
    auto it = dets.find(id);
    if (it == dets.end()) continue;
    for (const auto& [img, det] : it->second) dets_a[img].insert(det);
  }
  for (int id : b.member_ids) {
    auto it = dets.find(id);
    if (it == dets.end()) continue;
    for (const auto& [img, det] : it->second) dets_b[img].insert(det);
  }
  int co = 0, shared = 0;
  for (const auto& [img, da] : dets_a) {
    auto it = dets_b.find(img);
    if (it == dets_b.end()) continue;
    ++co;
    for (int det : da)
      if (it->second.count(det)) {
        ++shared;
        break;
      }
  }
  return {co, shared};
}

bool merge_eligible(const ObjectCluster& a, const ObjectCluster& b,
                    const DetectionIndex& dets, double merge_threshold) {
  const auto [co, shared] = co_observation(a, b, dets);
  return co > 0 && static_cast<double>(shared) >=
                       merge_threshold * static_cast<double>(co);
}

/// Splits one cluster on the smallest image id where its members appear under
/// distinct detection ids. Members unobserved in that image follow the
/// nearest subgroup centroid (ties to the smallest detection id). Fragments
/// that still qualify for merging stay together: the shared-image fraction
/// outvotes a lone conflicting image, and split can never undo merge.
bool split_cluster(const ObjectCluster& cluster, const DetectionIndex& dets,
                   const std::unordered_map<int, Vec3>& positions,
                   double merge_threshold, std::vector<ObjectCluster>& out) {
  std::map<int, std::map<int, std::vector<int>>> by_image;  // img -> det -> members
  for (int id : cluster.member_ids) {
    auto it = dets.find(id);
    if (it == dets.end()) continue;
    for (const auto& [img, det] : it->second) by_image[img][det].push_back(id);
  }
  for (const auto& [img, groups] : by_image) {
    if (groups.size() < 2) continue;
    std::map<int, std::vector<int>> split = groups;  // det id -> members
    std::set<int> observed;
    for (const auto& [det, members] : split)
      observed.insert(members.begin(), members.end());

    std::map<int, Vec3> centroids;
    for (const auto& [det, members] : split) {
      Vec3 c = Vec3::Zero();
      for (int id : members) c += positions.at(id);
      centroids[det] = c / static_cast<double>(members.size());
    }
    for (int id : cluster.member_ids) {
      if (observed.count(id)) continue;
      double best_d = std::numeric_limits<double>::infinity();
      int best_det = -1;
      for (const auto& [det, c] : centroids) {
        const double d = (positions.at(id) - c).norm();
        if (d < best_d) {
          best_d = d;
          best_det = det;
        }
      }
      split[best_det].push_back(id);
    }

    std::vector<ObjectCluster> frags;
    for (auto& [det, members] : split) {
      ObjectCluster c;
      c.class_id = cluster.class_id;
      c.member_ids = std::move(members);
      frags.push_back(std::move(c));
    }
    bool coalesced = true;
    while (coalesced && frags.size() > 1) {
      coalesced = false;
      for (std::size_t i = 0; i < frags.size() && !coalesced; ++i)
        for (std::size_t j = i + 1; j < frags.size() && !coalesced; ++j)
          if (merge_eligible(frags[i], frags[j], dets, merge_threshold)) {
            frags[i].member_ids.insert(frags[i].member_ids.end(),
                                       frags[j].member_ids.begin(),
                                       frags[j].member_ids.end());
            frags.erase(frags.begin() + static_cast<long>(j));
            coalesced = true;
          }
    }
    if (frags.size() < 2) continue;  // the merge rule outvotes this image
    for (ObjectCluster& c : frags) out.push_back(std::move(c));
    return true;
  }
  return false;
}

}  // namespace

std::vector<ObjectCluster> refine_clusters(std::vector<ObjectCluster> clusters,
                                           const SyntheticScene& scene,
                                           double merge_threshold) {
  if (merge_threshold <= 0.0 || merge_threshold > 1.0)
    throw PreconditionError("merge_threshold must lie in (0, 1]");
  const DetectionIndex dets = index_detections(scene);
  std::unordered_map<int, Vec3> positions;
  for (const ScenePoint& p : scene.points) positions[p.id] = p.position;

  canonicalize(clusters);
  const std::size_t guard =
      std::max<std::size_t>(4, clusters.size() * clusters.size());
  for (std::size_t iteration = 0;; ++iteration) {
    if (iteration > guard)
      throw Error("cluster refinement did not reach a fixpoint within " +
                  std::to_string(guard) + " iterations");
    bool changed = false;

    // Split pass.
    std::vector<ObjectCluster> next;
    next.reserve(clusters.size());
    for (const ObjectCluster& c : clusters) {
      if (split_cluster(c, dets, positions, merge_threshold, next))
        changed = true;
      else
        next.push_back(c);
    }
    clusters = std::move(next);
    canonicalize(clusters);

    // Merge pass: first qualifying same-class pair in canonical order.
    bool merged = true;
    while (merged) {
      merged = false;
      for (std::size_t i = 0; i < clusters.size() && !merged; ++i) {
        for (std::size_t j = i + 1; j < clusters.size() && !merged; ++j) {
          if (clusters[i].class_id != clusters[j].class_id) continue;
          if (merge_eligible(clusters[i], clusters[j], dets, merge_threshold)) {
            clusters[i].member_ids.insert(clusters[i].member_ids.end(),
                                          clusters[j].member_ids.begin(),
                                          clusters[j].member_ids.end());
            clusters.erase(clusters.begin() + static_cast<long>(j));
            canonicalize(clusters);
            merged = true;
            changed = true;
          }
        }
      }
    }

    if (!changed) break;
  }

  for (ObjectCluster& c : clusters) c.centroid = bbox_center(c.member_ids, positions);
  return clusters;
}

std::vector<ObjectLandmark> project_objects(
    const std::vector<ObjectCluster>& clusters,
    const SimilarityTransform2D& recon_to_map) {
  std::vector<ObjectCluster> ordered = clusters;
  canonicalize(ordered);
  std::vector<ObjectLandmark> landmarks;
  landmarks.reserve(ordered.size());
  for (std::size_t i = 0; i < ordered.size(); ++i) {
    ObjectLandmark lm;
    lm.id = static_cast<int>(i);
    lm.class_id = ordered[i].class_id;
    lm.position = recon_to_map.apply(
        {ordered[i].centroid.x(), ordered[i].centroid.y()});
    landmarks.push_back(lm);
  }
  return landmarks;
}

PipelineResult run_pipeline(const SyntheticScene& scene,
                            const ClusterParams& params) {
  PipelineResult out;
  out.votes = vote_labels(scene);

  std::map<ClassId, std::vector<std::pair<int, Vec3>>> by_class;
  for (std::size_t i = 0; i < scene.points.size(); ++i)
    by_class[out.votes.labels[i]].push_back(
        {scene.points[i].id, scene.points[i].position});

  std::vector<ObjectCluster> clusters;
  for (const auto& [cls, pts] : by_class) {
    auto part = density_cluster(pts, params.eps, params.min_pts);
    for (ObjectCluster& c : part) c.class_id = cls;
    clusters.insert(clusters.end(), part.begin(), part.end());
  }
  canonicalize(clusters);
  out.clusters_before_refine = static_cast<int>(clusters.size());

  clusters = refine_clusters(std::move(clusters), scene, params.merge_threshold);

  std::vector<Vec2> recon, nominal;
  for (const SceneCamera& cam : scene.cameras) {
    recon.push_back({cam.position.x(), cam.position.y()});
    nominal.push_back(cam.nominal_gps);
  }
  out.recon_to_map = align_scene_to_gps(recon, nominal);

  out.map.scene_id = scene.scene_id;
  out.map.city = "synthetic";
  out.map.landmarks = project_objects(clusters, out.recon_to_map);
  return out;
}

const std::vector<std::pair<std::string, double>>& default_class_mix() {
  static const std::vector<std::pair<std::string, double>> mix{
      {"sign", 0.40},          {"street-light", 0.18}, {"pole", 0.12},
      {"traffic-light", 0.08}, {"waste-basket", 0.06}, {"bench", 0.05},
      {"tree", 0.04},          {"hydrant", 0.03},      {"bollard", 0.02},
      {"mailbox", 0.02}};
  return mix;
}

namespace {

template <typename T>
void read_field(const nlohmann::json& j, const char* key, T& out) {
  auto it = j.find(key);
  if (it == j.end()) return;
  try {
    out = it->get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ParseError(std::string("scene spec: key '") + key +
                     "' has the wrong type");
  }
}

const std::set<std::string>& known_spec_keys() {
  static const std::set<std::string> keys{
      "scene_id",        "city",
      "seed",            "object_count",
      "extent_m",        "min_separation_m",
      "points_per_object", "object_radius_m",
      "camera_count",    "step_m",
      "visibility_radius_m", "max_objects_per_query",
      "depth_samples_per_detection", "point_noise_sigma_m",
      "depth_noise_sigma", "gps_noise_sigma_m",
      "class_mix",       "replicate"};
  return keys;
}

}  // namespace

SceneSpec scene_spec_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ParseError("scene spec: expected an object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known_spec_keys().count(it.key()))
      throw ParseError("scene spec: unknown key '" + it.key() + "'");

  SceneSpec s;
  read_field(j, "scene_id", s.scene_id);
  read_field(j, "city", s.city);
  read_field(j, "seed", s.seed);
  read_field(j, "object_count", s.object_count);
  read_field(j, "extent_m", s.extent_m);
  read_field(j, "min_separation_m", s.min_separation_m);
  read_field(j, "points_per_object", s.points_per_object);
  read_field(j, "object_radius_m", s.object_radius_m);
  read_field(j, "camera_count", s.camera_count);
  read_field(j, "step_m", s.step_m);
  read_field(j, "visibility_radius_m", s.visibility_radius_m);
  read_field(j, "max_objects_per_query", s.max_objects_per_query);
  read_field(j, "depth_samples_per_detection", s.depth_samples_per_detection);
  read_field(j, "point_noise_sigma_m", s.point_noise_sigma_m);
  read_field(j, "depth_noise_sigma", s.depth_noise_sigma);
  read_field(j, "gps_noise_sigma_m", s.gps_noise_sigma_m);
  if (auto it = j.find("class_mix"); it != j.end()) {
    if (!it->is_array()) throw ParseError("scene spec: key 'class_mix' must be an array");
    for (const auto& e : *it) {
      if (!e.is_object() || !e.contains("class") || !e.contains("weight"))
        throw ParseError("scene spec: class_mix entries need 'class' and 'weight'");
      s.class_mix.emplace_back(e["class"].get<std::string>(),
                               e["weight"].get<double>());
    }
  }
  return s;
}

nlohmann::json scene_spec_to_json(const SceneSpec& s) {
  nlohmann::json j;
  j["scene_id"] = s.scene_id;
  j["city"] = s.city;
  j["seed"] = s.seed;
  j["object_count"] = s.object_count;
  j["extent_m"] = s.extent_m;
  j["min_separation_m"] = s.min_separation_m;
  j["points_per_object"] = s.points_per_object;
  j["object_radius_m"] = s.object_radius_m;
  j["camera_count"] = s.camera_count;
  j["step_m"] = s.step_m;
  j["visibility_radius_m"] = s.visibility_radius_m;
  j["max_objects_per_query"] = s.max_objects_per_query;
  j["depth_samples_per_detection"] = s.depth_samples_per_detection;
  j["point_noise_sigma_m"] = s.point_noise_sigma_m;
  j["depth_noise_sigma"] = s.depth_noise_sigma;
  j["gps_noise_sigma_m"] = s.gps_noise_sigma_m;
  if (!s.class_mix.empty()) {
    j["class_mix"] = nlohmann::json::array();
    for (const auto& [name, w] : s.class_mix)
      j["class_mix"].push_back({{"class", name}, {"weight", w}});
  }
  return j;
}

std::vector<SceneSpec> scene_specs_from_json(const nlohmann::json& j) {
  std::vector<nlohmann::json> entries;
  if (j.is_object() && j.contains("scenes")) {
    if (!j["scenes"].is_array())
      throw ParseError("scene spec: key 'scenes' must be an array");
    for (const auto& e : j["scenes"]) entries.push_back(e);
  } else {
    entries.push_back(j);
  }

  std::vector<SceneSpec> specs;
  for (const auto& e : entries) {
    int replicate = 1;
    if (e.is_object() && e.contains("replicate")) {
      if (!e["replicate"].is_number_integer() || e["replicate"].get<int>() < 1)
        throw ParseError("scene spec: key 'replicate' must be a positive integer");
      replicate = e["replicate"].get<int>();
    }
    const SceneSpec base = scene_spec_from_json(e);
    if (replicate == 1) {
      specs.push_back(base);
      continue;
    }
    for (int i = 0; i < replicate; ++i) {
      SceneSpec copy = base;
      copy.scene_id = base.scene_id + "-" + std::to_string(i);
      copy.seed = base.seed + static_cast<std::uint64_t>(i);
      specs.push_back(std::move(copy));
    }
  }
  return specs;
}

namespace {

struct Projection {
  bool visible = false;
  Vec2 pixel{0.0, 0.0};
  double forward = 0.0;
};

Projection project_point(const Vec3& cam_pos, double heading, const Vec3& p,
                         const CameraIntrinsics& k, bool require_in_image) {
  Projection out;
  const double dx = p.x() - cam_pos.x();
  const double dy = p.y() - cam_pos.y();
  const double dz = p.z() - cam_pos.z();
  const double c = std::cos(heading), s = std::sin(heading);
  const double right = s * dx - c * dy;
  const double fwd = c * dx + s * dy;
  if (fwd < 0.5) return out;
  const double u = k.focal * right / fwd + k.principal_point.x();
  const double v = k.focal * (-dz) / fwd + k.principal_point.y();
  if (require_in_image &&
      (u < 0.0 || u > k.image_size.x() || v < 0.0 || v > k.image_size.y()))
    return out;
  out.visible = true;
  out.pixel = {u, v};
  out.forward = fwd;
  return out;
}

}  // namespace

GeneratedScene generate_scene(const SceneSpec& spec) {
  if (spec.object_count < 1)
    throw PreconditionError("scene spec: object_count must be >= 1");
  if (spec.points_per_object < 2 || spec.points_per_object % 2 != 0)
    throw PreconditionError("scene spec: points_per_object must be even and >= 2");
  if (spec.camera_count < 3)
    throw PreconditionError("scene spec: camera_count must be >= 3 for GPS registration");
  if (spec.extent_m <= 0.0 || spec.visibility_radius_m <= 0.0 ||
      spec.step_m <= 0.0 || spec.object_radius_m < 0.0)
    throw PreconditionError("scene spec: extents, radii and steps must be positive");
  if (spec.depth_samples_per_detection < 1)
    throw PreconditionError("scene spec: depth_samples_per_detection must be >= 1");

  const auto& mix = spec.class_mix.empty() ? default_class_mix() : spec.class_mix;
  double mix_total = 0.0;
  for (const auto& [name, w] : mix) {
    if (w < 0.0) throw PreconditionError("scene spec: class weights must be >= 0");
    mix_total += w;
  }
  if (mix_total <= 0.0)
    throw PreconditionError("scene spec: class weights must not all be zero");

  GeneratedScene out;
  SyntheticScene& scene = out.scene;
  scene.scene_id = spec.scene_id;
  // Wide-angle sensor: half-angle atan(900/500) ~ 61 degrees, so a typical
  // walk keeps enough objects in frame to emit queries.
  scene.intrinsics.focal = 500.0;
  scene.intrinsics.principal_point = {900.0, 600.0};
  scene.intrinsics.image_size = {1800.0, 1200.0};
  for (const auto& [name, w] : mix) scene.classes.add(name);

  SeededRng rng(derive_seed(spec.seed, "scene"));

  // Planted objects: class draw, then rejection-sampled centroid placement.
  std::vector<PlantedObject> planted;
  std::vector<double> heights;
  for (int i = 0; i < spec.object_count; ++i) {
    const double r = rng.uniform(0.0, mix_total);
    double acc = 0.0;
    ClassId cls = scene.classes.id_of(mix.back().first);
    for (const auto& [name, w] : mix) {
      acc += w;
      if (r < acc) {
        cls = scene.classes.id_of(name);
        break;
      }
    }
    Vec2 pos;
    bool placed = false;
    for (int attempt = 0; attempt < 10'000 && !placed; ++attempt) {
      pos = {rng.uniform(0.0, spec.extent_m), rng.uniform(0.0, spec.extent_m)};
      placed = true;
      for (const PlantedObject& other : planted)
        if ((other.centroid - pos).norm() < spec.min_separation_m) {
          placed = false;
          break;
        }
    }
    if (!placed)
      throw PreconditionError(
          "scene spec: cannot place objects with the requested separation");
    planted.push_back({i, cls, pos});
    heights.push_back(rng.uniform(0.8, 3.0));
  }
  scene.planted_objects = planted;

  // True 3D points: symmetric offset pairs around each centroid, so the
  // axis-aligned box center recovers the centroid exactly at zero noise.
  std::vector<std::vector<Vec3>> true_points(planted.size());
  for (std::size_t i = 0; i < planted.size(); ++i) {
    const Vec3 c3{planted[i].centroid.x(), planted[i].centroid.y(), heights[i]};
    for (int p = 0; p < spec.points_per_object / 2; ++p) {
      Vec3 offset;
      do {
        offset = {rng.uniform(-spec.object_radius_m, spec.object_radius_m),
                  rng.uniform(-spec.object_radius_m, spec.object_radius_m),
                  rng.uniform(-spec.object_radius_m, spec.object_radius_m)};
      } while (offset.norm() > spec.object_radius_m && spec.object_radius_m > 0.0);
      true_points[i].push_back(c3 + offset);
      true_points[i].push_back(c3 - offset);
    }
  }

  // Camera walk with headings drifting inside the object field.
  struct TrueCamera {
    Vec3 position;
    double heading;
  };
  std::vector<TrueCamera> true_cams;
  {
    Vec2 pos{rng.uniform(0.2 * spec.extent_m, 0.8 * spec.extent_m),
             rng.uniform(0.2 * spec.extent_m, 0.8 * spec.extent_m)};
    double heading = rng.uniform(-std::numbers::pi, std::numbers::pi);
    for (int i = 0; i < spec.camera_count; ++i) {
      true_cams.push_back({{pos.x(), pos.y(), 1.6}, normalize_angle(heading)});
      heading = normalize_angle(heading + rng.normal(0.0, 0.4));
      Vec2 next = pos + spec.step_m * Vec2{std::cos(heading), std::sin(heading)};
      for (int attempt = 0; attempt < 16; ++attempt) {
        if (next.x() >= 0.0 && next.x() <= spec.extent_m && next.y() >= 0.0 &&
            next.y() <= spec.extent_m)
          break;
        heading = rng.uniform(-std::numbers::pi, std::numbers::pi);
        next = pos + spec.step_m * Vec2{std::cos(heading), std::sin(heading)};
      }
      pos = {std::clamp(next.x(), 0.0, spec.extent_m),
             std::clamp(next.y(), 0.0, spec.extent_m)};
    }
  }

  // Random reconstruction gauge: planar rotation, uniform scale, planar
  // translation. Pixels and physical depths are gauge-invariant.
  const double gauge_rot = rng.uniform(-std::numbers::pi, std::numbers::pi);
  const double gauge_scale = rng.uniform(0.7, 1.4);
  const Vec2 gauge_t{rng.uniform(-50.0, 50.0), rng.uniform(-50.0, 50.0)};
  const double gc = std::cos(gauge_rot), gs = std::sin(gauge_rot);
  auto to_recon = [&](const Vec3& p) {
    return Vec3{gauge_scale * (gc * p.x() - gs * p.y()) + gauge_t.x(),
                gauge_scale * (gs * p.x() + gc * p.y()) + gauge_t.y(),
                gauge_scale * p.z()};
  };

  for (int i = 0; i < spec.camera_count; ++i) {
    SceneCamera cam;
    cam.image_id = i;
    cam.position = to_recon(true_cams[static_cast<std::size_t>(i)].position);
    cam.heading =
        normalize_angle(true_cams[static_cast<std::size_t>(i)].heading + gauge_rot);
    // GPS noise draws happen regardless of sigma so the same seed explores
    // different noise levels on the same underlying scene.
    const double nx = rng.normal(0.0, 1.0), ny = rng.normal(0.0, 1.0);
    cam.nominal_gps = {
        true_cams[static_cast<std::size_t>(i)].position.x() +
            spec.gps_noise_sigma_m * nx,
        true_cams[static_cast<std::size_t>(i)].position.y() +
            spec.gps_noise_sigma_m * ny};
    scene.cameras.push_back(cam);
  }

  // Reconstructed points: true geometry + isotropic noise, then the gauge.
  int next_point_id = 0;
  std::vector<std::vector<int>> point_ids(planted.size());
  for (std::size_t i = 0; i < planted.size(); ++i) {
    for (const Vec3& tp : true_points[i]) {
      const Vec3 noise{rng.normal(0.0, 1.0), rng.normal(0.0, 1.0),
                       rng.normal(0.0, 1.0)};
      ScenePoint sp;
      sp.id = next_point_id++;
      sp.position = to_recon(tp + spec.point_noise_sigma_m * noise);
      scene.points.push_back(sp);
      point_ids[i].push_back(sp.id);
    }
  }

  // Detections and queries per camera.
  out.planted_map.scene_id = spec.scene_id;
  out.planted_map.city = spec.city;
  for (const PlantedObject& po : planted)
    out.planted_map.landmarks.push_back({po.id, po.class_id, po.centroid});

  for (int img = 0; img < spec.camera_count; ++img) {
    const TrueCamera& cam = true_cams[static_cast<std::size_t>(img)];
    struct Visible {
      int object;
      double distance;
    };
    std::vector<Visible> visible;
    for (const PlantedObject& po : planted) {
      const double d = (po.centroid - Vec2{cam.position.x(), cam.position.y()}).norm();
      if (d > spec.visibility_radius_m) continue;
      const Vec3 c3{po.centroid.x(), po.centroid.y(),
                    heights[static_cast<std::size_t>(po.id)]};
      const Projection pr = project_point(cam.position, cam.heading, c3,
                                          scene.intrinsics, true);
      if (!pr.visible || pr.forward < 1.0) continue;
      visible.push_back({po.id, d});
    }
    std::sort(visible.begin(), visible.end(), [](const Visible& a, const Visible& b) {
      if (a.distance != b.distance) return a.distance < b.distance;
      return a.object < b.object;
    });
    if (visible.size() > static_cast<std::size_t>(spec.max_objects_per_query))
      visible.resize(static_cast<std::size_t>(spec.max_objects_per_query));

    std::vector<Detection> detections;
    std::vector<Vec2> gt_cam_frame;
    const Pose3DoF cam_pose{{cam.position.x(), cam.position.y()}, cam.heading};
    for (std::size_t det_id = 0; det_id < visible.size(); ++det_id) {
      const int obj = visible[det_id].object;
      const auto& pts = true_points[static_cast<std::size_t>(obj)];
      Detection det;
      det.slot = static_cast<int>(det_id);
      det.class_id = planted[static_cast<std::size_t>(obj)].class_id;
      double u_min = std::numeric_limits<double>::infinity(), v_min = u_min;
      double u_max = -u_min, v_max = -u_min;
      for (std::size_t p = 0; p < pts.size(); ++p) {
        const Projection pr = project_point(cam.position, cam.heading, pts[p],
                                            scene.intrinsics, false);
        if (pr.visible) {
          u_min = std::min(u_min, pr.pixel.x());
          u_max = std::max(u_max, pr.pixel.x());
          v_min = std::min(v_min, pr.pixel.y());
          v_max = std::max(v_max, pr.pixel.y());
          scene.points[static_cast<std::size_t>(
                           point_ids[static_cast<std::size_t>(obj)][p])]
              .observations.push_back({img, pr.pixel, det.slot, det.class_id});
        }
      }
      det.bbox = {u_min, v_min, u_max, v_max};
      const std::size_t samples =
          std::min<std::size_t>(pts.size(),
                                static_cast<std::size_t>(spec.depth_samples_per_detection));
      for (std::size_t p = 0; p < samples; ++p) {
        const double true_depth = (pts[p] - cam.position).norm();
        const double n = rng.normal(0.0, 1.0);
        det.depth_samples.push_back(
            std::max(0.1, true_depth * (1.0 + spec.depth_noise_sigma * n)));
      }
      detections.push_back(std::move(det));
      gt_cam_frame.push_back(cam_pose.map_to_camera(
          planted[static_cast<std::size_t>(obj)].centroid));
    }

    if (detections.size() < 3) continue;

    QueryRecord q;
    q.query_id = spec.scene_id + "/q" + std::to_string(img);
    q.scene_id = spec.scene_id;
    q.gt_pose = cam_pose;

    std::vector<Vec2> gt_norm = gt_cam_frame;
    normalize_by_max_range(gt_norm);
    const LocalMap est = build_local_map(detections, scene.intrinsics);

    for (std::size_t d = 0; d < detections.size(); ++d) {
      QueryObject obj;
      obj.slot = detections[d].slot;
      obj.class_id = detections[d].class_id;
      obj.gt_local = gt_norm[d];
      obj.est_local = est.objects[d].position;
      obj.landmark_id = visible[d].object;
      q.objects.push_back(obj);
    }
    out.queries.push_back(std::move(q));
  }

  // A reconstruction only contains triangulated points: anything no camera
  // ever observed does not exist in it.
  std::erase_if(scene.points,
                [](const ScenePoint& p) { return p.observations.empty(); });

  return out;
}

Dataset to_dataset(const std::vector<GeneratedScene>& scenes) {
  Dataset ds;
  for (const GeneratedScene& g : scenes) {
    std::map<ClassId, ClassId> remap;
    for (const SemanticClass& sc : g.scene.classes.all())
      remap[sc.id] = ds.classes.add(sc.name);

    ReferenceMap m = g.planted_map;
    for (ObjectLandmark& lm : m.landmarks) lm.class_id = remap.at(lm.class_id);
    ds.maps.push_back(std::move(m));

    for (QueryRecord q : g.queries) {
      for (QueryObject& o : q.objects) o.class_id = remap.at(o.class_id);
      ds.queries.push_back(std::move(q));
    }
  }
  ds.validate();
  return ds;
}

}  // namespace maploc
