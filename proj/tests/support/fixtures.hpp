// Shared procedural fixtures: planted maps, camera queries derived from them,
// and random similarity transforms. Everything is SeededRng-driven so every
// test is reproducible from its literal seed.
#pragma once

#include <string>
#include <vector>

#include "maploc/dataset.hpp"
#include "maploc/geometry.hpp"
#include "maploc/rng.hpp"
#include "maploc/types.hpp"

namespace testsupport {

using maploc::Vec2;

inline maploc::SimilarityTransform2D random_similarity(maploc::SeededRng& rng,
                                                       bool with_scale = true) {
  maploc::SimilarityTransform2D t;
  t.rotation = rng.uniform(-std::numbers::pi, std::numbers::pi);
  t.scale = with_scale ? rng.uniform(0.5, 2.0) : 1.0;
  t.translation = {rng.uniform(-50.0, 50.0), rng.uniform(-50.0, 50.0)};
  return t;
}

inline std::vector<Vec2> apply_all(const maploc::SimilarityTransform2D& t,
                                   const std::vector<Vec2>& pts) {
  std::vector<Vec2> out;
  out.reserve(pts.size());
  for (const Vec2& p : pts) out.push_back(t.apply(p));
  return out;
}

inline std::vector<Vec2> random_points(maploc::SeededRng& rng, std::size_t n,
                                       double extent = 100.0) {
  std::vector<Vec2> pts;
  for (std::size_t i = 0; i < n; ++i)
    pts.push_back({rng.uniform(0.0, extent), rng.uniform(0.0, extent)});
  return pts;
}

/// Reference map with n landmarks over `classes` semantic classes, ids 0..n-1.
inline maploc::ReferenceMap random_map(maploc::SeededRng& rng, int n, int classes,
                                       double extent = 100.0,
                                       const std::string& scene_id = "scene") {
  maploc::ReferenceMap m;
  m.scene_id = scene_id;
  m.city = "testville";
  for (int i = 0; i < n; ++i)
    m.landmarks.push_back(
        {i, static_cast<maploc::ClassId>(rng.uniform_int(classes)),
         {rng.uniform(0.0, extent), rng.uniform(0.0, extent)}});
  return m;
}

inline maploc::ClassRegistry registry_of(int classes) {
  maploc::ClassRegistry reg;
  for (int i = 0; i < classes; ++i) reg.add("class-" + std::to_string(i));
  return reg;
}

/// GT-based query observing the given landmarks from `pose`: camera-frame
/// positions normalized by max range, slots in the given order.
inline maploc::LocalMap planted_query(const maploc::ReferenceMap& m,
                                      const std::vector<int>& landmark_ids,
                                      const maploc::Pose3DoF& pose,
                                      const std::string& query_id = "q0") {
  maploc::LocalMap q;
  q.query_id = query_id;
  q.scene_id = m.scene_id;
  q.source = maploc::LocalMapSource::GroundTruthBased;
  q.gt_pose = pose;
  std::vector<Vec2> cam;
  for (int id : landmark_ids) cam.push_back(pose.map_to_camera(m.landmark(id).position));
  maploc::normalize_by_max_range(cam);
  std::vector<std::pair<int, int>> matches;
  for (std::size_t i = 0; i < landmark_ids.size(); ++i) {
    q.objects.push_back({static_cast<int>(i), m.landmark(landmark_ids[i]).class_id,
                         cam[i]});
    matches.push_back({static_cast<int>(i), landmark_ids[i]});
  }
  q.gt_matches = matches;
  return q;
}

/// A camera pose whose visible set is exactly `landmark_ids`: placed at the
/// subset centroid, heading toward the first landmark.
inline maploc::Pose3DoF centered_pose(const maploc::ReferenceMap& m,
                                      const std::vector<int>& landmark_ids) {
  Vec2 c = Vec2::Zero();
  for (int id : landmark_ids) c += m.landmark(id).position;
  c /= static_cast<double>(landmark_ids.size());
  const Vec2 d = m.landmark(landmark_ids.front()).position - c;
  return {c, std::atan2(d.y(), d.x())};
}

}  // namespace testsupport
