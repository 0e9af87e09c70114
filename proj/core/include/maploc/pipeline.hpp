#pragma once

#include <cstdint>
#include <nlohmann/json.hpp>
#include <string>
#include <utility>
#include <vector>

#include "maploc/dataset.hpp"
#include "maploc/geometry.hpp"
#include "maploc/types.hpp"

namespace maploc {

/// One 2D observation of a reconstructed 3D point in one image.
struct PointObservation {
  int image_id = -1;
  Vec2 pixel{0.0, 0.0};
  int detection_id = -1;  // per-image instance index
  ClassId label = -1;     // per-view semantic label
};

struct ScenePoint {
  int id = -1;
  Vec3 position{0.0, 0.0, 0.0};  // reconstruction frame
  std::vector<PointObservation> observations;
};

struct SceneCamera {
  int image_id = -1;
  Vec3 position{0.0, 0.0, 0.0};  // reconstruction frame, upright
  double heading = 0.0;          // about the vertical axis, recon frame
  Vec2 nominal_gps{0.0, 0.0};    // map frame, meters, noisy
};

struct PlantedObject {
  int id = -1;
  ClassId class_id = -1;
  Vec2 centroid{0.0, 0.0};  // map frame, meters
};

/// Labeled reconstruction plus the ground truth it was planted from.
struct SyntheticScene {
  std::string scene_id;
  ClassRegistry classes;
  CameraIntrinsics intrinsics;
  std::vector<ScenePoint> points;
  std::vector<SceneCamera> cameras;
  std::vector<PlantedObject> planted_objects;
};

struct VoteResult {
  std::vector<ClassId> labels;  // aligned with scene.points
  std::vector<bool> tie;        // majority tie, resolved to smallest class id
};

/// Majority class over each point's per-view labels. Every point needs at
/// least one labeled observation.
VoteResult vote_labels(const SyntheticScene& scene);

struct ClusterParams {
  double eps = 1.5;  // meters (reconstruction units)
  int min_pts = 4;
  double merge_threshold = 0.5;  // fraction of co-observing images
};

struct ObjectCluster {
  ClassId class_id = -1;
  std::vector<int> member_ids;  // point ids, ascending
  Vec3 centroid{0.0, 0.0, 0.0};  // axis-aligned bounding-box center
};

/// Density clustering (core points, density reachability) of one class's
/// points; noise points are dropped. Output is independent of input order.
std::vector<ObjectCluster> density_cluster(
    const std::vector<std::pair<int, Vec3>>& points, double eps, int min_pts);

/// Split clusters whose members land on distinct detections inside a single
/// image, then merge same-class cluster pairs whose members share detections
/// in at least merge_threshold of their co-observing images; repeats both
/// passes to a fixpoint. Throws Error if no fixpoint is reached within
/// |clusters|^2 iterations.
std::vector<ObjectCluster> refine_clusters(std::vector<ObjectCluster> clusters,
                                           const SyntheticScene& scene,
                                           double merge_threshold = 0.5);

/// Landmarks from cluster bounding-box centroids mapped through the
/// reconstruction-to-map similarity (vertical axis dropped). Landmark ids
/// are assigned in order of smallest member point id.
std::vector<ObjectLandmark> project_objects(
    const std::vector<ObjectCluster>& clusters,
    const SimilarityTransform2D& recon_to_map);

struct PipelineResult {
  ReferenceMap map;
  SimilarityTransform2D recon_to_map;  // from GPS registration
  VoteResult votes;
  int clusters_before_refine = 0;
};

/// Full map construction: label voting, per-class density clustering,
/// split/merge refinement, GPS registration of camera centers, centroid
/// projection.
PipelineResult run_pipeline(const SyntheticScene& scene,
                            const ClusterParams& params = {});

struct SceneSpec {
  std::string scene_id = "scene-0";
  std::string city = "synthetic";
  std::uint64_t seed = 0;

  int object_count = 40;
  double extent_m = 120.0;          // square side of the object field
  double min_separation_m = 6.0;    // between planted centroids
  int points_per_object = 12;       // even; symmetric around the centroid
  double object_radius_m = 0.5;     // point spread around the centroid

  int camera_count = 60;
  double step_m = 5.0;              // trajectory random-walk step
  double visibility_radius_m = 40.0;
  int max_objects_per_query = 8;
  int depth_samples_per_detection = 5;

  double point_noise_sigma_m = 0.0;  // iid 3D reconstruction noise
  double depth_noise_sigma = 0.0;    // relative (multiplicative) depth noise
  double gps_noise_sigma_m = 0.0;

  /// (class name, relative frequency); empty uses default_class_mix().
  std::vector<std::pair<std::string, double>> class_mix;
};

/// Street-furniture class frequencies echoing the released maps' skew.
const std::vector<std::pair<std::string, double>>& default_class_mix();

SceneSpec scene_spec_from_json(const nlohmann::json& j);
nlohmann::json scene_spec_to_json(const SceneSpec& spec);
/// Accepts a single spec object or {"scenes": [...]}; a "replicate": n field
/// expands one entry into n copies with derived seeds and suffixed ids.
std::vector<SceneSpec> scene_specs_from_json(const nlohmann::json& j);

struct GeneratedScene {
  SyntheticScene scene;
  ReferenceMap planted_map;          // planted objects as landmarks
  std::vector<QueryRecord> queries;  // gt_local + est_local + matches + pose
};

/// Deterministic synthetic scene: planted objects, symmetric point clouds,
/// a camera walk, per-image detections, and one query per camera that sees
/// at least 3 objects. Bit-identical output for a fixed spec.
GeneratedScene generate_scene(const SceneSpec& spec);

/// Assembles generated scenes into one dataset (planted maps as reference).
Dataset to_dataset(const std::vector<GeneratedScene>& scenes);

}  // namespace maploc
