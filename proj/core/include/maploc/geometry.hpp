#pragma once

#include <string>
#include <vector>

#include "maploc/types.hpp"

namespace maploc {

/// Planar similarity p -> scale * R(rotation) * p + translation.
struct SimilarityTransform2D {
  double rotation = 0.0;  // radians
  double scale = 1.0;     // > 0
  Vec2 translation{0.0, 0.0};

  Eigen::Matrix2d rotation_matrix() const {
    const double c = std::cos(rotation), s = std::sin(rotation);
    Eigen::Matrix2d r;
    r << c, -s, s, c;
    return r;
  }

  Vec2 apply(const Vec2& p) const {
    const double c = std::cos(rotation), s = std::sin(rotation);
    return {scale * (c * p.x() - s * p.y()) + translation.x(),
            scale * (s * p.x() + c * p.y()) + translation.y()};
  }

  SimilarityTransform2D inverse() const;
};

struct AlignmentResult {
  SimilarityTransform2D transform;  // maps source points onto target
  double sse = 0.0;                 // sum of squared residuals at the optimum
  double rms = 0.0;                 // sqrt(sse / n)
};

/// Least-squares similarity (rotation + translation, optionally scale)
/// aligning source onto target, closed form. Correspondence is by index;
/// requires source.size() == target.size() >= 2. Throws DegenerateError when
/// the optimum is not unique (all source points coincident, or the
/// cross-covariance vanishes so the rotation is undetermined).
AlignmentResult procrustes_align(const std::vector<Vec2>& source,
                                 const std::vector<Vec2>& target,
                                 bool with_scale = true);

/// Lower median: element at index (n-1)/2 of the sorted values.
double lower_median(std::vector<double> values);

struct PixelRect {
  double u_min = 0.0, v_min = 0.0;
  double u_max = 0.0, v_max = 0.0;

  Vec2 center() const { return {0.5 * (u_min + u_max), 0.5 * (v_min + v_max)}; }
  double width() const { return u_max - u_min; }
  double height() const { return v_max - v_min; }
};

struct CameraIntrinsics {
  double focal = 1.0;  // pixels, > 0
  Vec2 principal_point{0.0, 0.0};
  Vec2 image_size{0.0, 0.0};  // pixels; (0,0) = unbounded sensor
};

/// One detected object in a query image: bounding box plus the depth samples
/// read inside it (meters, Euclidean distance from the camera center).
struct Detection {
  int slot = -1;
  ClassId class_id = -1;
  PixelRect bbox;
  std::vector<double> depth_samples;
};

/// Places the detection's bbox center at its median sampled depth along the
/// viewing ray, then drops the vertical axis. Returns (lateral, forward) in
/// the camera frame (+y forward, +x right along the image plane). Throws
/// PreconditionError when the median depth is not positive.
Vec2 backproject_detection(const Detection& det, const CameraIntrinsics& k);

/// Camera-centric local map from image detections: each detection is
/// back-projected, then all positions are divided by the largest
/// camera-to-object distance. query_id/scene_id are left empty for the
/// caller. Throws PreconditionError on fewer than 3 detections and
/// DegenerateError when every object sits at the camera.
LocalMap build_local_map(const std::vector<Detection>& dets,
                         const CameraIntrinsics& k);

/// Rescales positions so the farthest point from the origin lands on the
/// unit circle; returns the applied divisor. Throws DegenerateError when the
/// maximum range is zero.
double normalize_by_max_range(std::vector<Vec2>& positions);

/// Similarity (with scale) registering reconstructed camera centers onto
/// nominal GPS positions. Requires >= 3 paired centers.
SimilarityTransform2D align_scene_to_gps(const std::vector<Vec2>& reconstructed,
                                         const std::vector<Vec2>& nominal);

/// Camera pose encoded by the transform taking local-map coordinates
/// (camera at origin, +y forward) into the reference map.
Pose3DoF pose_from_transform(const SimilarityTransform2D& local_to_map);

/// Inverse of pose_from_transform for a given map scale.
SimilarityTransform2D transform_from_pose(const Pose3DoF& pose, double scale);

}  // namespace maploc
