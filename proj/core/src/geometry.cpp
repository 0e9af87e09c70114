#include "maploc/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace maploc {

SimilarityTransform2D SimilarityTransform2D::inverse() const {
  SimilarityTransform2D inv;
  inv.rotation = normalize_angle(-rotation);
  inv.scale = 1.0 / scale;
  const double c = std::cos(rotation), s = std::sin(rotation);
  // R(-r)/s applied to -t
  inv.translation = {-(c * translation.x() + s * translation.y()) / scale,
                     -(-s * translation.x() + c * translation.y()) / scale};
  return inv;
}

AlignmentResult procrustes_align(const std::vector<Vec2>& source,
                                 const std::vector<Vec2>& target,
                                 bool with_scale) {
  const std::size_t n = source.size();
  if (n != target.size())
    throw PreconditionError("procrustes_align: point counts differ");
  if (n < 2) throw PreconditionError("procrustes_align: need at least 2 points");

  Vec2 mu_s = Vec2::Zero(), mu_t = Vec2::Zero();
  for (std::size_t i = 0; i < n; ++i) {
    mu_s += source[i];
    mu_t += target[i];
  }
  mu_s /= static_cast<double>(n);
  mu_t /= static_cast<double>(n);

  // Centered sums: a = Σ p·q, b = Σ p×q, spp = Σ‖p‖², sqq = Σ‖q‖².
  double a = 0.0, b = 0.0, spp = 0.0, sqq = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 p = source[i] - mu_s;
    const Vec2 q = target[i] - mu_t;
    a += p.dot(q);
    b += p.x() * q.y() - p.y() * q.x();
    spp += p.squaredNorm();
    sqq += q.squaredNorm();
  }

  if (spp <= 0.0)
    throw DegenerateError("procrustes_align: all source points coincident");
  const double mag = std::hypot(a, b);
  if (mag == 0.0)
    throw DegenerateError("procrustes_align: rotation undetermined");

  AlignmentResult res;
  res.transform.rotation = std::atan2(b, a);
  res.transform.scale = with_scale ? mag / spp : 1.0;
  const double c = std::cos(res.transform.rotation);
  const double s = std::sin(res.transform.rotation);
  const double sc = res.transform.scale;
  res.transform.translation = {
      mu_t.x() - sc * (c * mu_s.x() - s * mu_s.y()),
      mu_t.y() - sc * (s * mu_s.x() + c * mu_s.y())};

  // Summing the fitted residuals directly avoids the cancellation the
  // analytic form (sqq - mag²/spp) suffers near zero residual.
  double sse = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    sse += (res.transform.apply(source[i]) - target[i]).squaredNorm();
  res.sse = sse;
  res.rms = std::sqrt(sse / static_cast<double>(n));
  return res;
}

double lower_median(std::vector<double> values) {
  if (values.empty()) throw PreconditionError("median of empty list");
  const std::size_t k = (values.size() - 1) / 2;
  std::nth_element(values.begin(), values.begin() + static_cast<long>(k),
                   values.end());
  return values[k];
}

Vec2 backproject_detection(const Detection& det, const CameraIntrinsics& k) {
  if (det.depth_samples.empty())
    throw PreconditionError("detection slot " + std::to_string(det.slot) +
                            " has no depth samples");
  if (k.focal <= 0.0) throw PreconditionError("focal length must be positive");
  const double depth = lower_median(det.depth_samples);
  if (depth <= 0.0)
    throw PreconditionError("median depth not positive for slot " +
                            std::to_string(det.slot));
  const Vec2 c = det.bbox.center();
  // Viewing ray in camera coordinates (x right, y down, z forward).
  const double rx = (c.x() - k.principal_point.x()) / k.focal;
  const double ry = (c.y() - k.principal_point.y()) / k.focal;
  const double norm = std::sqrt(rx * rx + ry * ry + 1.0);
  // Unit ray scaled to the Euclidean depth, then the vertical (image y)
  // axis is dropped: (lateral, forward).
  return {depth * rx / norm, depth * 1.0 / norm};
}

double normalize_by_max_range(std::vector<Vec2>& positions) {
  double max_range = 0.0;
  for (const Vec2& p : positions) max_range = std::max(max_range, p.norm());
  if (max_range <= 0.0)
    throw DegenerateError("all objects at the camera: max range is zero");
  for (Vec2& p : positions) p /= max_range;
  return max_range;
}

LocalMap build_local_map(const std::vector<Detection>& dets,
                         const CameraIntrinsics& k) {
  if (dets.size() < 3)
    throw PreconditionError("local map needs at least 3 detections, got " +
                            std::to_string(dets.size()));
  std::vector<Vec2> positions;
  positions.reserve(dets.size());
  for (const Detection& det : dets)
    positions.push_back(backproject_detection(det, k));
  normalize_by_max_range(positions);

  LocalMap lm;
  lm.source = LocalMapSource::DepthBased;
  lm.objects.reserve(dets.size());
  for (std::size_t i = 0; i < dets.size(); ++i)
    lm.objects.push_back({dets[i].slot, dets[i].class_id, positions[i]});
  return lm;
}

SimilarityTransform2D align_scene_to_gps(const std::vector<Vec2>& reconstructed,
                                         const std::vector<Vec2>& nominal) {
  if (reconstructed.size() < 3)
    throw PreconditionError("GPS registration needs at least 3 cameras");
  return procrustes_align(reconstructed, nominal, /*with_scale=*/true)
      .transform;
}

Pose3DoF pose_from_transform(const SimilarityTransform2D& local_to_map) {
  Pose3DoF pose;
  pose.position = local_to_map.translation;  // camera sits at the local origin
  // Local +y (the viewing direction) maps to angle rotation + pi/2.
  pose.heading = normalize_angle(local_to_map.rotation + std::numbers::pi / 2);
  return pose;
}

SimilarityTransform2D transform_from_pose(const Pose3DoF& pose, double scale) {
  SimilarityTransform2D t;
  t.rotation = normalize_angle(pose.heading - std::numbers::pi / 2);
  t.scale = scale;
  t.translation = pose.position;
  return t;
}

}  // namespace maploc
