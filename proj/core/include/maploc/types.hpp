#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace maploc {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file. The message names the offending key.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Structurally valid input whose cross-references do not resolve.
class IntegrityError : public Error {
 public:
  using Error::Error;
};

class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// Geometric configuration with no well-defined answer (e.g. all points
/// coincident in an alignment problem).
class DegenerateError : public Error {
 public:
  using Error::Error;
};

using ClassId = int;

struct SemanticClass {
  ClassId id = -1;
  std::string name;
};

/// Registry of semantic classes for one dataset. Ids are dense indices in
/// insertion order; the static panoptic subset caps the registry at 42.
class ClassRegistry {
 public:
  static constexpr std::size_t kMaxClasses = 42;

  ClassId add(const std::string& name);
  ClassId id_of(const std::string& name) const;  // throws if unknown
  bool contains(const std::string& name) const;
  const SemanticClass& at(ClassId id) const;
  std::size_t size() const { return classes_.size(); }
  const std::vector<SemanticClass>& all() const { return classes_; }

 private:
  std::vector<SemanticClass> classes_;
  std::map<std::string, ClassId> by_name_;
};

struct ObjectLandmark {
  int id = -1;
  ClassId class_id = -1;
  Vec2 position{0.0, 0.0};  // meters, map-local metric frame
};

struct GeodeticAnchor {
  double lat_deg = 0.0;
  double lon_deg = 0.0;
  double m_per_deg_lat = 0.0;  // > 0
  double m_per_deg_lon = 0.0;  // > 0
};

struct ReferenceMap {
  std::string scene_id;
  std::string city;
  std::optional<GeodeticAnchor> anchor;
  std::vector<ObjectLandmark> landmarks;

  const ObjectLandmark* find(int landmark_id) const;
  const ObjectLandmark& landmark(int landmark_id) const;  // throws IntegrityError
  void validate() const;
};

/// Wraps an angle into (-pi, pi].
inline double normalize_angle(double theta) {
  double r = std::remainder(theta, 2.0 * std::numbers::pi);
  if (r <= -std::numbers::pi) r += 2.0 * std::numbers::pi;
  return r;
}

/// Smallest absolute difference between two angles, in [0, pi].
inline double angular_error(double a, double b) {
  return std::abs(std::remainder(a - b, 2.0 * std::numbers::pi));
}

/// Planar camera pose on the reference map. heading is the direction the
/// camera looks at, measured from the map +x axis, in (-pi, pi].
/// The camera-local frame has +y along the viewing direction and +x to the
/// right along the image plane.
struct Pose3DoF {
  Vec2 position{0.0, 0.0};  // meters
  double heading = 0.0;     // radians in (-pi, pi]

  Vec2 forward() const { return {std::cos(heading), std::sin(heading)}; }

  Vec2 camera_to_map(const Vec2& p) const {
    const double c = std::cos(heading), s = std::sin(heading);
    // rotation taking camera +y to forward(), camera +x to the right of it
    return {s * p.x() + c * p.y() + position.x(),
            -c * p.x() + s * p.y() + position.y()};
  }

  Vec2 map_to_camera(const Vec2& p) const {
    const double c = std::cos(heading), s = std::sin(heading);
    const Vec2 d = p - position;
    return {s * d.x() - c * d.y(), c * d.x() + s * d.y()};
  }
};

enum class LocalMapSource { GroundTruthBased, DepthBased };

struct LocalObject {
  int slot = -1;  // detection slot in the query image
  ClassId class_id = -1;
  Vec2 position{0.0, 0.0};  // normalized camera frame, camera at origin
};

/// Camera-centric arrangement of the objects detected in one image, with
/// positions divided by the largest object distance from the camera.
struct LocalMap {
  std::string query_id;
  std::string scene_id;
  LocalMapSource source = LocalMapSource::GroundTruthBased;
  std::vector<LocalObject> objects;  // >= 3
  std::optional<Pose3DoF> gt_pose;
  /// slot -> landmark id, present for ground-truth annotated queries
  std::optional<std::vector<std::pair<int, int>>> gt_matches;

  void validate() const;
  std::size_t size() const { return objects.size(); }
};

enum class SplitKind { Easy, All };
enum class Partition { Train, Val, Test };

struct DatasetSplit {
  SplitKind split = SplitKind::All;
  Partition partition = Partition::Train;
  std::vector<std::string> query_ids;
};

const char* to_string(SplitKind k);
const char* to_string(Partition p);
const char* to_string(LocalMapSource s);

}  // namespace maploc
