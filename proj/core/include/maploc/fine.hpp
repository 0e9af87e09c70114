#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "maploc/coarse.hpp"
#include "maploc/matching.hpp"
#include "maploc/types.hpp"

namespace maploc {

enum class RegionProvenance { CoarseOutput, CoarseBB, NoisyGT, GT };

/// Restricted portion of a reference map handed to the fine solver.
struct RegionProposal {
  std::string scene_id;
  RegionProvenance provenance = RegionProvenance::GT;
  std::vector<ObjectLandmark> landmarks;  // nonempty subset of the parent map
};

/// Region from the given landmark ids of m. Ids must resolve; the region is
/// ordered by landmark id.
RegionProposal make_region(const ReferenceMap& m,
                           const std::vector<int>& landmark_ids,
                           RegionProvenance provenance);

enum class FineStatus { Localized, Failed };

struct FineResult {
  FineStatus status = FineStatus::Failed;
  Pose3DoF pose;
  std::string failure_reason;  // "unmatchable" | "no consensus", empty on success
  std::vector<std::pair<int, int>> matches;  // (slot, landmark id) inliers
  double residual_norm = 0.0;  // RMS over inliers, normalized query units
};

struct FineParams {
  /// Inlier threshold in normalized query units (map residual / scale).
  double inlier_threshold = 0.05;
  std::uint64_t ransac_iterations = 2000;
  /// Full enumeration is used instead of RANSAC while the class-consistent
  /// assignment count stays within this bound.
  std::uint64_t brute_force_budget = 200'000;
  std::uint64_t seed = 0;
};

/// 3DoF pose of the query camera within the region, by class-consistent
/// correspondence search + similarity alignment. Fewer than 3 query objects
/// whose class the region represents fails with "unmatchable"; exhausted search
/// without a 3-inlier hypothesis fails with "no consensus". The RANSAC
/// branch draws its randomness from (params.seed, query_id) only.
FineResult fine_localize(const LocalMap& q, const RegionProposal& region,
                         const FineParams& params = {});

/// ‖position difference‖ (meters) + wrapped absolute heading difference
/// (radians).
double pose_loss(const Pose3DoF& est, const Pose3DoF& gt);

struct FineMetrics {
  bool defined = false;  // false when every query failed
  double median_orientation_error_deg = 0.0;
  double median_position_error_m = 0.0;
  int localized_count = 0;
  int failure_count = 0;
};

/// Medians over Localized results only; failures tallied separately.
FineMetrics fine_metrics(const std::vector<FineResult>& results,
                         const std::vector<Pose3DoF>& gt_poses);

const char* to_string(RegionProvenance p);
const char* to_string(FineStatus s);

}  // namespace maploc
