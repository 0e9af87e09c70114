#include "maploc/fine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>

#include "maploc/geometry.hpp"
#include "maploc/rng.hpp"

namespace maploc {

RegionProposal make_region(const ReferenceMap& m,
                           const std::vector<int>& landmark_ids,
                           RegionProvenance provenance) {
  if (landmark_ids.empty())
    throw PreconditionError("region proposal needs at least one landmark");
  std::vector<int> ids = landmark_ids;
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  RegionProposal region;
  region.scene_id = m.scene_id;
  region.provenance = provenance;
  region.landmarks.reserve(ids.size());
  for (int id : ids) region.landmarks.push_back(m.landmark(id));
  return region;
}

namespace {

struct Pair {
  Vec2 local;  // normalized query units
  Vec2 map;    // meters
};

FineResult localized(const SimilarityTransform2D& t,
                     std::vector<std::pair<int, int>> matches,
                     double residual_norm) {
  FineResult r;
  r.status = FineStatus::Localized;
  r.pose = pose_from_transform(t);
  r.matches = std::move(matches);
  r.residual_norm = residual_norm;
  return r;
}

FineResult failed(const char* reason) {
  FineResult r;
  r.status = FineStatus::Failed;
  r.failure_reason = reason;
  return r;
}

/// Saturating count of full class-consistent assignments.
std::uint64_t count_assignments(const std::map<ClassId, int>& need,
                                const std::map<ClassId, int>& have,
                                std::uint64_t cap) {
  std::uint64_t count = 1;
  for (const auto& [cls, k] : need) {
    auto it = have.find(cls);
    const std::uint64_t n = it == have.end() ? 0 : static_cast<std::uint64_t>(it->second);
    for (std::uint64_t i = 0; i < static_cast<std::uint64_t>(k); ++i) {
      const std::uint64_t factor = n - i;
      if (factor == 0) return 0;
      if (count > cap / factor) return cap + 1;
      count *= factor;
    }
  }
  return count;
}

}  // namespace

FineResult fine_localize(const LocalMap& q, const RegionProposal& region,
                         const FineParams& params) {
  q.validate();
  if (region.landmarks.empty())
    throw PreconditionError("fine_localize: empty region");

  std::vector<LocalObject> slots = q.objects;
  std::sort(slots.begin(), slots.end(),
            [](const LocalObject& a, const LocalObject& b) {
              return a.slot < b.slot;
            });

  std::map<ClassId, std::vector<const ObjectLandmark*>> by_class;
  for (const ObjectLandmark& lm : region.landmarks)
    by_class[lm.class_id].push_back(&lm);
  for (auto& [cls, list] : by_class)
    std::sort(list.begin(), list.end(),
              [](const ObjectLandmark* a, const ObjectLandmark* b) {
                return a->id < b->id;
              });

  // Objects whose class the region represents at all; fewer than 3 such
  // objects make the query unmatchable in this region.
  std::vector<std::size_t> representable;
  std::map<ClassId, int> need;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    need[slots[i].class_id] += 1;
    if (by_class.count(slots[i].class_id)) representable.push_back(i);
  }
  if (representable.size() < 3) return failed("unmatchable");

  std::map<ClassId, int> have;
  for (const auto& [cls, list] : by_class)
    have[cls] = static_cast<int>(list.size());

  // Upper bound on simultaneous class-consistent matches.
  int max_inliers = 0;
  for (const auto& [cls, k] : need) {
    auto it = have.find(cls);
    if (it != have.end()) max_inliers += std::min(k, it->second);
  }
  if (max_inliers < 3) return failed("no consensus");

  // Exact enumeration whenever a full assignment exists and stays cheap;
  // this branch reproduces the exhaustive oracle's answer on the region.
  const std::uint64_t full_count =
      count_assignments(need, have, params.brute_force_budget);
  if (full_count > 0 && full_count <= params.brute_force_budget) {
    ReferenceMap sub;
    sub.scene_id = region.scene_id;
    sub.city = "region";
    sub.landmarks = region.landmarks;
    BruteForceOptions opts;
    opts.max_alignments = std::numeric_limits<std::uint64_t>::max();
    opts.max_hypotheses = 1;
    const BruteForceResult res = brute_force_localize(q, sub, opts);
    if (res.hypotheses.empty()) return failed("no consensus");
    const MatchHypothesis& h = res.best();
    return localized(h.transform, h.assignment, h.residual_norm);
  }

  // RANSAC over minimal 3-correspondence samples, randomness fixed by
  // (seed, query id).
  SeededRng rng(derive_seed(params.seed, q.query_id));
  struct Best {
    int inliers = 0;
    double residual_norm = std::numeric_limits<double>::infinity();
    SimilarityTransform2D transform;
    std::vector<std::pair<int, int>> matches;
  } best;

  std::vector<std::size_t> sample_pool = representable;
  for (std::uint64_t iter = 0; iter < params.ransac_iterations; ++iter) {
    // Three distinct representable slots.
    for (std::size_t j = 0; j < 3; ++j) {
      const std::size_t pick = j + rng.uniform_int(sample_pool.size() - j);
      std::swap(sample_pool[j], sample_pool[pick]);
    }
    // Injective candidate draw per sampled slot.
    std::vector<Vec2> src, dst;
    std::set<int> taken;
    bool ok = true;
    for (std::size_t j = 0; j < 3 && ok; ++j) {
      const LocalObject& obj = slots[sample_pool[j]];
      const auto& cands = by_class.at(obj.class_id);
      const std::size_t pick = rng.uniform_int(cands.size());
      const ObjectLandmark* lm = cands[pick];
      if (!taken.insert(lm->id).second) {
        ok = false;  // duplicate landmark; discard this iteration
        break;
      }
      src.push_back(obj.position);
      dst.push_back(lm->position);
    }
    if (!ok) continue;

    SimilarityTransform2D t;
    try {
      t = procrustes_align(src, dst, /*with_scale=*/true).transform;
    } catch (const DegenerateError&) {
      continue;
    }

    // Greedy inliers: nearest unclaimed same-class landmark per slot, in
    // slot order; distances gauged in normalized query units.
    std::set<int> claimed;
    std::vector<std::pair<int, int>> matches;
    std::vector<Pair> pairs;
    for (const LocalObject& obj : slots) {
      auto it = by_class.find(obj.class_id);
      if (it == by_class.end()) continue;
      const Vec2 projected = t.apply(obj.position);
      const ObjectLandmark* nearest = nullptr;
      double nearest_d = std::numeric_limits<double>::infinity();
      for (const ObjectLandmark* lm : it->second) {
        if (claimed.count(lm->id)) continue;
        const double d = (lm->position - projected).norm();
        if (d < nearest_d) {
          nearest_d = d;
          nearest = lm;
        }
      }
      if (nearest && nearest_d / t.scale <= params.inlier_threshold) {
        claimed.insert(nearest->id);
        matches.emplace_back(obj.slot, nearest->id);
        pairs.push_back({obj.position, nearest->position});
      }
    }
    if (static_cast<int>(pairs.size()) < 3) continue;

    std::vector<Vec2> rs, rd;
    for (const Pair& p : pairs) {
      rs.push_back(p.local);
      rd.push_back(p.map);
    }
    AlignmentResult refit;
    try {
      refit = procrustes_align(rs, rd, /*with_scale=*/true);
    } catch (const DegenerateError&) {
      continue;
    }
    const double rnorm = refit.rms / refit.transform.scale;
    const int inl = static_cast<int>(pairs.size());
    if (inl > best.inliers ||
        (inl == best.inliers && rnorm < best.residual_norm)) {
      best.inliers = inl;
      best.residual_norm = rnorm;
      best.transform = refit.transform;
      best.matches = matches;
    }
  }

  if (best.inliers < 3) return failed("no consensus");
  return localized(best.transform, best.matches, best.residual_norm);
}

double pose_loss(const Pose3DoF& est, const Pose3DoF& gt) {
  return (est.position - gt.position).norm() +
         angular_error(est.heading, gt.heading);
}

FineMetrics fine_metrics(const std::vector<FineResult>& results,
                         const std::vector<Pose3DoF>& gt_poses) {
  if (results.empty())
    throw PreconditionError("fine_metrics: empty result list");
  if (results.size() != gt_poses.size())
    throw PreconditionError("fine_metrics: result/gt length mismatch");

  FineMetrics fm;
  std::vector<double> pos_err, ang_err;
  for (std::size_t i = 0; i < results.size(); ++i) {
    if (results[i].status != FineStatus::Localized) {
      ++fm.failure_count;
      continue;
    }
    ++fm.localized_count;
    pos_err.push_back((results[i].pose.position - gt_poses[i].position).norm());
    ang_err.push_back(angular_error(results[i].pose.heading, gt_poses[i].heading) *
                      180.0 / std::numbers::pi);
  }
  if (fm.localized_count == 0) return fm;  // defined stays false
  fm.defined = true;
  fm.median_position_error_m = lower_median(pos_err);
  fm.median_orientation_error_deg = lower_median(ang_err);
  return fm;
}

const char* to_string(RegionProvenance p) {
  switch (p) {
    case RegionProvenance::CoarseOutput: return "coarse";
    case RegionProvenance::CoarseBB: return "coarsebb";
    case RegionProvenance::NoisyGT: return "noisygt";
    case RegionProvenance::GT: return "gt";
  }
  return "?";
}

const char* to_string(FineStatus s) {
  return s == FineStatus::Localized ? "localized" : "failed";
}

}  // namespace maploc
