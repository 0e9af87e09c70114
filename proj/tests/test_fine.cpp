#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "maploc/fine.hpp"
#include "maploc/geometry.hpp"
#include "maploc/rng.hpp"
#include "support/fixtures.hpp"

using namespace maploc;
using testsupport::centered_pose;
using testsupport::planted_query;
using testsupport::random_map;

namespace {

/// Planted query with Gaussian jitter (meters, camera frame) applied to the
/// object positions before normalization, mimicking detection noise.
LocalMap noisy_planted_query(const ReferenceMap& m, const std::vector<int>& subset,
                             const Pose3DoF& pose, double sigma_m,
                             SeededRng& rng) {
  std::vector<Vec2> cam;
  for (int id : subset) {
    Vec2 p = pose.map_to_camera(m.landmark(id).position);
    p.x() += sigma_m * rng.normal();
    p.y() += sigma_m * rng.normal();
    cam.push_back(p);
  }
  normalize_by_max_range(cam);
  LocalMap q;
  q.query_id = "noisy";
  q.scene_id = m.scene_id;
  q.gt_pose = pose;
  std::vector<std::pair<int, int>> gt;
  for (std::size_t i = 0; i < subset.size(); ++i) {
    q.objects.push_back({static_cast<int>(i), m.landmark(subset[i]).class_id,
                         cam[i]});
    gt.emplace_back(static_cast<int>(i), subset[i]);
  }
  q.gt_matches = gt;
  return q;
}

std::vector<int> region_ids(const RegionProposal& r) {
  std::vector<int> ids;
  for (const auto& lm : r.landmarks) ids.push_back(lm.id);
  return ids;
}

}  // namespace

TEST_CASE("make_region resolves, deduplicates and orders landmark ids") {
  SeededRng rng(71);
  ReferenceMap m = random_map(rng, 8, 3, 50.0);
  const RegionProposal r =
      make_region(m, {5, 1, 5, 3}, RegionProvenance::NoisyGT);
  CHECK(r.scene_id == m.scene_id);
  CHECK(r.provenance == RegionProvenance::NoisyGT);
  CHECK(region_ids(r) == std::vector<int>{1, 3, 5});
  for (const auto& lm : r.landmarks)
    CHECK(lm.class_id == m.landmark(lm.id).class_id);

  CHECK_THROWS_AS(make_region(m, {}, RegionProvenance::GT), PreconditionError);
  CHECK_THROWS_AS(make_region(m, {0, 99}, RegionProvenance::GT), IntegrityError);
}

TEST_CASE("ground-truth region localizes a noiseless query exactly") {
  SeededRng rng(72);
  for (int trial = 0; trial < 20; ++trial) {
    ReferenceMap m = random_map(rng, 14, 4, 70.0);
    const std::vector<int> subset{0, 3, 6, 9, 12};
    const Pose3DoF pose = centered_pose(m, subset);
    const LocalMap q = planted_query(m, subset, pose);

    const RegionProposal region = make_region(m, subset, RegionProvenance::GT);
    const FineResult r = fine_localize(q, region);
    REQUIRE(r.status == FineStatus::Localized);
    CHECK(r.failure_reason.empty());
    CHECK(r.matches == *q.gt_matches);
    CHECK(r.residual_norm < 1e-9);
    CHECK((r.pose.position - pose.position).norm() < 1e-6);
    CHECK(angular_error(r.pose.heading, pose.heading) < 1e-6);
  }
}

TEST_CASE("enumeration over a region equals brute force on the sub-map") {
  SeededRng rng(73);
  for (int trial = 0; trial < 10; ++trial) {
    ReferenceMap m = random_map(rng, 16, 3, 70.0);
    const std::vector<int> subset{0, 4, 8, 12};
    const Pose3DoF pose = centered_pose(m, subset);
    SeededRng noise(400 + static_cast<std::uint64_t>(trial));
    const LocalMap q = noisy_planted_query(m, subset, pose, 0.3, noise);

    // region: gt landmarks plus a handful of distractors
    std::vector<int> ids = subset;
    for (int extra : {1, 5, 9, 13}) ids.push_back(extra);
    const RegionProposal region = make_region(m, ids, RegionProvenance::CoarseOutput);

    ReferenceMap sub;
    sub.scene_id = m.scene_id;
    sub.city = m.city;
    sub.landmarks = region.landmarks;

    const FineResult fine = fine_localize(q, region);
    REQUIRE(fine.status == FineStatus::Localized);
    const BruteForceResult oracle = brute_force_localize(q, sub);
    auto oracle_best = oracle.best();
    CHECK(fine.matches == oracle_best.assignment);
    CHECK(fine.residual_norm ==
          doctest::Approx(oracle_best.residual_norm).epsilon(1e-12));
    CHECK((fine.pose.position - oracle_best.pose.position).norm() < 1e-9);
  }
}

TEST_CASE("growing the region never increases the best residual") {
  SeededRng rng(74);
  for (int trial = 0; trial < 10; ++trial) {
    ReferenceMap m = random_map(rng, 18, 3, 80.0);
    const std::vector<int> subset{0, 3, 6, 9};
    const Pose3DoF pose = centered_pose(m, subset);
    SeededRng noise(500 + static_cast<std::uint64_t>(trial));
    const LocalMap q = noisy_planted_query(m, subset, pose, 0.5, noise);

    const RegionProposal small = make_region(m, subset, RegionProvenance::GT);
    std::vector<int> all_ids;
    for (const auto& lm : m.landmarks) all_ids.push_back(lm.id);
    const RegionProposal big =
        make_region(m, all_ids, RegionProvenance::CoarseOutput);

    const FineResult rs = fine_localize(q, small);
    const FineResult rb = fine_localize(q, big);
    REQUIRE(rs.status == FineStatus::Localized);
    REQUIRE(rb.status == FineStatus::Localized);
    CHECK(rb.residual_norm <= rs.residual_norm + 1e-12);
  }
}

TEST_CASE("localization is equivariant under rigid motion of the region") {
  SeededRng rng(75);
  ReferenceMap m = random_map(rng, 12, 3, 60.0);
  const std::vector<int> subset{0, 2, 4, 6, 8};
  const Pose3DoF pose = centered_pose(m, subset);
  const LocalMap q = planted_query(m, subset, pose);
  const RegionProposal region = make_region(m, subset, RegionProvenance::GT);
  const FineResult base = fine_localize(q, region);
  REQUIRE(base.status == FineStatus::Localized);

  for (int trial = 0; trial < 8; ++trial) {
    const auto motion = testsupport::random_similarity(rng, /*with_scale=*/false);
    ReferenceMap moved = m;
    for (auto& lm : moved.landmarks) lm.position = motion.apply(lm.position);
    const RegionProposal moved_region =
        make_region(moved, subset, RegionProvenance::GT);
    const FineResult r = fine_localize(q, moved_region);
    REQUIRE(r.status == FineStatus::Localized);
    CHECK(r.matches == base.matches);
    CHECK((r.pose.position - motion.apply(base.pose.position)).norm() < 1e-9);
    CHECK(angular_error(r.pose.heading, base.pose.heading + motion.rotation) <
          1e-9);
  }
}

TEST_CASE("a region missing the query's classes is unmatchable") {
  ReferenceMap m;
  m.scene_id = "s";
  m.city = "c";
  m.landmarks = {{0, 0, {0, 0}},  {1, 1, {8, 0}},  {2, 2, {0, 8}},
                 {3, 3, {20, 20}}, {4, 4, {30, 10}}};
  const LocalMap q = planted_query(m, {0, 1, 2}, Pose3DoF{{3.0, 3.0}, 0.4});
  // region represents classes 3 and 4 only: at most 0 of the query's objects
  const RegionProposal region = make_region(m, {3, 4}, RegionProvenance::CoarseOutput);
  const FineResult r = fine_localize(q, region);
  CHECK(r.status == FineStatus::Failed);
  CHECK(r.failure_reason == "unmatchable");

  // two representable objects are still too few
  ReferenceMap m2 = m;
  const RegionProposal region2 =
      make_region(m2, {0, 1, 3}, RegionProvenance::CoarseOutput);
  const FineResult r2 = fine_localize(q, region2);
  CHECK(r2.status == FineStatus::Failed);
  CHECK(r2.failure_reason == "unmatchable");
}

TEST_CASE("too few distinct landmarks for three inliers fails with no consensus") {
  ReferenceMap m;
  m.scene_id = "s";
  m.city = "c";
  m.landmarks = {{0, 0, {0, 0}}, {1, 0, {8, 0}}, {2, 0, {0, 8}}, {3, 1, {8, 8}},
                 {4, 0, {40, 40}}};
  // query sees three class-0 objects and one class-1 object
  const LocalMap q = planted_query(m, {0, 1, 2, 3}, Pose3DoF{{4.0, 4.0}, 1.0});
  // region holds one landmark per class: every object's class is represented
  // (4 representable slots) but at most 2 correspondences can coexist
  const RegionProposal region = make_region(m, {4, 3}, RegionProvenance::CoarseOutput);
  const FineResult r = fine_localize(q, region);
  CHECK(r.status == FineStatus::Failed);
  CHECK(r.failure_reason == "no consensus");
}

TEST_CASE("empty region is rejected") {
  SeededRng rng(76);
  ReferenceMap m = random_map(rng, 6, 2, 40.0);
  const LocalMap q = planted_query(m, {0, 1, 2}, centered_pose(m, {0, 1, 2}));
  RegionProposal region;
  region.scene_id = m.scene_id;
  CHECK_THROWS_AS(fine_localize(q, region), PreconditionError);
}

TEST_CASE("consensus search handles regions too large to enumerate") {
  // 4 classes x 8 landmarks: full assignments ~9.8e6, far past the
  // enumeration budget, so the sampling branch must solve it
  SeededRng rng(77);
  ReferenceMap m;
  m.scene_id = "big";
  m.city = "c";
  int id = 0;
  for (int cls = 0; cls < 4; ++cls)
    for (int i = 0; i < 8; ++i)
      m.landmarks.push_back({id++, cls,
                             {rng.uniform(0.0, 80.0), rng.uniform(0.0, 80.0)}});
  std::vector<int> subset;
  for (int cls = 0; cls < 4; ++cls) {
    subset.push_back(cls * 8 + 1);  // two objects per class
    subset.push_back(cls * 8 + 5);
  }
  const Pose3DoF pose = centered_pose(m, subset);
  const LocalMap q = planted_query(m, subset, pose);

  std::vector<int> all_ids;
  for (const auto& lm : m.landmarks) all_ids.push_back(lm.id);
  const RegionProposal region =
      make_region(m, all_ids, RegionProvenance::CoarseOutput);

  FineParams params;
  params.ransac_iterations = 20'000;
  params.seed = 3;
  const FineResult r = fine_localize(q, region, params);
  REQUIRE(r.status == FineStatus::Localized);
  CHECK(r.matches == *q.gt_matches);  // all eight objects recovered as inliers
  CHECK((r.pose.position - pose.position).norm() < 1e-6);
  CHECK(angular_error(r.pose.heading, pose.heading) < 1e-6);

  // fixed seed: bitwise reproducible
  const FineResult again = fine_localize(q, region, params);
  CHECK(again.status == FineStatus::Localized);
  CHECK(again.pose.position == r.pose.position);
  CHECK(again.pose.heading == r.pose.heading);
  CHECK(again.matches == r.matches);
}

TEST_CASE("objects of unrepresented classes are left out of the consensus") {
  // query: three class-0 objects and one class-7 object; the region knows
  // nothing about class 7, so no full assignment exists and the sampling
  // branch must localize on the class-0 objects alone
  SeededRng rng(78);
  ReferenceMap m;
  m.scene_id = "partial";
  m.city = "c";
  m.landmarks = {{0, 0, {0.0, 0.0}}, {1, 0, {11.0, 2.0}}, {2, 0, {3.0, 12.0}},
                 {3, 0, {14.0, 14.0}}, {4, 0, {7.0, -6.0}}, {5, 7, {9.0, 6.0}}};
  const std::vector<int> subset{0, 1, 2, 5};
  const Pose3DoF pose{{6.0, 5.0}, 0.9};
  const LocalMap q = planted_query(m, subset, pose);

  const RegionProposal region =
      make_region(m, {0, 1, 2, 3, 4}, RegionProvenance::CoarseOutput);
  FineParams params;
  params.ransac_iterations = 5'000;
  params.seed = 11;
  const FineResult r = fine_localize(q, region, params);
  REQUIRE(r.status == FineStatus::Localized);
  CHECK(r.matches == std::vector<std::pair<int, int>>{{0, 0}, {1, 1}, {2, 2}});
  CHECK((r.pose.position - pose.position).norm() < 1e-6);
}

TEST_CASE("estimation error grows with detection noise") {
  SeededRng rng(79);
  std::vector<double> sigmas{0.0, 0.05, 0.5};
  std::vector<double> medians;
  for (double sigma : sigmas) {
    std::vector<double> losses;
    SeededRng noise(1234);  // same draws for every sigma level
    for (int trial = 0; trial < 20; ++trial) {
      SeededRng map_rng(900 + static_cast<std::uint64_t>(trial));
      ReferenceMap m = random_map(map_rng, 12, 3, 60.0);
      const std::vector<int> subset{0, 2, 4, 6, 8};
      const Pose3DoF pose = centered_pose(m, subset);
      const LocalMap q = noisy_planted_query(m, subset, pose, sigma, noise);
      const RegionProposal region = make_region(m, subset, RegionProvenance::GT);
      const FineResult r = fine_localize(q, region);
      REQUIRE(r.status == FineStatus::Localized);
      losses.push_back(pose_loss(r.pose, pose));
    }
    medians.push_back(lower_median(losses));
  }
  CHECK(medians[0] < 1e-9);
  CHECK(medians[0] <= medians[1]);
  CHECK(medians[1] < medians[2]);
}

TEST_CASE("pose loss adds metric distance and wrapped heading error") {
  const Pose3DoF a{{0.0, 0.0}, 0.0};
  CHECK(pose_loss(a, a) == 0.0);

  const Pose3DoF b{{3.0, 4.0}, 0.0};
  CHECK(pose_loss(b, a) == doctest::Approx(5.0).epsilon(1e-12));

  // headings on opposite sides of the +-pi seam wrap to a small difference
  const Pose3DoF c{{0.0, 0.0}, 3.1};
  const Pose3DoF d{{0.0, 0.0}, -3.1};
  CHECK(pose_loss(c, d) == doctest::Approx(2 * std::numbers::pi - 6.2).epsilon(1e-9));
  CHECK(pose_loss(c, d) == doctest::Approx(pose_loss(d, c)));

  // the heading term never exceeds pi
  const Pose3DoF e{{0.0, 0.0}, std::numbers::pi};
  CHECK(pose_loss(e, a) == doctest::Approx(std::numbers::pi).epsilon(1e-12));
}

TEST_CASE("fine metrics take medians over localized queries only") {
  std::vector<FineResult> results(4);
  std::vector<Pose3DoF> gt(4, Pose3DoF{{0.0, 0.0}, 0.0});
  for (int i = 0; i < 3; ++i) results[static_cast<std::size_t>(i)].status = FineStatus::Localized;
  results[0].pose = {{1.0, 0.0}, 0.0};
  results[1].pose = {{2.0, 0.0}, 0.0};
  results[2].pose = {{100.0, 0.0}, 0.0};
  results[3].status = FineStatus::Failed;
  results[3].failure_reason = "no consensus";

  const FineMetrics fm = fine_metrics(results, gt);
  CHECK(fm.defined);
  CHECK(fm.localized_count == 3);
  CHECK(fm.failure_count == 1);
  CHECK(fm.median_position_error_m == doctest::Approx(2.0));
  CHECK(fm.median_orientation_error_deg == doctest::Approx(0.0));
}

TEST_CASE("orientation medians are reported in degrees") {
  std::vector<FineResult> results(3);
  std::vector<Pose3DoF> gt(3, Pose3DoF{{0.0, 0.0}, 0.0});
  for (auto& r : results) r.status = FineStatus::Localized;
  results[0].pose = {{0.0, 0.0}, std::numbers::pi / 2};   // 90 deg
  results[1].pose = {{0.0, 0.0}, std::numbers::pi / 4};   // 45 deg
  results[2].pose = {{0.0, 0.0}, -std::numbers::pi / 6};  // 30 deg
  const FineMetrics fm = fine_metrics(results, gt);
  CHECK(fm.median_orientation_error_deg == doctest::Approx(45.0).epsilon(1e-9));
}

TEST_CASE("all-failed metrics stay undefined") {
  std::vector<FineResult> results(2);
  std::vector<Pose3DoF> gt(2);
  const FineMetrics fm = fine_metrics(results, gt);
  CHECK_FALSE(fm.defined);
  CHECK(fm.localized_count == 0);
  CHECK(fm.failure_count == 2);

  CHECK_THROWS_AS(fine_metrics({}, {}), PreconditionError);
  CHECK_THROWS_AS(fine_metrics(results, std::vector<Pose3DoF>(3)),
                  PreconditionError);
}

TEST_CASE("provenance and status names are stable identifiers") {
  CHECK(std::string(to_string(RegionProvenance::CoarseOutput)) == "coarse");
  CHECK(std::string(to_string(RegionProvenance::CoarseBB)) == "coarsebb");
  CHECK(std::string(to_string(RegionProvenance::NoisyGT)) == "noisygt");
  CHECK(std::string(to_string(RegionProvenance::GT)) == "gt");
  CHECK(std::string(to_string(FineStatus::Localized)) == "localized");
  CHECK(std::string(to_string(FineStatus::Failed)) == "failed");
}
