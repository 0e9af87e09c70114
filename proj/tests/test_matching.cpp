#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "maploc/matching.hpp"
#include "maploc/rng.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace maploc;
using testsupport::centered_pose;
using testsupport::planted_query;
using testsupport::random_map;

TEST_CASE("planted query: top hypothesis is the planted assignment, pose exact") {
  SeededRng rng(101);
  for (int trial = 0; trial < 25; ++trial) {
    ReferenceMap m = random_map(rng, 12, 5, 80.0);
    const std::vector<int> subset{0, 3, 5, 7};
    const Pose3DoF pose = centered_pose(m, subset);
    const LocalMap q = planted_query(m, subset, pose);

    const BruteForceResult r = brute_force_localize(q, m);
    CHECK(r.status == SearchStatus::Complete);
    REQUIRE(!r.hypotheses.empty());
    auto est = r.best().assignment;
    auto gt = *q.gt_matches;
    std::sort(est.begin(), est.end());
    std::sort(gt.begin(), gt.end());
    CHECK(est == gt);
    CHECK(r.best().residual_norm < 1e-9);
    CHECK((r.best().pose.position - pose.position).norm() < 1e-6);
    CHECK(angular_error(r.best().pose.heading, pose.heading) < 1e-6);
  }
}

TEST_CASE("full ranked output matches the unpruned enumeration oracle") {
  SeededRng rng(202);
  for (int trial = 0; trial < 15; ++trial) {
    // small instances keep the oracle tractable but non-trivial
    ReferenceMap m = random_map(rng, 7 + static_cast<int>(rng.uniform_int(3)), 2, 50.0);
    const std::vector<int> subset{0, 1, 2};
    const LocalMap q = planted_query(m, subset, centered_pose(m, subset));

    BruteForceOptions opts;
    opts.max_hypotheses = 10;
    const BruteForceResult fast = brute_force_localize(q, m, opts);
    const auto slow = testsupport::enumerate_assignments(q, m);

    REQUIRE(fast.hypotheses.size() == std::min<std::size_t>(10, slow.size()));
    for (std::size_t i = 0; i < fast.hypotheses.size(); ++i) {
      CHECK(fast.hypotheses[i].assignment == slow[i].assignment);
      CHECK(std::abs(fast.hypotheses[i].residual_norm - slow[i].residual_norm) <
            1e-9);
    }
  }
}

TEST_CASE("ranking is exhaustive when the map has several classes") {
  SeededRng rng(203);
  for (int trial = 0; trial < 10; ++trial) {
    ReferenceMap m = random_map(rng, 10, 3, 60.0);
    std::vector<int> subset{1, 4, 6, 8};
    const LocalMap q = planted_query(m, subset, centered_pose(m, subset));
    BruteForceOptions opts;
    opts.max_hypotheses = 5;
    const BruteForceResult fast = brute_force_localize(q, m, opts);
    const auto slow = testsupport::enumerate_assignments(q, m);
    REQUIRE(fast.hypotheses.size() == std::min<std::size_t>(5, slow.size()));
    for (std::size_t i = 0; i < fast.hypotheses.size(); ++i)
      CHECK(fast.hypotheses[i].assignment == slow[i].assignment);
  }
}

TEST_CASE("missing classes make a query unmatchable") {
  ReferenceMap m;
  m.scene_id = "s";
  m.city = "c";
  m.landmarks = {{0, 0, {0, 0}}, {1, 0, {10, 0}}, {2, 1, {0, 10}}};
  LocalMap q;
  q.query_id = "q";
  q.scene_id = "s";
  // two objects of class 1, but the map has only one class-1 landmark
  q.objects = {{0, 0, {0.0, 0.5}}, {1, 1, {0.3, 0.4}}, {2, 1, {-0.3, 0.4}}};
  CHECK_THROWS_AS(brute_force_localize(q, m), UnmatchableError);
}

TEST_CASE("an all-coincident query is degenerate, not unmatchable") {
  ReferenceMap m;
  m.scene_id = "s";
  m.city = "c";
  m.landmarks = {{0, 0, {0, 0}}, {1, 0, {10, 0}}, {2, 0, {0, 10}}};
  LocalMap q;
  q.query_id = "q";
  q.scene_id = "s";
  q.objects = {{0, 0, {0.2, 0.2}}, {1, 0, {0.2, 0.2}}, {2, 0, {0.2, 0.2}}};
  CHECK_THROWS_AS(brute_force_localize(q, m), DegenerateError);
}

TEST_CASE("mirrored congruent triple: tie is reported as ambiguous") {
  ReferenceMap m;
  m.scene_id = "s";
  m.city = "c";
  // two congruent same-class triples far apart (translated copy)
  m.landmarks = {{0, 0, {0, 0}},   {1, 0, {6, 0}},   {2, 0, {0, 4}},
                 {3, 0, {100, 0}}, {4, 0, {106, 0}}, {5, 0, {100, 4}}};
  const std::vector<int> subset{0, 1, 2};
  const LocalMap q = planted_query(m, subset, centered_pose(m, subset));
  const BruteForceResult r = brute_force_localize(q, m);
  CHECK(r.ambiguous);
  REQUIRE(r.hypotheses.size() >= 2);
  CHECK(std::abs(r.hypotheses[0].residual_norm - r.hypotheses[1].residual_norm) <=
        1e-9);
  // lexicographic tie-break puts the lower landmark ids first
  CHECK(r.hypotheses[0].assignment < r.hypotheses[1].assignment);
}

TEST_CASE("unique planted match is not flagged ambiguous") {
  SeededRng rng(404);
  ReferenceMap m = random_map(rng, 10, 4, 70.0);
  const std::vector<int> subset{0, 2, 4, 6};
  const LocalMap q = planted_query(m, subset, centered_pose(m, subset));
  CHECK_FALSE(brute_force_localize(q, m).ambiguous);
}

TEST_CASE("distractors of absent classes never change the ranking") {
  SeededRng rng(505);
  ReferenceMap m = random_map(rng, 9, 2, 60.0);
  const std::vector<int> subset{0, 2, 5};
  const LocalMap q = planted_query(m, subset, centered_pose(m, subset));
  BruteForceOptions opts;
  opts.max_hypotheses = 8;
  const BruteForceResult before = brute_force_localize(q, m, opts);

  ReferenceMap extended = m;
  for (int i = 0; i < 5; ++i)
    extended.landmarks.push_back(
        {100 + i, 7, {rng.uniform(0.0, 60.0), rng.uniform(0.0, 60.0)}});
  const BruteForceResult after = brute_force_localize(q, extended, opts);

  REQUIRE(before.hypotheses.size() == after.hypotheses.size());
  for (std::size_t i = 0; i < before.hypotheses.size(); ++i) {
    CHECK(before.hypotheses[i].assignment == after.hypotheses[i].assignment);
    CHECK(before.hypotheses[i].residual_norm ==
          doctest::Approx(after.hypotheses[i].residual_norm).epsilon(1e-12));
  }
}

TEST_CASE("top-1 residual is invariant under rigid motion of the map") {
  SeededRng rng(606);
  ReferenceMap m = random_map(rng, 10, 3, 60.0);
  const std::vector<int> subset{0, 3, 6, 9};
  const LocalMap q = planted_query(m, subset, centered_pose(m, subset));
  const BruteForceResult base = brute_force_localize(q, m);

  for (int trial = 0; trial < 10; ++trial) {
    const auto motion = testsupport::random_similarity(rng, /*with_scale=*/false);
    ReferenceMap moved = m;
    for (auto& lm : moved.landmarks) lm.position = motion.apply(lm.position);
    const BruteForceResult r = brute_force_localize(q, moved);
    CHECK(std::abs(r.best().residual_norm - base.best().residual_norm) < 1e-9);
    // pose transforms covariantly
    CHECK((r.best().pose.position - motion.apply(base.best().pose.position)).norm() <
          1e-6);
    CHECK(angular_error(r.best().pose.heading,
                        base.best().pose.heading + motion.rotation) < 1e-6);
  }
}

TEST_CASE("expansion budget yields a partial result, not an exception") {
  SeededRng rng(707);
  ReferenceMap m = random_map(rng, 30, 1, 100.0);  // one class: 30*29*28*27 nodes
  const std::vector<int> subset{0, 1, 2, 3};
  const LocalMap q = planted_query(m, subset, centered_pose(m, subset));

  BruteForceOptions opts;
  opts.max_alignments = 500;
  const BruteForceResult r = brute_force_localize(q, m, opts);
  CHECK(r.status == SearchStatus::BudgetExceeded);
  CHECK(r.expansions <= 500);
  CHECK(!r.hypotheses.empty());  // partial ranking is still returned

  opts.max_alignments = 10'000'000;
  const BruteForceResult full = brute_force_localize(q, m, opts);
  CHECK(full.status == SearchStatus::Complete);
  CHECK(full.best().residual_norm <= r.best().residual_norm + 1e-15);
}

TEST_CASE("neighbor similarity is 1 for a landmark centered on the planted subset") {
  ReferenceMap m;
  m.scene_id = "s";
  m.city = "c";
  // subset centred on landmark 3; classes distinct so the subset is unique
  m.landmarks = {{0, 0, {-6, 0}}, {1, 1, {6, 0}}, {2, 2, {0, 6}}, {3, 3, {0, 2}}};
  const std::vector<int> subset{0, 1, 2};
  const Pose3DoF pose{{0.0, 2.0}, 0.3};
  const LocalMap q = planted_query(m, subset, pose);

  SimilarityParams p;
  p.radius_m = 50.0;
  // centroid of {(-6,0),(6,0),(0,6)} = (0,2) = landmark 3's position
  CHECK(neighbor_similarity(q, m, 3, p) == doctest::Approx(1.0).epsilon(1e-9));
  // landmark 2 sits 4.47 m from the centroid: score (1-0)(1-d/50)
  const double expected = 1.0 - (Vec2{0, 6} - Vec2{0, 2}).norm() / 50.0;
  CHECK(neighbor_similarity(q, m, 2, p) == doctest::Approx(expected).epsilon(1e-9));
}

TEST_CASE("a neighborhood lacking a required class scores zero") {
  ReferenceMap m;
  m.scene_id = "s";
  m.city = "c";
  m.landmarks = {{0, 0, {0, 0}}, {1, 1, {3, 0}}, {2, 2, {0, 3}},
                 {3, 0, {200, 200}}, {4, 1, {203, 200}}};  // no class-2 near 3
  const std::vector<int> subset{0, 1, 2};
  const LocalMap q = planted_query(m, subset, centered_pose(m, subset));
  SimilarityParams p;
  CHECK(neighbor_similarity(q, m, 3, p) == 0.0);
  CHECK_THROWS_AS(neighbor_similarity(q, m, 99, p), IntegrityError);
}

TEST_CASE("the neighborhood radius boundary is inclusive") {
  ReferenceMap m;
  m.scene_id = "s";
  m.city = "c";
  // landmark 2 exactly radius away from landmark 0
  m.landmarks = {{0, 0, {0, 0}}, {1, 1, {1, 0}}, {2, 2, {0, 50}}};
  LocalMap q;
  q.query_id = "q";
  q.scene_id = "s";
  const Pose3DoF pose{{0.3, 0.4}, 1.0};
  std::vector<Vec2> cam;
  for (int id : {0, 1, 2}) cam.push_back(pose.map_to_camera(m.landmark(id).position));
  normalize_by_max_range(cam);
  q.objects = {{0, 0, cam[0]}, {1, 1, cam[1]}, {2, 2, cam[2]}};

  SimilarityParams p;
  p.radius_m = 50.0;
  CHECK(neighbor_similarity(q, m, 0, p) > 0.0);  // class 2 at exactly 50 m counts
  p.radius_m = 49.999;
  CHECK(neighbor_similarity(q, m, 0, p) == 0.0);
}

TEST_CASE("scores stay within [0,1] on adversarial neighborhoods") {
  SeededRng rng(808);
  for (int trial = 0; trial < 10; ++trial) {
    ReferenceMap m = random_map(rng, 25, 2, 40.0);
    const std::vector<int> subset{0, 1, 2, 3};
    const LocalMap q = planted_query(m, subset, centered_pose(m, subset));
    SimilarityParams p;
    p.seed = trial;
    for (const auto& lm : m.landmarks) {
      const double s = neighbor_similarity(q, m, lm.id, p);
      CHECK(s >= 0.0);
      CHECK(s <= 1.0);
    }
  }
}

TEST_CASE("sampled evaluation is deterministic and obeys the budget switch") {
  SeededRng rng(909);
  ReferenceMap m = random_map(rng, 40, 1, 30.0);  // single class: huge subset count
  const std::vector<int> subset{0, 1, 2, 3, 4};
  const LocalMap q = planted_query(m, subset, centered_pose(m, subset));

  SimilarityParams sampled;
  sampled.sample_budget = 50;  // far below C(40,5)*5! arrangements
  sampled.seed = 12345;
  const double a = neighbor_similarity(q, m, 7, sampled);
  const double b = neighbor_similarity(q, m, 7, sampled);
  CHECK(a == b);  // bitwise reproducible

  SimilarityParams other = sampled;
  other.seed = 54321;
  // different seeds explore different subsets; scores usually differ
  const double c = neighbor_similarity(q, m, 7, other);
  CHECK(a >= 0.0);
  CHECK(c >= 0.0);
}

TEST_CASE("exhaustive and sampled paths agree when the budget covers everything") {
  SeededRng rng(1010);
  ReferenceMap m = random_map(rng, 9, 3, 40.0);
  const std::vector<int> subset{0, 1, 2};
  const LocalMap q = planted_query(m, subset, centered_pose(m, subset));
  SimilarityParams exhaustive;
  exhaustive.sample_budget = 1'000'000'000;  // forces the exhaustive branch
  SimilarityParams tight;
  tight.sample_budget = 20'000;  // still above the true count for this instance
  for (const auto& lm : m.landmarks)
    CHECK(neighbor_similarity(q, m, lm.id, exhaustive) ==
          doctest::Approx(neighbor_similarity(q, m, lm.id, tight)).epsilon(1e-12));
}

TEST_CASE("similarity fields are seed-deterministic and thread-independent") {
  SeededRng rng(111);
  ReferenceMap m = random_map(rng, 30, 2, 60.0);
  const std::vector<int> subset{0, 5, 10, 15};
  const LocalMap q = planted_query(m, subset, centered_pose(m, subset));

  SimilarityParams p1;
  p1.seed = 7;
  p1.threads = 1;
  p1.sample_budget = 200;
  SimilarityParams p8 = p1;
  p8.threads = 8;
  const SimilarityField f1 = similarity_field(q, m, p1);
  const SimilarityField f8 = similarity_field(q, m, p8);
  REQUIRE(f1.scores.size() == m.landmarks.size());
  CHECK(f1.scores == f8.scores);
  CHECK(f1.score_of(subset[0]) >= 0.0);
  CHECK_THROWS_AS(f1.score_of(999), IntegrityError);

  const auto j = similarity_field_to_json(f1);
  const SimilarityField back = similarity_field_from_json(j);
  CHECK(back.scores == f1.scores);
  CHECK(back.query_id == f1.query_id);
}

TEST_CASE("a symmetric map yields a symmetric field") {
  // four landmarks on a square, one class; query is the square itself viewed
  // from its center, so every corner's neighborhood looks identical
  ReferenceMap m;
  m.scene_id = "s";
  m.city = "c";
  m.landmarks = {{0, 0, {10, 10}}, {1, 0, {-10, 10}}, {2, 0, {-10, -10}}, {3, 0, {10, -10}}};
  const LocalMap q = planted_query(m, {0, 1, 2, 3}, Pose3DoF{{0.0, 0.0}, 0.0});
  SimilarityParams p;
  const SimilarityField f = similarity_field(q, m, p);
  for (std::size_t i = 1; i < 4; ++i)
    CHECK(std::abs(f.scores[0].second - f.scores[i].second) < 1e-9);
}

TEST_CASE("similarity weights: rescale, degenerate fallback, validation") {
  const auto w1 = similarity_weights({1.0, 0.0, 0.0});
  CHECK(w1 == std::vector<double>{1.0, 0.0, 0.0});
  const auto w2 = similarity_weights({0.5, 0.5});
  CHECK(w2 == std::vector<double>{0.5, 0.5});
  const auto w3 = similarity_weights({0.0, 0.0, 0.0});
  CHECK(w3 == std::vector<double>{1.0 / 3, 1.0 / 3, 1.0 / 3});

  SeededRng rng(222);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> scores;
    for (int i = 0; i < 8; ++i) scores.push_back(rng.uniform());
    const auto w = similarity_weights(scores);
    double sum = 0.0;
    for (double x : w) sum += x;
    CHECK(std::abs(sum - 1.0) < 1e-12);
  }
  CHECK_THROWS_AS(similarity_weights({}), PreconditionError);
  CHECK_THROWS_AS(similarity_weights({0.5, -0.1}), PreconditionError);
}
