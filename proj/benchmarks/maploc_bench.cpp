// Microbenchmarks for the hot paths: alignment, assignment search,
// similarity fields, graph construction, and clustering.
#include <benchmark/benchmark.h>

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "maploc/coarse.hpp"
#include "maploc/geometry.hpp"
#include "maploc/matching.hpp"
#include "maploc/pipeline.hpp"
#include "maploc/rng.hpp"
#include "maploc/types.hpp"

namespace {

using namespace maploc;

std::vector<Vec2> random_points(SeededRng& rng, int n, double extent) {
  std::vector<Vec2> pts;
  pts.reserve(n);
  for (int i = 0; i < n; ++i)
    pts.push_back({rng.uniform(0.0, extent), rng.uniform(0.0, extent)});
  return pts;
}

ReferenceMap random_map(SeededRng& rng, int n, int classes, double extent) {
  ReferenceMap m;
  m.scene_id = "bench";
  for (int i = 0; i < n; ++i)
    m.landmarks.push_back(
        {i, static_cast<ClassId>(rng.uniform_int(classes)),
         {rng.uniform(0.0, extent), rng.uniform(0.0, extent)}});
  return m;
}

// Query observing `count` landmarks of m from the subset centroid.
LocalMap planted_query(const ReferenceMap& m, int count) {
  Vec2 c = Vec2::Zero();
  for (int i = 0; i < count; ++i) c += m.landmarks[i].position;
  c /= static_cast<double>(count);
  const Pose3DoF pose{c, 0.3};
  LocalMap q;
  q.query_id = "bench-q";
  q.scene_id = m.scene_id;
  std::vector<Vec2> cam;
  for (int i = 0; i < count; ++i)
    cam.push_back(pose.map_to_camera(m.landmarks[i].position));
  normalize_by_max_range(cam);
  for (int i = 0; i < count; ++i)
    q.objects.push_back({i, m.landmarks[i].class_id, cam[i]});
  return q;
}

void BM_ProcrustesAlign(benchmark::State& state) {
  SeededRng rng(1);
  const int n = static_cast<int>(state.range(0));
  const std::vector<Vec2> src = random_points(rng, n, 50.0);
  SimilarityTransform2D t;
  t.rotation = 0.7;
  t.scale = 1.4;
  t.translation = {12.0, -3.0};
  std::vector<Vec2> dst;
  for (const Vec2& p : src) dst.push_back(t.apply(p));
  for (auto _ : state)
    benchmark::DoNotOptimize(procrustes_align(src, dst, true));
}
BENCHMARK(BM_ProcrustesAlign)->Arg(8)->Arg(64)->Arg(512);

void BM_BruteForceLocalize(benchmark::State& state) {
  SeededRng rng(2);
  const ReferenceMap m =
      random_map(rng, static_cast<int>(state.range(0)), 5, 200.0);
  const LocalMap q = planted_query(m, 5);
  BruteForceOptions opts;
  opts.max_hypotheses = 2;
  for (auto _ : state)
    benchmark::DoNotOptimize(brute_force_localize(q, m, opts));
}
BENCHMARK(BM_BruteForceLocalize)->Arg(16)->Arg(32)->Arg(64);

void BM_SimilarityField(benchmark::State& state) {
  SeededRng rng(3);
  const ReferenceMap m = random_map(rng, 60, 6, 150.0);
  const LocalMap q = planted_query(m, 6);
  SimilarityParams params;
  params.sample_budget = static_cast<std::uint64_t>(state.range(0));
  params.threads = 1;
  for (auto _ : state)
    benchmark::DoNotOptimize(similarity_field(q, m, params));
}
BENCHMARK(BM_SimilarityField)->Arg(500)->Arg(2000);

void BM_ReferenceGraph(benchmark::State& state) {
  SeededRng rng(4);
  const int n = static_cast<int>(state.range(0));
  const ReferenceMap m = random_map(rng, n, 5, 300.0);
  ClassRegistry reg;
  for (int i = 0; i < 5; ++i) reg.add("class-" + std::to_string(i));
  for (auto _ : state)
    benchmark::DoNotOptimize(build_reference_graph(m, reg, 7, false));
}
BENCHMARK(BM_ReferenceGraph)->Arg(100)->Arg(500);

void BM_DensityCluster(benchmark::State& state) {
  SeededRng rng(5);
  const int per_cluster = 12;
  const int clusters = static_cast<int>(state.range(0)) / per_cluster;
  std::vector<std::pair<int, Vec3>> pts;
  int id = 0;
  for (int c = 0; c < clusters; ++c) {
    const Vec3 center{rng.uniform(0.0, 100.0), rng.uniform(0.0, 100.0),
                      rng.uniform(0.0, 10.0)};
    for (int p = 0; p < per_cluster; ++p, ++id)
      pts.push_back({id, center + Vec3{rng.normal(0.0, 0.3),
                                       rng.normal(0.0, 0.3),
                                       rng.normal(0.0, 0.3)}});
  }
  for (auto _ : state)
    benchmark::DoNotOptimize(density_cluster(pts, 1.5, 4));
}
BENCHMARK(BM_DensityCluster)->Arg(300)->Arg(3000);

}  // namespace

BENCHMARK_MAIN();
