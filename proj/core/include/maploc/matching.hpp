#pragma once

#include <cstdint>
#include <nlohmann/json.hpp>
#include <string>
#include <utility>
#include <vector>

#include "maploc/geometry.hpp"
#include "maploc/types.hpp"

namespace maploc {

/// No class-consistent assignment of query objects to landmarks exists.
class UnmatchableError : public Error {
 public:
  using Error::Error;
};

/// One candidate correspondence between a local map and reference landmarks,
/// with its best-fit alignment.
struct MatchHypothesis {
  /// (query slot, landmark id) pairs, one per query object, injective.
  std::vector<std::pair<int, int>> assignment;
  SimilarityTransform2D transform;  // local (normalized) -> map (meters)
  double residual_norm = 0.0;       // RMS in normalized query units
  double residual_m = 0.0;          // RMS in map meters
  Pose3DoF pose;                    // camera pose implied by the transform
};

struct BruteForceOptions {
  /// Node-expansion budget for the assignment search.
  std::uint64_t max_alignments = 10'000'000;
  std::size_t max_hypotheses = 16;  // ranked hypotheses kept
};

enum class SearchStatus { Complete, BudgetExceeded };

struct BruteForceResult {
  std::vector<MatchHypothesis> hypotheses;  // ascending residual_norm
  SearchStatus status = SearchStatus::Complete;
  /// Top two hypotheses tie in residual: the query is not unambiguous.
  bool ambiguous = false;
  std::uint64_t expansions = 0;

  const MatchHypothesis& best() const;
};

/// Exhaustive class-consistent correspondence search: every injective
/// assignment of query objects onto same-class landmarks is aligned by
/// similarity Procrustes and ranked by residual (normalized query units,
/// ties broken lexicographically on assignment). Branch-and-bound pruning
/// never changes the ranked output. Throws UnmatchableError when no
/// class-consistent assignment exists; when the expansion budget runs out
/// the partial ranking is returned with status BudgetExceeded.
BruteForceResult brute_force_localize(const LocalMap& q, const ReferenceMap& m,
                                      const BruteForceOptions& opts = {});

struct SimilarityParams {
  double radius_m = 50.0;             // neighborhood radius around a landmark
  std::uint64_t sample_budget = 20'000;  // exhaustive below, sampled above
  std::uint64_t seed = 0;
  unsigned threads = 1;  // 0 = hardware concurrency; field values unaffected
};

/// Geometric/semantic similarity between a query and one landmark's
/// neighborhood, in [0,1]: subsets of neighborhood landmarks matching the
/// query's class multiset are aligned to the query; the best (lowest
/// normalized residual, clamped to [0,1]) combines with the distance of that
/// subset's centroid to the landmark (divided by radius, clamped to [0,1])
/// as (1 - min_r) * (1 - d_sub). A neighborhood lacking a required class
/// scores 0.
double neighbor_similarity(const LocalMap& q, const ReferenceMap& m,
                           int landmark_id, const SimilarityParams& params);

struct SimilarityField {
  std::string query_id;
  std::string scene_id;
  std::uint64_t seed = 0;
  std::vector<std::pair<int, double>> scores;  // (landmark id, s), map order

  double score_of(int landmark_id) const;  // throws IntegrityError if absent
};

/// neighbor_similarity over every landmark of the map. Deterministic for a
/// fixed seed regardless of thread count.
SimilarityField similarity_field(const LocalMap& q, const ReferenceMap& m,
                                 const SimilarityParams& params);

nlohmann::json similarity_field_to_json(const SimilarityField& f);
SimilarityField similarity_field_from_json(const nlohmann::json& j);

/// Linear rescale of scores to sum 1; all-zero input falls back to uniform.
std::vector<double> similarity_weights(const std::vector<double>& scores);

}  // namespace maploc
