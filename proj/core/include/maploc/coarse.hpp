#pragma once

#include <string>
#include <vector>

#include "maploc/matching.hpp"
#include "maploc/types.hpp"

namespace maploc {

struct GraphNode {
  int id = -1;  // landmark id (reference graph) or slot (query graph)
  ClassId class_id = -1;
  Vec2 position{0.0, 0.0};
  /// one-hot class over the registry ⊕ 2D position
  std::vector<double> embedding;
};

struct GraphEdge {
  int src = 0;  // node indices
  int dst = 0;
  double weight = 0.0;  // e^(-d), in (0, 1]
};

struct SpatialGraph {
  std::vector<GraphNode> nodes;
  std::vector<GraphEdge> edges;
  bool directed = false;
};

/// Complete undirected graph over the query's objects; edge weight e^(-d)
/// with d in normalized local-map units.
SpatialGraph build_query_graph(const LocalMap& q, const ClassRegistry& classes);

/// Directed k-nearest-neighbor graph over the map's landmarks; edge weight
/// e^(-d) with d in meters; distance ties broken by landmark id. Requires
/// more than k landmarks. symmetrize adds the reverse of every edge
/// (deduplicated), giving an undirected graph.
SpatialGraph build_reference_graph(const ReferenceMap& m,
                                   const ClassRegistry& classes, int k = 7,
                                   bool symmetrize = false);

enum class SelectionPolicy { TopN_LM, Top2N_LM, Radius30, CoarseBB, NoisyGT, GT };

struct NodeSelection {
  SelectionPolicy policy = SelectionPolicy::TopN_LM;
  std::vector<int> selected;  // landmark ids, ascending
};

/// Converts a similarity field into a landmark subset. TopN_LM keeps the |q|
/// best-scoring landmarks, Top2N_LM the 2|q| best (score descending, id
/// ascending); Radius30 keeps every landmark within 30 m of the argmax
/// landmark, inclusive. Only those three policies read the field.
NodeSelection select_nodes(const SimilarityField& field, const LocalMap& q,
                           const ReferenceMap& m, SelectionPolicy policy);

/// Axis-aligned box over the GT-matched landmarks and the GT camera
/// position, grown by 10% of each dimension (5% per side); returns all
/// landmarks inside (inclusive). Recall is 1 by construction. Throws
/// PreconditionError without gt_matches + gt_pose.
NodeSelection coarse_bb(const LocalMap& q, const ReferenceMap& m);

/// GT-matched landmarks plus each one's k nearest neighbors, deduplicated.
NodeSelection noisy_gt(const LocalMap& q, const ReferenceMap& m, int k = 7);

/// Exactly the GT-matched landmarks.
NodeSelection gt_selection(const LocalMap& q);

struct CoarseMetrics {
  double precision = 0.0;  // |sel ∩ gt| / |sel|, 0 when sel empty
  double recall = 0.0;     // |sel ∩ gt| / |gt|
  double success = 0.0;    // per query: 1 iff |sel ∩ gt| >= 3; mean over sets
};

/// Retrieval metrics for one query. gt must be nonempty.
CoarseMetrics coarse_metrics(const NodeSelection& sel,
                             const std::vector<int>& gt_landmark_ids);

/// Field-wise mean of per-query metrics.
CoarseMetrics aggregate_metrics(const std::vector<CoarseMetrics>& per_query);

/// max(||q - pos|| - ||q - neg|| + margin, 0). Dimension mismatch throws
/// PreconditionError.
double triplet_loss(const std::vector<double>& query_emb,
                    const std::vector<double>& pos_emb,
                    const std::vector<double>& neg_emb, double margin);

/// Σ_j |‖query_emb - ref_embs[j]‖ - target_D[j]| * weights[j]. Lengths must
/// agree.
double nsim_loss(const std::vector<double>& query_emb,
                 const std::vector<std::vector<double>>& ref_embs,
                 const std::vector<double>& target_D,
                 const std::vector<double>& weights);

const char* to_string(SelectionPolicy p);

}  // namespace maploc
