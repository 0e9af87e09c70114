#include "maploc/coarse.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace maploc {

namespace {

std::vector<double> make_embedding(ClassId class_id, const Vec2& position,
                                   std::size_t class_count) {
  std::vector<double> emb(class_count + 2, 0.0);
  if (class_id < 0 || static_cast<std::size_t>(class_id) >= class_count)
    throw PreconditionError("class id " + std::to_string(class_id) +
                            " outside the registry");
  emb[static_cast<std::size_t>(class_id)] = 1.0;
  emb[class_count] = position.x();
  emb[class_count + 1] = position.y();
  return emb;
}

double edge_weight(const Vec2& a, const Vec2& b) {
  return std::exp(-(a - b).norm());
}

std::vector<int> gt_ids(const LocalMap& q) {
  if (!q.gt_matches)
    throw PreconditionError("query '" + q.query_id + "' has no gt matches");
  std::vector<int> ids;
  ids.reserve(q.gt_matches->size());
  for (const auto& [slot, lm] : *q.gt_matches) ids.push_back(lm);
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

}  // namespace

SpatialGraph build_query_graph(const LocalMap& q, const ClassRegistry& classes) {
  q.validate();
  SpatialGraph g;
  g.directed = false;
  std::vector<LocalObject> objs = q.objects;
  std::sort(objs.begin(), objs.end(),
            [](const LocalObject& a, const LocalObject& b) {
              return a.slot < b.slot;
            });
  for (const auto& o : objs)
    g.nodes.push_back(
        {o.slot, o.class_id, o.position,
         make_embedding(o.class_id, o.position, classes.size())});
  for (std::size_t i = 0; i < objs.size(); ++i)
    for (std::size_t j = i + 1; j < objs.size(); ++j)
      g.edges.push_back({static_cast<int>(i), static_cast<int>(j),
                         edge_weight(objs[i].position, objs[j].position)});
  return g;
}

SpatialGraph build_reference_graph(const ReferenceMap& m,
                                   const ClassRegistry& classes, int k,
                                   bool symmetrize) {
  if (k < 1) throw PreconditionError("reference graph needs k >= 1");
  if (m.landmarks.size() <= static_cast<std::size_t>(k))
    throw PreconditionError("reference graph needs more than k=" +
                            std::to_string(k) + " landmarks, got " +
                            std::to_string(m.landmarks.size()));
  std::vector<ObjectLandmark> lms = m.landmarks;
  std::sort(lms.begin(), lms.end(),
            [](const ObjectLandmark& a, const ObjectLandmark& b) {
              return a.id < b.id;
            });

  SpatialGraph g;
  g.directed = !symmetrize;
  for (const auto& lm : lms)
    g.nodes.push_back({lm.id, lm.class_id, lm.position,
                       make_embedding(lm.class_id, lm.position, classes.size())});

  std::set<std::pair<int, int>> undirected;  // node-index pairs, min first
  for (std::size_t i = 0; i < lms.size(); ++i) {
    std::vector<std::size_t> others;
    others.reserve(lms.size() - 1);
    for (std::size_t j = 0; j < lms.size(); ++j)
      if (j != i) others.push_back(j);
    // Nearest k by metric distance; equidistant landmarks resolve by id.
    std::partial_sort(others.begin(), others.begin() + k, others.end(),
                      [&](std::size_t a, std::size_t b) {
                        const double da = (lms[a].position - lms[i].position).norm();
                        const double db = (lms[b].position - lms[i].position).norm();
                        if (da != db) return da < db;
                        return lms[a].id < lms[b].id;
                      });
    for (int e = 0; e < k; ++e) {
      const std::size_t j = others[static_cast<std::size_t>(e)];
      if (symmetrize) {
        undirected.emplace(std::min(i, j), std::max(i, j));
      } else {
        g.edges.push_back({static_cast<int>(i), static_cast<int>(j),
                           edge_weight(lms[i].position, lms[j].position)});
      }
    }
  }
  if (symmetrize)
    for (const auto& [i, j] : undirected)
      g.edges.push_back({static_cast<int>(i), static_cast<int>(j),
                         edge_weight(lms[static_cast<std::size_t>(i)].position,
                                     lms[static_cast<std::size_t>(j)].position)});
  return g;
}

NodeSelection select_nodes(const SimilarityField& field, const LocalMap& q,
                           const ReferenceMap& m, SelectionPolicy policy) {
  NodeSelection sel;
  sel.policy = policy;
  if (field.scores.size() != m.landmarks.size())
    throw PreconditionError("similarity field does not cover scene '" +
                            m.scene_id + "'");

  std::vector<std::pair<int, double>> ranked = field.scores;
  std::sort(ranked.begin(), ranked.end(),
            [](const auto& a, const auto& b) {
              if (a.second != b.second) return a.second > b.second;
              return a.first < b.first;
            });

  switch (policy) {
    case SelectionPolicy::TopN_LM:
    case SelectionPolicy::Top2N_LM: {
      const std::size_t factor = policy == SelectionPolicy::TopN_LM ? 1 : 2;
      const std::size_t n = std::min(ranked.size(), factor * q.objects.size());
      for (std::size_t i = 0; i < n; ++i) sel.selected.push_back(ranked[i].first);
      break;
    }
    case SelectionPolicy::Radius30: {
      const Vec2 center = m.landmark(ranked.front().first).position;
      for (const auto& lm : m.landmarks)
        if ((lm.position - center).norm() <= 30.0) sel.selected.push_back(lm.id);
      break;
    }
    default:
      throw PreconditionError(
          "select_nodes handles similarity-driven policies only; use "
          "coarse_bb / noisy_gt / gt_selection");
  }
  std::sort(sel.selected.begin(), sel.selected.end());
  return sel;
}

NodeSelection coarse_bb(const LocalMap& q, const ReferenceMap& m) {
  if (!q.gt_matches || !q.gt_pose)
    throw PreconditionError("query '" + q.query_id +
                            "' needs gt matches and gt pose for a bounding box");
  Vec2 lo = q.gt_pose->position, hi = lo;
  for (const auto& [slot, lm_id] : *q.gt_matches) {
    const Vec2 p = m.landmark(lm_id).position;
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const Vec2 margin = 0.05 * (hi - lo);  // 10% growth per dimension
  lo -= margin;
  hi += margin;

  NodeSelection sel;
  sel.policy = SelectionPolicy::CoarseBB;
  for (const auto& lm : m.landmarks)
    if (lm.position.x() >= lo.x() && lm.position.x() <= hi.x() &&
        lm.position.y() >= lo.y() && lm.position.y() <= hi.y())
      sel.selected.push_back(lm.id);
  std::sort(sel.selected.begin(), sel.selected.end());
  return sel;
}

NodeSelection noisy_gt(const LocalMap& q, const ReferenceMap& m, int k) {
  std::vector<int> base = gt_ids(q);
  std::set<int> out(base.begin(), base.end());
  for (int id : base) {
    const Vec2 center = m.landmark(id).position;
    std::vector<const ObjectLandmark*> others;
    for (const auto& lm : m.landmarks)
      if (lm.id != id) others.push_back(&lm);
    const std::size_t take = std::min<std::size_t>(others.size(),
                                                   static_cast<std::size_t>(k));
    std::partial_sort(others.begin(),
                      others.begin() + static_cast<long>(take), others.end(),
                      [&](const ObjectLandmark* a, const ObjectLandmark* b) {
                        const double da = (a->position - center).norm();
                        const double db = (b->position - center).norm();
                        if (da != db) return da < db;
                        return a->id < b->id;
                      });
    for (std::size_t i = 0; i < take; ++i) out.insert(others[i]->id);
  }
  NodeSelection sel;
  sel.policy = SelectionPolicy::NoisyGT;
  sel.selected.assign(out.begin(), out.end());
  return sel;
}

NodeSelection gt_selection(const LocalMap& q) {
  NodeSelection sel;
  sel.policy = SelectionPolicy::GT;
  sel.selected = gt_ids(q);
  return sel;
}

CoarseMetrics coarse_metrics(const NodeSelection& sel,
                             const std::vector<int>& gt_landmark_ids) {
  if (gt_landmark_ids.empty())
    throw PreconditionError("coarse_metrics: empty ground-truth set");
  const std::set<int> gt(gt_landmark_ids.begin(), gt_landmark_ids.end());
  const std::set<int> chosen(sel.selected.begin(), sel.selected.end());
  std::size_t tp = 0;
  for (int id : chosen) tp += gt.count(id);
  CoarseMetrics cm;
  cm.precision = chosen.empty()
                     ? 0.0
                     : static_cast<double>(tp) / static_cast<double>(chosen.size());
  cm.recall = static_cast<double>(tp) / static_cast<double>(gt.size());
  cm.success = tp >= 3 ? 1.0 : 0.0;
  return cm;
}

CoarseMetrics aggregate_metrics(const std::vector<CoarseMetrics>& per_query) {
  CoarseMetrics sum;
  if (per_query.empty()) return sum;
  for (const auto& m : per_query) {
    sum.precision += m.precision;
    sum.recall += m.recall;
    sum.success += m.success;
  }
  const double n = static_cast<double>(per_query.size());
  sum.precision /= n;
  sum.recall /= n;
  sum.success /= n;
  return sum;
}

namespace {

double vec_distance(const std::vector<double>& a, const std::vector<double>& b,
                    const char* what) {
  if (a.size() != b.size())
    throw PreconditionError(std::string(what) + ": dimension mismatch");
  double sq = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sq += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(sq);
}

}  // namespace

double triplet_loss(const std::vector<double>& query_emb,
                    const std::vector<double>& pos_emb,
                    const std::vector<double>& neg_emb, double margin) {
  const double dp = vec_distance(query_emb, pos_emb, "triplet_loss");
  const double dn = vec_distance(query_emb, neg_emb, "triplet_loss");
  return std::max(dp - dn + margin, 0.0);
}

double nsim_loss(const std::vector<double>& query_emb,
                 const std::vector<std::vector<double>>& ref_embs,
                 const std::vector<double>& target_D,
                 const std::vector<double>& weights) {
  if (ref_embs.size() != target_D.size() || ref_embs.size() != weights.size())
    throw PreconditionError("nsim_loss: list length mismatch");
  double loss = 0.0;
  for (std::size_t j = 0; j < ref_embs.size(); ++j)
    loss += std::abs(vec_distance(query_emb, ref_embs[j], "nsim_loss") -
                     target_D[j]) *
            weights[j];
  return loss;
}

const char* to_string(SelectionPolicy p) {
  switch (p) {
    case SelectionPolicy::TopN_LM: return "nlm";
    case SelectionPolicy::Top2N_LM: return "2nlm";
    case SelectionPolicy::Radius30: return "r30";
    case SelectionPolicy::CoarseBB: return "coarsebb";
    case SelectionPolicy::NoisyGT: return "noisygt";
    case SelectionPolicy::GT: return "gt";
  }
  return "?";
}

}  // namespace maploc
