#include "maploc/matching.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "maploc/parallel.hpp"
#include "maploc/rng.hpp"

namespace maploc {

namespace {

/// Running correspondence sums; push/pop keep alignment evaluation O(1) per
/// search node.
struct CorrSums {
  int n = 0;
  double spx = 0, spy = 0;  // Σ source (query, normalized units)
  double sqx = 0, sqy = 0;  // Σ target (map, meters)
  double spp = 0, sqq = 0;  // Σ‖·‖²
  double dot = 0, cross = 0;

  void push(const Vec2& p, const Vec2& q) {
    ++n;
    spx += p.x(); spy += p.y();
    sqx += q.x(); sqy += q.y();
    spp += p.squaredNorm();
    sqq += q.squaredNorm();
    dot += p.dot(q);
    cross += p.x() * q.y() - p.y() * q.x();
  }

  void pop(const Vec2& p, const Vec2& q) {
    --n;
    spx -= p.x(); spy -= p.y();
    sqx -= q.x(); sqy -= q.y();
    spp -= p.squaredNorm();
    sqq -= q.squaredNorm();
    dot -= p.dot(q);
    cross -= p.x() * q.y() - p.y() * q.x();
  }
};

struct Centered {
  double a = 0, b = 0, spp_c = 0, sqq_c = 0, mag = 0;
};

Centered center(const CorrSums& s) {
  Centered c;
  const double n = s.n;
  c.a = s.dot - (s.spx * s.sqx + s.spy * s.sqy) / n;
  c.b = s.cross - (s.spx * s.sqy - s.spy * s.sqx) / n;
  c.spp_c = s.spp - (s.spx * s.spx + s.spy * s.spy) / n;
  c.sqq_c = s.sqq - (s.sqx * s.sqx + s.sqy * s.sqy) / n;
  c.mag = std::hypot(c.a, c.b);
  return c;
}

struct Eval {
  bool ok = false;
  SimilarityTransform2D transform;
};

/// Closed-form similarity aligning the accumulated source points onto the
/// target points. Degenerate configurations (coincident sources, vanishing
/// cross-covariance) yield ok = false. Residuals are recomputed from the
/// transform by the caller.
Eval evaluate(const CorrSums& s) {
  Eval e;
  if (s.n < 2) return e;
  const Centered c = center(s);
  if (c.spp_c <= 0.0 || c.mag <= 0.0) return e;
  const double n = s.n;
  e.transform.rotation = std::atan2(c.b, c.a);
  e.transform.scale = c.mag / c.spp_c;
  const double cr = std::cos(e.transform.rotation);
  const double sr = std::sin(e.transform.rotation);
  const double mux = s.spx / n, muy = s.spy / n;
  e.transform.translation = {
      s.sqx / n - e.transform.scale * (cr * mux - sr * muy),
      s.sqy / n - e.transform.scale * (sr * mux + cr * muy)};
  e.ok = true;
  return e;
}

/// Optimal map-to-query SSE of the pairs accumulated so far. It grows
/// monotonically as pairs are added, and the full assignment's value is
/// bounded by n * residual_norm² (the inverse of the query-to-map optimum is
/// a feasible map-to-query transform). Hence a valid pruning bound for a
/// ranking by residual_norm.
double reverse_sse_lower_bound(const CorrSums& s) {
  if (s.n < 2) return 0.0;
  const Centered c = center(s);
  double sse = c.spp_c;
  if (c.sqq_c > 0.0) sse -= c.mag * c.mag / c.sqq_c;
  return std::max(0.0, sse);
}

struct RankedHypothesis {
  double residual_norm = 0.0;
  double residual_m = 0.0;
  SimilarityTransform2D transform;
  std::vector<int> lm_by_slot;  // landmark id per slot, slot-ascending

  bool operator<(const RankedHypothesis& o) const {
    if (residual_norm != o.residual_norm)
      return residual_norm < o.residual_norm;
    return lm_by_slot < o.lm_by_slot;
  }
};

struct SearchOutcome {
  std::vector<RankedHypothesis> ranked;
  SearchStatus status = SearchStatus::Complete;
  std::uint64_t expansions = 0;
};

/// Core recursive search shared by the oracle and the similarity sampler's
/// exhaustive branch. pool entries carry (landmark id, class, position).
struct PoolEntry {
  int landmark_id;
  ClassId class_id;
  Vec2 position;
};

/// RMS of the fitted transform over the chosen pairing, summed directly.
/// The closed-form SSE from the running sums cancels catastrophically near
/// zero residual, so recorded hypotheses recompute it.
double exact_residual_m(const SimilarityTransform2D& t,
                        const std::vector<LocalObject>& slots,
                        const std::vector<PoolEntry>& pool,
                        const std::vector<int>& chosen) {
  double sse = 0.0;
  for (std::size_t i = 0; i < slots.size(); ++i)
    sse += (t.apply(slots[i].position) -
            pool[static_cast<std::size_t>(chosen[i])].position)
               .squaredNorm();
  return std::sqrt(sse / static_cast<double>(slots.size()));
}

class Search {
 public:
  Search(const std::vector<LocalObject>& slots, const std::vector<PoolEntry>& pool,
         const BruteForceOptions& opts)
      : slots_(slots), pool_(pool), opts_(opts) {
    for (int i = 0; i < static_cast<int>(pool_.size()); ++i)
      candidates_[pool_[i].class_id].push_back(i);
    for (auto& [cls, list] : candidates_)
      std::sort(list.begin(), list.end(), [&](int a, int b) {
        return pool_[a].landmark_id < pool_[b].landmark_id;
      });
    // Fewest-candidates-first ordering shrinks the branching factor early.
    order_.resize(slots_.size());
    for (std::size_t i = 0; i < slots_.size(); ++i) order_[i] = i;
    std::sort(order_.begin(), order_.end(), [&](std::size_t a, std::size_t b) {
      const std::size_t ca = candidate_count(slots_[a].class_id);
      const std::size_t cb = candidate_count(slots_[b].class_id);
      if (ca != cb) return ca < cb;
      return slots_[a].slot < slots_[b].slot;
    });
    used_.assign(pool_.size(), 0);
    chosen_.assign(slots_.size(), -1);
  }

  bool feasible() const {
    std::map<ClassId, int> need;
    for (const auto& o : slots_) need[o.class_id] += 1;
    for (const auto& [cls, k] : need)
      if (candidate_count(cls) < static_cast<std::size_t>(k)) return false;
    return true;
  }

  SearchOutcome run() {
    out_ = SearchOutcome{};
    if (!feasible()) return out_;
    sums_ = CorrSums{};
    scratch_.assign(slots_.size(), {});
    for (auto& s : scratch_) s.reserve(pool_.size());
    seed_incumbents();
    descend(0);
    std::sort(heap_.begin(), heap_.end());
    out_.ranked = std::move(heap_);
    return out_;
  }

 private:
  std::size_t candidate_count(ClassId c) const {
    auto it = candidates_.find(c);
    return it == candidates_.end() ? 0 : it->second.size();
  }

  /// Depths 0 and 1 carry no geometric signal (two pairs always fit a
  /// similarity exactly), so the plain DFS can drown before any good
  /// incumbent exists. Enumerating candidate pairs for the two tightest
  /// slots pins the transform; completing each greedily by nearest unused
  /// landmark of the right class plants real hypotheses in the heap, and
  /// the bound prunes from the first descent. Free of budget charges: the
  /// work is a bounded preamble, not part of the enumeration.
  void seed_incumbents() {
    if (slots_.size() < 3) return;
    const std::size_t sa = order_[0], sb = order_[1];
    const LocalObject& oa = slots_[sa];
    const LocalObject& ob = slots_[sb];
    std::vector<std::pair<std::size_t, int>> taken;  // (slot idx, pool idx)
    for (int ca : candidates_.at(oa.class_id)) {
      for (int cb : candidates_.at(ob.class_id)) {
        if (cb == ca) continue;
        sums_.push(oa.position, pool_[static_cast<std::size_t>(ca)].position);
        sums_.push(ob.position, pool_[static_cast<std::size_t>(cb)].position);
        const Eval e = evaluate(sums_);
        if (!e.ok) {
          sums_.pop(ob.position, pool_[static_cast<std::size_t>(cb)].position);
          sums_.pop(oa.position, pool_[static_cast<std::size_t>(ca)].position);
          continue;
        }
        used_[static_cast<std::size_t>(ca)] = 1;
        used_[static_cast<std::size_t>(cb)] = 1;
        chosen_[sa] = ca;
        chosen_[sb] = cb;
        taken.clear();
        bool complete = true;
        for (std::size_t d = 2; d < slots_.size() && complete; ++d) {
          const std::size_t slot_idx = order_[d];
          const LocalObject& obj = slots_[slot_idx];
          const Vec2 predicted = e.transform.apply(obj.position);
          int best_ci = -1;
          double best_d = std::numeric_limits<double>::infinity();
          for (int ci : candidates_.at(obj.class_id)) {
            if (used_[static_cast<std::size_t>(ci)]) continue;
            const double dist =
                (pool_[static_cast<std::size_t>(ci)].position - predicted).norm();
            if (dist < best_d) {
              best_d = dist;
              best_ci = ci;
            }
          }
          if (best_ci < 0) {
            complete = false;
            break;
          }
          used_[static_cast<std::size_t>(best_ci)] = 1;
          chosen_[slot_idx] = best_ci;
          sums_.push(obj.position,
                     pool_[static_cast<std::size_t>(best_ci)].position);
          taken.emplace_back(slot_idx, best_ci);
        }
        if (complete) record();
        for (auto it = taken.rbegin(); it != taken.rend(); ++it) {
          sums_.pop(slots_[it->first].position,
                    pool_[static_cast<std::size_t>(it->second)].position);
          chosen_[it->first] = -1;
          used_[static_cast<std::size_t>(it->second)] = 0;
        }
        chosen_[sb] = -1;
        chosen_[sa] = -1;
        used_[static_cast<std::size_t>(cb)] = 0;
        used_[static_cast<std::size_t>(ca)] = 0;
        sums_.pop(ob.position, pool_[static_cast<std::size_t>(cb)].position);
        sums_.pop(oa.position, pool_[static_cast<std::size_t>(ca)].position);
      }
    }
  }

  void descend(std::size_t depth) {
    if (out_.status == SearchStatus::BudgetExceeded) return;
    if (depth == slots_.size()) {
      record();
      return;
    }
    const std::size_t slot_idx = order_[depth];
    const LocalObject& obj = slots_[slot_idx];

    // Value ordering: visit candidates by partial misfit, so a near-optimal
    // incumbent is recorded almost immediately and the bound then removes
    // the combinatorial bulk. Ties follow landmark id for determinism.
    auto& ranked = scratch_[depth];
    ranked.clear();
    for (int ci : candidates_.at(obj.class_id)) {
      if (used_[static_cast<std::size_t>(ci)]) continue;
      if (out_.expansions >= opts_.max_alignments) {
        out_.status = SearchStatus::BudgetExceeded;
        return;
      }
      ++out_.expansions;
      sums_.push(obj.position, pool_[static_cast<std::size_t>(ci)].position);
      ranked.emplace_back(reverse_sse_lower_bound(sums_), ci);
      sums_.pop(obj.position, pool_[static_cast<std::size_t>(ci)].position);
    }
    std::sort(ranked.begin(), ranked.end(),
              [&](const std::pair<double, int>& a, const std::pair<double, int>& b) {
                if (a.first != b.first) return a.first < b.first;
                return pool_[static_cast<std::size_t>(a.second)].landmark_id <
                       pool_[static_cast<std::size_t>(b.second)].landmark_id;
              });
    for (const auto& [partial_sse, ci] : ranked) {
      if (prunable(partial_sse)) break;  // ascending: the rest fit no better
      used_[static_cast<std::size_t>(ci)] = 1;
      chosen_[slot_idx] = ci;
      sums_.push(obj.position, pool_[static_cast<std::size_t>(ci)].position);
      descend(depth + 1);
      sums_.pop(obj.position, pool_[static_cast<std::size_t>(ci)].position);
      chosen_[slot_idx] = -1;
      used_[static_cast<std::size_t>(ci)] = 0;
      if (out_.status == SearchStatus::BudgetExceeded) return;
    }
  }

  bool prunable(double partial_sse) const {
    if (heap_.size() < opts_.max_hypotheses) return false;
    const double worst = heap_.back().residual_norm;
    return partial_sse > static_cast<double>(slots_.size()) * worst * worst;
  }

  void record() {
    const Eval e = evaluate(sums_);
    if (!e.ok) return;  // no well-defined alignment for this assignment
    RankedHypothesis h;
    h.residual_m = exact_residual_m(e.transform, slots_, pool_, chosen_);
    h.residual_norm = h.residual_m / e.transform.scale;
    h.transform = e.transform;
    h.lm_by_slot.resize(slots_.size());
    for (std::size_t i = 0; i < slots_.size(); ++i)
      h.lm_by_slot[i] = pool_[static_cast<std::size_t>(chosen_[i])].landmark_id;
    // The enumeration revisits seeded assignments; one entry each.
    for (const RankedHypothesis& kept : heap_)
      if (kept.lm_by_slot == h.lm_by_slot) return;
    auto pos = std::lower_bound(heap_.begin(), heap_.end(), h);
    if (heap_.size() >= opts_.max_hypotheses) {
      if (pos == heap_.end()) return;
      heap_.pop_back();
      pos = std::lower_bound(heap_.begin(), heap_.end(), h);
    }
    heap_.insert(pos, std::move(h));
  }

  std::vector<LocalObject> slots_;
  std::vector<PoolEntry> pool_;
  BruteForceOptions opts_;
  std::map<ClassId, std::vector<int>> candidates_;
  std::vector<std::size_t> order_;
  std::vector<char> used_;
  std::vector<int> chosen_;  // pool index per slot index
  CorrSums sums_;
  std::vector<RankedHypothesis> heap_;  // ascending, worst at back
  /// Per-depth (partial SSE, pool index) buffers for value ordering.
  std::vector<std::vector<std::pair<double, int>>> scratch_;
  SearchOutcome out_;
};

std::vector<LocalObject> slots_ascending(const LocalMap& q) {
  std::vector<LocalObject> slots = q.objects;
  std::sort(slots.begin(), slots.end(),
            [](const LocalObject& a, const LocalObject& b) {
              return a.slot < b.slot;
            });
  return slots;
}

std::vector<PoolEntry> full_pool(const ReferenceMap& m) {
  std::vector<PoolEntry> pool;
  pool.reserve(m.landmarks.size());
  for (const auto& lm : m.landmarks)
    pool.push_back({lm.id, lm.class_id, lm.position});
  return pool;
}

void check_query_not_degenerate(const std::vector<LocalObject>& slots) {
  Vec2 mu = Vec2::Zero();
  for (const auto& o : slots) mu += o.position;
  mu /= static_cast<double>(slots.size());
  double var = 0.0, mass = 0.0;
  for (const auto& o : slots) {
    var += (o.position - mu).squaredNorm();
    mass += o.position.squaredNorm();
  }
  // Rounding in the centroid alone leaves var ~ eps² · mass on coincident
  // inputs, so the spread is tested against a relative floor, not zero.
  if (var <= 1e-24 * mass)
    throw DegenerateError("all query objects coincide; alignment undefined");
}

MatchHypothesis to_hypothesis(const RankedHypothesis& r,
                              const std::vector<LocalObject>& slots) {
  MatchHypothesis h;
  h.assignment.reserve(slots.size());
  for (std::size_t i = 0; i < slots.size(); ++i)
    h.assignment.emplace_back(slots[i].slot, r.lm_by_slot[i]);
  h.transform = r.transform;
  h.residual_norm = r.residual_norm;
  h.residual_m = r.residual_m;
  h.pose.position = r.transform.translation;
  h.pose.heading = normalize_angle(r.transform.rotation + std::numbers::pi / 2);
  return h;
}

constexpr double kAmbiguityTolerance = 1e-9;

}  // namespace

const MatchHypothesis& BruteForceResult::best() const {
  if (hypotheses.empty()) throw Error("no hypotheses available");
  return hypotheses.front();
}

BruteForceResult brute_force_localize(const LocalMap& q, const ReferenceMap& m,
                                      const BruteForceOptions& opts) {
  q.validate();
  const auto slots = slots_ascending(q);
  check_query_not_degenerate(slots);
  Search search(slots, full_pool(m), opts);
  if (!search.feasible())
    throw UnmatchableError("query '" + q.query_id +
                           "' has no class-consistent assignment in scene '" +
                           m.scene_id + "'");
  SearchOutcome out = search.run();

  BruteForceResult res;
  res.status = out.status;
  res.expansions = out.expansions;
  res.hypotheses.reserve(out.ranked.size());
  for (const auto& r : out.ranked) res.hypotheses.push_back(to_hypothesis(r, slots));
  res.ambiguous =
      res.hypotheses.size() >= 2 &&
      res.hypotheses[1].residual_norm - res.hypotheses[0].residual_norm <=
          kAmbiguityTolerance;
  return res;
}

namespace {

struct ClassGroup {
  ClassId class_id;
  std::vector<std::size_t> slot_positions;  // into slot-ascending list
  std::vector<int> pool_indices;            // id-ascending candidates
};

/// Saturating count of injective class-consistent assignments.
std::uint64_t assignment_count(const std::vector<ClassGroup>& groups,
                               std::uint64_t cap) {
  std::uint64_t count = 1;
  for (const auto& g : groups) {
    const std::uint64_t n = g.pool_indices.size();
    const std::uint64_t k = g.slot_positions.size();
    for (std::uint64_t i = 0; i < k; ++i) {
      const std::uint64_t factor = n - i;
      if (count > cap / std::max<std::uint64_t>(factor, 1)) return cap + 1;
      count *= factor;
    }
  }
  return count;
}

}  // namespace

double neighbor_similarity(const LocalMap& q, const ReferenceMap& m,
                           int landmark_id, const SimilarityParams& params) {
  q.validate();
  if (params.radius_m <= 0.0)
    throw PreconditionError("neighbor radius must be positive");
  const Vec2 center = m.landmark(landmark_id).position;

  std::vector<PoolEntry> pool;
  for (const auto& lm : m.landmarks)
    if ((lm.position - center).norm() <= params.radius_m)
      pool.push_back({lm.id, lm.class_id, lm.position});

  const auto slots = slots_ascending(q);
  std::map<ClassId, ClassGroup> groups;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    auto& g = groups[slots[i].class_id];
    g.class_id = slots[i].class_id;
    g.slot_positions.push_back(i);
  }
  for (int i = 0; i < static_cast<int>(pool.size()); ++i) {
    auto it = groups.find(pool[static_cast<std::size_t>(i)].class_id);
    if (it != groups.end()) it->second.pool_indices.push_back(i);
  }
  std::vector<ClassGroup> group_list;
  for (auto& [cls, g] : groups) {
    if (g.pool_indices.size() < g.slot_positions.size()) return 0.0;
    std::sort(g.pool_indices.begin(), g.pool_indices.end(), [&](int a, int b) {
      return pool[static_cast<std::size_t>(a)].landmark_id <
             pool[static_cast<std::size_t>(b)].landmark_id;
    });
    group_list.push_back(g);
  }

  double best_rnorm = std::numeric_limits<double>::infinity();
  std::vector<int> best_pool_idx;  // subset behind the best alignment

  const std::uint64_t count = assignment_count(group_list, params.sample_budget);
  if (count <= params.sample_budget) {
    BruteForceOptions opts;
    opts.max_alignments = std::numeric_limits<std::uint64_t>::max();
    opts.max_hypotheses = 1;
    Search search(slots, pool, opts);
    SearchOutcome out = search.run();
    if (!out.ranked.empty()) {
      best_rnorm = out.ranked.front().residual_norm;
      for (int lm_id : out.ranked.front().lm_by_slot)
        for (int i = 0; i < static_cast<int>(pool.size()); ++i)
          if (pool[static_cast<std::size_t>(i)].landmark_id == lm_id)
            best_pool_idx.push_back(i);
    }
  } else {
    // Uniform injective draws per class (partial Fisher-Yates), seeded by
    // (seed, query, landmark) so scheduling cannot shift any draw.
    SeededRng rng(derive_seed(derive_seed(params.seed, q.query_id),
                              static_cast<std::uint64_t>(landmark_id)));
    std::vector<int> chosen(slots.size(), -1);
    for (std::uint64_t draw = 0; draw < params.sample_budget; ++draw) {
      CorrSums sums;
      for (const auto& g : group_list) {
        std::vector<int> cand = g.pool_indices;
        for (std::size_t j = 0; j < g.slot_positions.size(); ++j) {
          const std::size_t pick =
              j + rng.uniform_int(cand.size() - j);
          std::swap(cand[j], cand[pick]);
          chosen[g.slot_positions[j]] = cand[j];
        }
      }
      for (std::size_t i = 0; i < slots.size(); ++i)
        sums.push(slots[i].position,
                  pool[static_cast<std::size_t>(chosen[i])].position);
      const Eval e = evaluate(sums);
      if (!e.ok) continue;
      const double rnorm =
          exact_residual_m(e.transform, slots, pool, chosen) /
          e.transform.scale;
      if (rnorm < best_rnorm) {
        best_rnorm = rnorm;
        best_pool_idx.assign(chosen.begin(), chosen.end());
      }
    }
  }

  if (!std::isfinite(best_rnorm)) return 0.0;
  Vec2 centroid = Vec2::Zero();
  for (int i : best_pool_idx)
    centroid += pool[static_cast<std::size_t>(i)].position;
  centroid /= static_cast<double>(best_pool_idx.size());

  const double min_r = std::clamp(best_rnorm, 0.0, 1.0);
  const double d_sub =
      std::clamp((centroid - center).norm() / params.radius_m, 0.0, 1.0);
  return (1.0 - min_r) * (1.0 - d_sub);
}

double SimilarityField::score_of(int landmark_id) const {
  for (const auto& [id, s] : scores)
    if (id == landmark_id) return s;
  throw IntegrityError("similarity field has no score for landmark " +
                       std::to_string(landmark_id));
}

SimilarityField similarity_field(const LocalMap& q, const ReferenceMap& m,
                                 const SimilarityParams& params) {
  SimilarityField field;
  field.query_id = q.query_id;
  field.scene_id = m.scene_id;
  field.seed = params.seed;
  field.scores.resize(m.landmarks.size());
  parallel_for(m.landmarks.size(), params.threads, [&](std::size_t i) {
    field.scores[i] = {m.landmarks[i].id,
                       neighbor_similarity(q, m, m.landmarks[i].id, params)};
  });
  return field;
}

nlohmann::json similarity_field_to_json(const SimilarityField& f) {
  nlohmann::json j;
  j["query_id"] = f.query_id;
  j["scene_id"] = f.scene_id;
  j["seed"] = f.seed;
  j["scores"] = nlohmann::json::array();
  for (const auto& [id, s] : f.scores)
    j["scores"].push_back({{"landmark_id", id}, {"s", s}});
  return j;
}

SimilarityField similarity_field_from_json(const nlohmann::json& j) {
  SimilarityField f;
  if (!j.is_object() || !j.contains("query_id") || !j.contains("scene_id") ||
      !j.contains("seed") || !j.contains("scores") || !j["scores"].is_array())
    throw ParseError("similarity field: expected keys query_id, scene_id, seed, scores");
  f.query_id = j["query_id"].get<std::string>();
  f.scene_id = j["scene_id"].get<std::string>();
  f.seed = j["seed"].get<std::uint64_t>();
  for (const auto& e : j["scores"]) {
    if (!e.contains("landmark_id") || !e.contains("s"))
      throw ParseError("similarity field: score entry needs landmark_id and s");
    f.scores.emplace_back(e["landmark_id"].get<int>(), e["s"].get<double>());
  }
  return f;
}

std::vector<double> similarity_weights(const std::vector<double>& scores) {
  if (scores.empty())
    throw PreconditionError("similarity_weights: empty score list");
  double sum = 0.0;
  for (double s : scores) {
    if (s < 0.0 || !std::isfinite(s))
      throw PreconditionError("similarity_weights: scores must be finite and >= 0");
    sum += s;
  }
  std::vector<double> w(scores.size());
  if (sum <= 0.0) {
    std::fill(w.begin(), w.end(), 1.0 / static_cast<double>(scores.size()));
  } else {
    for (std::size_t i = 0; i < scores.size(); ++i) w[i] = scores[i] / sum;
  }
  return w;
}

}  // namespace maploc
