#include "maploc/types.hpp"

#include <set>

namespace maploc {

ClassId ClassRegistry::add(const std::string& name) {
  if (name.empty()) throw PreconditionError("class name must be nonempty");
  if (auto it = by_name_.find(name); it != by_name_.end()) return it->second;
  if (classes_.size() >= kMaxClasses)
    throw PreconditionError("class registry is full (max " +
                            std::to_string(kMaxClasses) + " classes)");
  const ClassId id = static_cast<ClassId>(classes_.size());
  classes_.push_back({id, name});
  by_name_.emplace(name, id);
  return id;
}

ClassId ClassRegistry::id_of(const std::string& name) const {
  auto it = by_name_.find(name);
  if (it == by_name_.end())
    throw PreconditionError("unknown class name: " + name);
  return it->second;
}

bool ClassRegistry::contains(const std::string& name) const {
  return by_name_.count(name) != 0;
}

const SemanticClass& ClassRegistry::at(ClassId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= classes_.size())
    throw PreconditionError("class id out of range: " + std::to_string(id));
  return classes_[static_cast<std::size_t>(id)];
}

const ObjectLandmark* ReferenceMap::find(int landmark_id) const {
  for (const auto& lm : landmarks)
    if (lm.id == landmark_id) return &lm;
  return nullptr;
}

const ObjectLandmark& ReferenceMap::landmark(int landmark_id) const {
  if (const ObjectLandmark* lm = find(landmark_id)) return *lm;
  throw IntegrityError("scene " + scene_id + " has no landmark " +
                       std::to_string(landmark_id));
}

void ReferenceMap::validate() const {
  if (landmarks.empty())
    throw IntegrityError("reference map " + scene_id + " has no landmarks");
  std::set<int> ids;
  for (const auto& lm : landmarks) {
    if (!lm.position.allFinite())
      throw IntegrityError("landmark " + std::to_string(lm.id) + " in " +
                           scene_id + " has non-finite position");
    if (!ids.insert(lm.id).second)
      throw IntegrityError("duplicate landmark id " + std::to_string(lm.id) +
                           " in " + scene_id);
  }
  if (anchor && (anchor->m_per_deg_lat <= 0.0 || anchor->m_per_deg_lon <= 0.0))
    throw IntegrityError("anchor scale factors must be positive in " +
                         scene_id);
}

void LocalMap::validate() const {
  if (objects.size() < 3)
    throw PreconditionError("local map " + query_id +
                            " has fewer than 3 objects");
  std::set<int> slots;
  for (const auto& obj : objects) {
    if (!obj.position.allFinite())
      throw IntegrityError("object slot " + std::to_string(obj.slot) + " in " +
                           query_id + " has non-finite position");
    if (!slots.insert(obj.slot).second)
      throw IntegrityError("duplicate slot " + std::to_string(obj.slot) +
                           " in " + query_id);
  }
  if (gt_matches) {
    std::set<int> lms;
    for (const auto& [slot, lm] : *gt_matches) {
      if (!slots.count(slot))
        throw IntegrityError("gt match references unknown slot " +
                             std::to_string(slot) + " in " + query_id);
      if (!lms.insert(lm).second)
        throw IntegrityError("gt match reuses landmark " + std::to_string(lm) +
                             " in " + query_id);
    }
  }
}

const char* to_string(SplitKind k) {
  return k == SplitKind::Easy ? "easy" : "all";
}

const char* to_string(Partition p) {
  switch (p) {
    case Partition::Train: return "train";
    case Partition::Val: return "val";
    case Partition::Test: return "test";
  }
  return "?";
}

const char* to_string(LocalMapSource s) {
  return s == LocalMapSource::GroundTruthBased ? "gt" : "estimated";
}

}  // namespace maploc
