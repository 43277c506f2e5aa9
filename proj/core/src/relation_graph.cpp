#include "modefusion/relation_graph.hpp"

#include "modefusion/errors.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

namespace modefusion {

std::optional<std::size_t> Concept::index_of(const std::string& label) const {
  auto it = std::find(labels.begin(), labels.end(), label);
  if (it == labels.end()) return std::nullopt;
  return static_cast<std::size_t>(it - labels.begin());
}

std::optional<int> RankAssignment::find(const ConceptId& concept_id) const {
  auto it = ranks_.find(concept_id);
  if (it == ranks_.end()) return std::nullopt;
  return it->second;
}

int RankAssignment::at(const ConceptId& concept_id) const {
  auto it = ranks_.find(concept_id);
  if (it == ranks_.end()) throw ValidationError("no rank for concept '" + concept_id + "'");
  return it->second;
}

int rank_heuristic(std::size_t cardinality) {
  if (cardinality == 0) throw ValidationError("rank_heuristic: cardinality must be >= 1");
  const double raw = 2.0 * std::sqrt(static_cast<double>(cardinality)) - 1.0;
  const auto k = static_cast<long long>(std::floor(raw));
  return static_cast<int>(std::clamp<long long>(k, 1, static_cast<long long>(cardinality)));
}

ConceptId RelationGraph::add_concept(std::string name, std::vector<std::string> labels) {
  if (name.empty()) throw ValidationError("concept name must not be empty");
  if (labels.empty()) throw ValidationError("concept '" + name + "': label list is empty");
  if (concept_index_.count(name) != 0) throw ValidationError("duplicate concept '" + name + "'");
  std::vector<std::string> sorted = labels;
  std::sort(sorted.begin(), sorted.end());
  if (auto dup = std::adjacent_find(sorted.begin(), sorted.end()); dup != sorted.end()) {
    throw ValidationError("concept '" + name + "': duplicate label '" + *dup + "'");
  }
  concept_index_.emplace(name, concepts_.size());
  concepts_.push_back(Concept{name, std::move(labels)});
  return name;
}

RelationId RelationGraph::add_relation(RelationId id, const ConceptId& source,
                                       const ConceptId& target, Matrix values,
                                       std::string provenance) {
  const Concept* src = find_concept(source);
  const Concept* tgt = find_concept(target);
  if (src == nullptr || tgt == nullptr) {
    throw ValidationError("relation '" + id + "': unknown concept '" +
                          (src == nullptr ? source : target) + "'");
  }
  if (relation_index_.count(id) != 0) throw ValidationError("duplicate relation id '" + id + "'");
  if (values.rows() != static_cast<Eigen::Index>(src->cardinality()) ||
      values.cols() != static_cast<Eigen::Index>(tgt->cardinality())) {
    throw ValidationError("relation '" + id + "': shape " + std::to_string(values.rows()) + "x" +
                          std::to_string(values.cols()) + " does not match " + source + "(" +
                          std::to_string(src->cardinality()) + ") x " + target + "(" +
                          std::to_string(tgt->cardinality()) + ")");
  }
  if (!values.allFinite()) throw ValidationError("relation '" + id + "': non-finite entry");
  if (values.size() > 0 && values.minCoeff() < 0.0) {
    throw ValidationError("relation '" + id + "': negative entry");
  }
  for (const auto& r : relations_) {
    if (r.source == source && r.target == target) {
      throw ValidationError("relation '" + id + "': pair (" + source + ", " + target +
                            ") already stored as '" + r.id + "'");
    }
  }
  relation_index_.emplace(id, relations_.size());
  relations_.push_back(Relation{id, source, target, std::move(values), std::move(provenance)});
  return id;
}

RelationId RelationGraph::add_labeled_relation(RelationId id, const ConceptId& source,
                                               const ConceptId& target,
                                               const LabeledMatrix& matrix,
                                               std::string provenance) {
  matrix.check_shape();
  LabeledMatrix aligned = matrix;
  if (const Concept* c = find_concept(source)) {
    aligned = aligned.with_row_order(c->labels);
  } else {
    add_concept(source, matrix.row_labels);
  }
  if (const Concept* c = find_concept(target)) {
    aligned = aligned.with_col_order(c->labels);
  } else {
    add_concept(target, matrix.col_labels);
  }
  return add_relation(std::move(id), source, target, std::move(aligned.values),
                      std::move(provenance));
}

void RelationGraph::remove_concept(const ConceptId& id) {
  auto it = concept_index_.find(id);
  if (it == concept_index_.end()) return;
  concepts_.erase(concepts_.begin() + static_cast<std::ptrdiff_t>(it->second));
  concept_index_.clear();
  for (std::size_t i = 0; i < concepts_.size(); ++i) concept_index_.emplace(concepts_[i].id, i);
}

const Concept* RelationGraph::find_concept(const ConceptId& id) const {
  auto it = concept_index_.find(id);
  return it == concept_index_.end() ? nullptr : &concepts_[it->second];
}

const Concept& RelationGraph::concept_at(const ConceptId& id) const {
  if (const Concept* c = find_concept(id)) return *c;
  throw ValidationError("unknown concept '" + id + "'");
}

const Relation* RelationGraph::find_relation(const RelationId& id) const {
  auto it = relation_index_.find(id);
  return it == relation_index_.end() ? nullptr : &relations_[it->second];
}

const Relation& RelationGraph::relation_at(const RelationId& id) const {
  if (const Relation* r = find_relation(id)) return *r;
  throw ValidationError("unknown relation '" + id + "'");
}

std::vector<std::string> RelationGraph::validate() const {
  std::vector<std::string> violations;
  for (const auto& r : relations_) {
    const Concept* src = find_concept(r.source);
    const Concept* tgt = find_concept(r.target);
    if (src == nullptr) violations.push_back(r.id + ": missing source concept '" + r.source + "'");
    if (tgt == nullptr) violations.push_back(r.id + ": missing target concept '" + r.target + "'");
    if (src != nullptr && tgt != nullptr &&
        (r.values.rows() != static_cast<Eigen::Index>(src->cardinality()) ||
         r.values.cols() != static_cast<Eigen::Index>(tgt->cardinality()))) {
      violations.push_back(r.id + ": shape mismatch");
    }
  }
  if (!target_relation_) {
    violations.emplace_back("no target relation");
    return violations;
  }
  const Relation* target = find_relation(*target_relation_);
  if (target == nullptr) {
    violations.push_back("target relation '" + *target_relation_ + "' not in graph");
    return violations;
  }
  if (find_concept(target->source) == nullptr) return violations;

  std::set<ConceptId> reached{target->source};
  std::queue<ConceptId> frontier;
  frontier.push(target->source);
  while (!frontier.empty()) {
    const ConceptId here = frontier.front();
    frontier.pop();
    for (const auto& r : relations_) {
      for (const auto& [from, to] : {std::pair{r.source, r.target}, std::pair{r.target, r.source}}) {
        if (from == here && find_concept(to) != nullptr && reached.insert(to).second) {
          frontier.push(to);
        }
      }
    }
  }
  for (const auto& c : concepts_) {
    if (reached.count(c.id) == 0) {
      violations.push_back("concept '" + c.id + "' not connected to target relation '" +
                           *target_relation_ + "'");
    }
  }
  return violations;
}

RelationGraph RelationGraph::without_relations(const std::set<RelationId>& dropped) const {
  RelationGraph out;
  std::set<ConceptId> used;
  for (const auto& r : relations_) {
    if (dropped.count(r.id) != 0) continue;
    used.insert(r.source);
    used.insert(r.target);
  }
  for (const auto& c : concepts_) {
    if (used.count(c.id) != 0) out.add_concept(c.id, c.labels);
  }
  for (const auto& r : relations_) {
    if (dropped.count(r.id) == 0) out.add_relation(r.id, r.source, r.target, r.values, r.provenance);
  }
  if (target_relation_ && dropped.count(*target_relation_) == 0) {
    out.set_target_relation(*target_relation_);
  }
  return out;
}

bool RelationGraph::equivalent_to(const RelationGraph& other) const {
  if (relations_.size() != other.relations_.size() || concepts_.size() != other.concepts_.size()) {
    return false;
  }
  for (const auto& r : relations_) {
    const Relation* match = nullptr;
    for (const auto& o : other.relations_) {
      if (o.source == r.source && o.target == r.target) match = &o;
    }
    if (match == nullptr) return false;
    const Concept* src = other.find_concept(r.source);
    const Concept* tgt = other.find_concept(r.target);
    if (src == nullptr || tgt == nullptr) return false;
    try {
      const LabeledMatrix aligned =
          labeled(r.id).with_row_order(src->labels).with_col_order(tgt->labels);
      if (aligned.values != match->values) return false;
    } catch (const ValidationError&) {
      return false;
    }
  }
  return true;
}

RankAssignment RelationGraph::heuristic_ranks() const {
  RankAssignment ranks;
  for (const auto& c : concepts_) ranks.set(c.id, rank_heuristic(c.cardinality()));
  return ranks;
}

void RelationGraph::check_ranks(const RankAssignment& ranks) const {
  for (const auto& c : concepts_) {
    const auto k = ranks.find(c.id);
    if (!k) throw ValidationError("no rank for concept '" + c.id + "'");
    if (*k < 1 || static_cast<std::size_t>(*k) > c.cardinality()) {
      throw ValidationError("rank " + std::to_string(*k) + " for concept '" + c.id +
                            "' outside [1, " + std::to_string(c.cardinality()) + "]");
    }
  }
}

LabeledMatrix RelationGraph::labeled(const RelationId& id) const {
  const Relation& r = relation_at(id);
  return LabeledMatrix{r.source, r.target, concept_at(r.source).labels,
                       concept_at(r.target).labels, r.values};
}

}  // namespace modefusion
