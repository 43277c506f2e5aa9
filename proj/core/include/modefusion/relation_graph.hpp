#pragma once

#include "modefusion/labeled_matrix.hpp"

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

namespace modefusion {

/// Concepts are identified by their unique name ("municipality", "mode", ...).
using ConceptId = std::string;
/// Relations carry free-form ids; the R01..R14 naming is the convention.
using RelationId = std::string;

struct Concept {
  ConceptId id;
  std::vector<std::string> labels;

  [[nodiscard]] std::size_t cardinality() const { return labels.size(); }
  [[nodiscard]] std::optional<std::size_t> index_of(const std::string& label) const;
};

struct Relation {
  RelationId id;
  ConceptId source;
  ConceptId target;
  Matrix values;  // |source| x |target|
  std::string provenance;
};

/// Latent dimension per concept.
class RankAssignment {
 public:
  RankAssignment() = default;

  /// Sets k for a concept; 1 <= k <= cardinality is enforced by `check`.
  void set(const ConceptId& concept_id, int rank) { ranks_[concept_id] = rank; }
  [[nodiscard]] std::optional<int> find(const ConceptId& concept_id) const;
  [[nodiscard]] int at(const ConceptId& concept_id) const;
  [[nodiscard]] const std::map<ConceptId, int>& entries() const { return ranks_; }

 private:
  std::map<ConceptId, int> ranks_;
};

/// floor(2*sqrt(cardinality) - 1), clamped to [1, cardinality].
int rank_heuristic(std::size_t cardinality);

/// The unified representation: concepts plus at most one relation per ordered
/// concept pair. Mutable while it is being built; relation values are never
/// modified after insertion.
class RelationGraph {
 public:
  RelationGraph() = default;

  ConceptId add_concept(std::string name, std::vector<std::string> labels);

  /// Stores `values` as relation `id` from `source` to `target`. Throws
  /// ValidationError on unknown concepts, shape mismatch, negative or
  /// non-finite entries, a duplicate (source, target) pair, or a duplicate id.
  RelationId add_relation(RelationId id, const ConceptId& source, const ConceptId& target,
                          Matrix values, std::string provenance = "derived");

  /// Adds a labeled matrix, registering unknown concepts from its labels and
  /// aligning rows/columns by label to concepts that already exist.
  RelationId add_labeled_relation(RelationId id, const ConceptId& source, const ConceptId& target,
                                  const LabeledMatrix& matrix, std::string provenance);

  /// Removes a concept without touching relations; `validate` reports any
  /// relation left dangling.
  void remove_concept(const ConceptId& id);

  void set_target_relation(RelationId id) { target_relation_ = std::move(id); }
  [[nodiscard]] const std::optional<RelationId>& target_relation() const { return target_relation_; }

  [[nodiscard]] const std::vector<Concept>& concepts() const { return concepts_; }
  [[nodiscard]] const std::vector<Relation>& relations() const { return relations_; }
  [[nodiscard]] const Concept* find_concept(const ConceptId& id) const;
  [[nodiscard]] const Concept& concept_at(const ConceptId& id) const;
  [[nodiscard]] const Relation* find_relation(const RelationId& id) const;
  [[nodiscard]] const Relation& relation_at(const RelationId& id) const;

  /// Human-readable violations; empty iff all relation endpoints exist,
  /// shapes match, a target relation is designated and present, and every
  /// concept is reachable from the target relation's source concept.
  [[nodiscard]] std::vector<std::string> validate() const;

  /// Copy with the listed relations removed. Concepts no longer touched by
  /// any relation are dropped too.
  [[nodiscard]] RelationGraph without_relations(const std::set<RelationId>& dropped) const;

  /// Same set of (source, target, values) under label alignment, regardless of
  /// insertion order.
  [[nodiscard]] bool equivalent_to(const RelationGraph& other) const;

  /// Heuristic rank for every concept.
  [[nodiscard]] RankAssignment heuristic_ranks() const;

  /// Throws ValidationError unless every concept has 1 <= k <= cardinality.
  void check_ranks(const RankAssignment& ranks) const;

  [[nodiscard]] LabeledMatrix labeled(const RelationId& id) const;

 private:
  std::vector<Concept> concepts_;
  std::vector<Relation> relations_;
  std::unordered_map<ConceptId, std::size_t> concept_index_;
  std::unordered_map<RelationId, std::size_t> relation_index_;
  std::optional<RelationId> target_relation_;
};

}  // namespace modefusion
