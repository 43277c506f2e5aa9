#pragma once

// Collective non-negative matrix tri-factorization.
//
// Every relation M_ij between concepts i and j is approximated as
//
//     M_ij ~ G_i * S_ij * G_j^T
//
// with one non-negative factor G per concept, shared across all of its
// relations, and one sign-free backbone S per relation. The solver alternates
// exact least-squares backbone solves with positive/negative-part
// multiplicative factor updates:
//
//     S_ij = pinv(G_i^T G_i) G_i^T M_ij G_j pinv(G_j^T G_j)
//     G_i <- G_i o sqrt(enabler_i / (suppressor_i + eps))
//
// where, for each relation with i as source,
//     enabler    += [M G_j S^T]+ + G_i [S G_j^T G_j S^T]-
//     suppressor += [M G_j S^T]- + G_i [S G_j^T G_j S^T]+
// and relations with i as target contribute the transposed-role terms.

#include "modefusion/relation_graph.hpp"

#include <cstdint>
#include <map>
#include <vector>

namespace modefusion {

struct SolverConfig {
  int max_iterations = 2000;
  double relative_tolerance = 1e-5;
  std::uint64_t seed = 0;
  double epsilon = 1e-12;
  /// Largest exponent of the log-space extrapolation tried after each
  /// update; 0 disables it. A trial point is kept only when it lowers the
  /// objective.
  double extrapolation_max = 3.0;
  /// Converged when the objective moved by less than relative_tolerance over
  /// this many iterations.
  int stall_window = 20;

  void check() const;
};

struct FactorSet {
  std::map<ConceptId, Matrix> factors;    // |concept| x k, entries >= 0
  std::map<RelationId, Matrix> backbones;  // k_source x k_target, any sign
};

struct FitReport {
  std::map<RelationId, double> per_relation_error;
  std::vector<double> objective_trace;
  int iterations_run = 0;
  bool converged = false;
  std::uint64_t seed = 0;

  bool operator==(const FitReport&) const = default;
};

struct FitResult {
  FactorSet factors;
  FitReport report;
};

/// Uniform (0, 1] factors drawn in concept order from a seeded 64-bit
/// Mersenne twister, followed by an exact backbone solve.
FactorSet initialize(const RelationGraph& graph, const RankAssignment& ranks, std::uint64_t seed);

/// Least-squares optimal S for every relation given the current factors.
FactorSet update_backbones(const RelationGraph& graph, FactorSet factors);

/// One simultaneous multiplicative update of every G from the current S.
FactorSet update_factors(const RelationGraph& graph, FactorSet factors, double epsilon = 1e-12);

FitResult fit(const RelationGraph& graph, const RankAssignment& ranks, const SolverConfig& config);

/// G_source * S * G_target^T for one relation.
Matrix reconstruct(const RelationGraph& graph, const FactorSet& factors, const RelationId& id);

/// ||M - M_hat||_F / ||M||_F. Throws DomainError when ||M|| = 0.
double relation_error(const Matrix& m, const Matrix& m_hat);

/// Sum over relations of the unsquared Frobenius residual.
double objective(const RelationGraph& graph, const FactorSet& factors);

/// Moore-Penrose pseudo-inverse of a symmetric positive semi-definite matrix.
Matrix pinv_psd(const Matrix& gram);

}  // namespace modefusion
