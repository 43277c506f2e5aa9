#include "modefusion/trifactor.hpp"

#include "modefusion/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace modefusion {

namespace {

// Uniform draw in (0, 1] from the top 53 bits.
double uniform_open_closed(std::mt19937_64& rng) {
  return static_cast<double>((rng() >> 11) + 1) * 0x1.0p-53;
}

const Matrix& factor_of(const FactorSet& fs, const ConceptId& id) {
  auto it = fs.factors.find(id);
  if (it == fs.factors.end()) throw ValidationError("no factor for concept '" + id + "'");
  return it->second;
}

const Matrix& backbone_of(const FactorSet& fs, const RelationId& id) {
  auto it = fs.backbones.find(id);
  if (it == fs.backbones.end()) throw ValidationError("no backbone for relation '" + id + "'");
  return it->second;
}

Matrix positive_part(const Matrix& x) { return x.cwiseMax(0.0); }
Matrix negative_part(const Matrix& x) { return (-x).cwiseMax(0.0); }

}  // namespace

void SolverConfig::check() const {
  if (max_iterations < 0) throw ValidationError("max_iterations must be >= 0");
  if (!(relative_tolerance > 0.0)) throw ValidationError("relative_tolerance must be > 0");
  if (!(epsilon > 0.0)) throw ValidationError("epsilon must be > 0");
  if (!(extrapolation_max >= 0.0)) throw ValidationError("extrapolation_max must be >= 0");
  if (stall_window < 1) throw ValidationError("stall_window must be >= 1");
}

Matrix pinv_psd(const Matrix& gram) {
  if (gram.size() == 0) return gram;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(gram);
  const Vector& values = eig.eigenvalues();
  const double largest = values.cwiseAbs().maxCoeff();
  const double cutoff =
      largest * static_cast<double>(gram.rows()) * std::numeric_limits<double>::epsilon();
  Vector inverted(values.size());
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    inverted(i) = values(i) > cutoff ? 1.0 / values(i) : 0.0;
  }
  const Matrix& vectors = eig.eigenvectors();
  return vectors * inverted.asDiagonal() * vectors.transpose();
}

FactorSet initialize(const RelationGraph& graph, const RankAssignment& ranks, std::uint64_t seed) {
  graph.check_ranks(ranks);
  std::mt19937_64 rng(seed);
  FactorSet fs;
  for (const auto& c : graph.concepts()) {
    const auto n = static_cast<Eigen::Index>(c.cardinality());
    const Eigen::Index k = ranks.at(c.id);
    Matrix g(n, k);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < k; ++j) g(i, j) = uniform_open_closed(rng);
    }
    fs.factors.emplace(c.id, std::move(g));
  }
  return update_backbones(graph, std::move(fs));
}

FactorSet update_backbones(const RelationGraph& graph, FactorSet fs) {
  std::map<ConceptId, Matrix> gram_pinv;
  for (const auto& [id, g] : fs.factors) gram_pinv.emplace(id, pinv_psd(g.transpose() * g));
  for (const auto& r : graph.relations()) {
    const Matrix& gi = factor_of(fs, r.source);
    const Matrix& gj = factor_of(fs, r.target);
    fs.backbones[r.id] =
        gram_pinv.at(r.source) * (gi.transpose() * r.values * gj) * gram_pinv.at(r.target);
  }
  return fs;
}

FactorSet update_factors(const RelationGraph& graph, FactorSet fs, double epsilon) {
  std::map<ConceptId, Matrix> gram;
  std::map<ConceptId, Matrix> enabler;
  std::map<ConceptId, Matrix> suppressor;
  for (const auto& [id, g] : fs.factors) {
    gram.emplace(id, g.transpose() * g);
    enabler.emplace(id, Matrix::Zero(g.rows(), g.cols()));
    suppressor.emplace(id, Matrix::Zero(g.rows(), g.cols()));
  }

  for (const auto& r : graph.relations()) {
    const Matrix& gi = factor_of(fs, r.source);
    const Matrix& gj = factor_of(fs, r.target);
    const Matrix& s = backbone_of(fs, r.id);

    // Source role.
    const Matrix data_i = r.values * (gj * s.transpose());
    const Matrix model_i = s * gram.at(r.target) * s.transpose();
    enabler.at(r.source) += positive_part(data_i) + gi * negative_part(model_i);
    suppressor.at(r.source) += negative_part(data_i) + gi * positive_part(model_i);

    // Target role.
    const Matrix data_j = r.values.transpose() * (gi * s);
    const Matrix model_j = s.transpose() * gram.at(r.source) * s;
    enabler.at(r.target) += positive_part(data_j) + gj * negative_part(model_j);
    suppressor.at(r.target) += negative_part(data_j) + gj * positive_part(model_j);
  }

  for (auto& [id, g] : fs.factors) {
    const Matrix& num = enabler.at(id);
    const Matrix& den = suppressor.at(id);
    for (Eigen::Index j = 0; j < g.cols(); ++j) {
      for (Eigen::Index i = 0; i < g.rows(); ++i) {
        // A concept entry with no signal either way keeps its value.
        if (num(i, j) == 0.0 && den(i, j) == 0.0) continue;
        g(i, j) *= std::sqrt(num(i, j) / (den(i, j) + epsilon));
      }
    }
  }
  return fs;
}

Matrix reconstruct(const RelationGraph& graph, const FactorSet& fs, const RelationId& id) {
  const Relation& r = graph.relation_at(id);
  return factor_of(fs, r.source) * backbone_of(fs, r.id) * factor_of(fs, r.target).transpose();
}

double relation_error(const Matrix& m, const Matrix& m_hat) {
  if (m.rows() != m_hat.rows() || m.cols() != m_hat.cols()) {
    throw ValidationError("relation_error: shape mismatch");
  }
  const double norm = m.norm();
  if (norm == 0.0) throw DomainError("relation_error: ||M|| = 0");
  return (m - m_hat).norm() / norm;
}

double objective(const RelationGraph& graph, const FactorSet& fs) {
  double total = 0.0;
  for (const auto& r : graph.relations()) total += (r.values - reconstruct(graph, fs, r.id)).norm();
  return total;
}

FitResult fit(const RelationGraph& graph, const RankAssignment& ranks, const SolverConfig& config) {
  config.check();
  FitResult out;
  out.factors = initialize(graph, ranks, config.seed);
  out.report.seed = config.seed;

  auto& trace = out.report.objective_trace;
  trace.push_back(objective(graph, out.factors));
  const auto window = static_cast<std::size_t>(config.stall_window);
  double beta = std::min(0.5, config.extrapolation_max);
  for (int it = 0; it < config.max_iterations; ++it) {
    FactorSet next = update_backbones(graph, update_factors(graph, out.factors, config.epsilon));
    double current = objective(graph, next);
    if (beta > 0.0) {
      // G_new o (G_new / G_old)^beta, i.e. a longer multiplicative step.
      FactorSet trial = next;
      for (auto& [id, g] : trial.factors) {
        const Matrix& old = out.factors.factors.at(id);
        for (Eigen::Index i = 0; i < g.size(); ++i) {
          const double a = old.data()[i];
          const double b = g.data()[i];
          if (a > 0.0 && b > 0.0) g.data()[i] = b * std::pow(b / a, beta);
        }
      }
      trial = update_backbones(graph, std::move(trial));
      const double extrapolated = objective(graph, trial);
      if (extrapolated < current) {
        next = std::move(trial);
        current = extrapolated;
        beta = std::min(config.extrapolation_max, beta * 1.2);
      } else {
        beta = std::max(std::min(0.05, config.extrapolation_max), beta / 2.0);
      }
    }
    out.factors = std::move(next);
    trace.push_back(current);
    out.report.iterations_run = it + 1;
    bool settled = current == 0.0;
    if (!settled && trace.size() > window) {
      const double reference = trace[trace.size() - 1 - window];
      settled = std::abs(reference - current) < config.relative_tolerance * std::abs(reference);
    }
    if (settled) {
      out.report.converged = true;
      break;
    }
  }

  for (const auto& r : graph.relations()) {
    const Matrix m_hat = reconstruct(graph, out.factors, r.id);
    const double norm = r.values.norm();
    // An all-zero relation reports its absolute residual instead of a ratio.
    out.report.per_relation_error[r.id] = norm > 0.0 ? relation_error(r.values, m_hat)
                                                     : m_hat.norm();
  }
  return out;
}

}  // namespace modefusion
