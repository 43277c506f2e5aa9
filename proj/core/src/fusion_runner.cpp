#include "modefusion/fusion_runner.hpp"

#include "modefusion/errors.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <thread>

namespace modefusion {

DataConfiguration parse_data_configuration(std::string_view text) {
  std::string key;
  for (char c : text) {
    key.push_back(c == '_' ? '-' : static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  if (key == "all") return DataConfiguration::All;
  if (key == "no-dpi") return DataConfiguration::NoDpi;
  if (key == "no-mobile") return DataConfiguration::NoMobile;
  throw ValidationError("unknown data configuration '" + std::string(text) + "'");
}

std::string to_string(DataConfiguration config) {
  switch (config) {
    case DataConfiguration::All: return "all";
    case DataConfiguration::NoDpi: return "no-dpi";
    case DataConfiguration::NoMobile: return "no-mobile";
  }
  return "all";
}

std::set<RelationId> dropped_relations(DataConfiguration config) {
  switch (config) {
    case DataConfiguration::All: return {};
    case DataConfiguration::NoDpi: return {"R09", "R13"};
    case DataConfiguration::NoMobile: return {"R05", "R07", "R08", "R09", "R10", "R13"};
  }
  return {};
}

RelationGraph apply_configuration(const RelationGraph& graph, DataConfiguration config) {
  RelationGraph out = graph.without_relations(dropped_relations(config));
  if (out.relations().empty()) {
    throw ValidationError("no relations left under configuration '" + to_string(config) + "'");
  }
  return out;
}

void RunConfig::check() const {
  if (n_instances < 1) throw ValidationError("n_instances must be >= 1");
  solver.check();
}

double global_error(const FitReport& report, const RelationId& excluded) {
  double log_sum = 0.0;
  std::size_t count = 0;
  for (const auto& [id, error] : report.per_relation_error) {
    if (id == excluded) continue;
    log_sum += std::log(std::max(error, 1e-15));
    ++count;
  }
  if (count == 0) throw ValidationError("global_error: no relations besides '" + excluded + "'");
  return std::exp(log_sum / static_cast<double>(count));
}

UpdatedSplit updated_mode_split(const RelationGraph& graph, const FactorSet& factors,
                                const RelationId& target) {
  const Relation* r = graph.find_relation(target);
  if (r == nullptr) throw ValidationError("missing target relation '" + target + "'");
  const Matrix raw = reconstruct(graph, factors, target);
  const Concept& municipality = graph.concept_at(r->source);
  const Concept& mode = graph.concept_at(r->target);
  LabeledMatrix labeled{r->source, r->target, municipality.labels, mode.labels, raw};
  UpdatedSplit out;
  out.unclamped = ModeSplit::from_labeled(labeled);
  out.clamped_cells = static_cast<std::size_t>((raw.array() < 0.0).count());
  out.split = out.unclamped;
  out.split.counts = out.split.counts.cwiseMax(0.0);
  return out;
}

std::vector<InstanceResult> run_instances(const RelationGraph& graph, const RankAssignment& ranks,
                                          const RunConfig& config, const RelationId& target) {
  config.check();
  if (graph.relations().empty()) throw ValidationError("run_instances: empty graph");
  graph.check_ranks(ranks);

  const auto n = static_cast<std::size_t>(config.n_instances);
  std::vector<InstanceResult> results(n);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        SolverConfig solver = config.solver;
        solver.seed = config.base_seed + i;
        FitResult fitted = fit(graph, ranks, solver);
        InstanceResult& out = results[i];
        out.seed = solver.seed;
        out.global_error = global_error(fitted.report, target);
        out.updated = updated_mode_split(graph, fitted.factors, target);
        out.report = std::move(fitted.report);
        out.factors = std::move(fitted.factors);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };

  unsigned threads = config.threads != 0 ? config.threads : std::thread::hardware_concurrency();
  threads = std::clamp<unsigned>(threads, 1u, static_cast<unsigned>(n));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
  return results;
}

const InstanceResult& select_best(const std::vector<InstanceResult>& results) {
  if (results.empty()) throw ValidationError("select_best: no instances");
  const InstanceResult* best = &results.front();
  for (const auto& r : results) {
    if (r.global_error < best->global_error ||
        (r.global_error == best->global_error && r.seed < best->seed)) {
      best = &r;
    }
  }
  return *best;
}

ModeShares mode_shares(const ModeSplit& split) {
  const Matrix& c = split.counts;
  const Vector row_sums = c.rowwise().sum();
  if (c.rows() == 0 || !((row_sums.array() > 0.0).any())) {
    throw DomainError("mode_shares: split has no positive row");
  }
  ModeShares out;
  const double total = c.sum();
  for (Eigen::Index j = 0; j < c.cols(); ++j) out.citywide.push_back(c.col(j).sum() / total);
  out.per_municipality = Matrix::Constant(c.rows(), c.cols(), std::numeric_limits<double>::quiet_NaN());
  for (Eigen::Index i = 0; i < c.rows(); ++i) {
    const bool ok = row_sums(i) > 0.0;
    out.defined.push_back(ok);
    if (ok) out.per_municipality.row(i) = c.row(i) / row_sums(i);
  }
  return out;
}

double pearson(const Vector& x, const Vector& y) {
  if (x.size() != y.size()) throw DomainError("pearson: length mismatch");
  if (x.size() < 3) throw DomainError("pearson: need at least 3 observations");
  const double n = static_cast<double>(x.size());
  const Vector dx = x.array() - x.sum() / n;
  const Vector dy = y.array() - y.sum() / n;
  const double sxx = dx.squaredNorm() / n;
  const double syy = dy.squaredNorm() / n;
  if (sxx == 0.0 || syy == 0.0) throw DomainError("pearson: constant vector");
  const double r = dx.dot(dy) / n / std::sqrt(sxx * syy);
  return std::clamp(r, -1.0, 1.0);
}

double pearson_pvalue(double r, std::size_t n) {
  if (n < 3) throw DomainError("pearson_pvalue: need n >= 3");
  if (!(std::abs(r) <= 1.0)) throw DomainError("pearson_pvalue: |r| > 1");
  if (std::abs(r) == 1.0) return 0.0;
  const double dof = static_cast<double>(n - 2);
  const double t = std::abs(r) * std::sqrt(dof / (1.0 - r * r));
  boost::math::students_t dist(dof);
  return std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, t)));
}

double bonferroni(double p, std::size_t comparisons) {
  return std::min(1.0, p * static_cast<double>(comparisons));
}

MacroTotals macro_totals(const ModeSplit& split, const std::map<std::string, std::string>& mapping,
                         Mode mode) {
  MacroTotals out;
  for (const auto& [_, area] : mapping) out.per_area.emplace(area, 0.0);
  for (std::size_t i = 0; i < split.municipalities.size(); ++i) {
    auto it = mapping.find(split.municipalities[i]);
    if (it == mapping.end()) {
      throw ValidationError("municipality '" + split.municipalities[i] + "' has no macro-area");
    }
    const double v = split.at(i, mode);
    out.per_area[it->second] += v;
    out.total += v;
  }
  return out;
}

std::vector<ModeComparison> compare_configurations(const ModeSplit& a, const ModeSplit& b) {
  const ModeSplit b_aligned = b.aligned_to(a.municipalities);
  std::vector<ModeComparison> out;
  for (std::size_t m = 0; m < kModeLabels.size(); ++m) {
    ModeComparison cmp{std::string(kModeLabels[m]), std::nullopt, std::nullopt};
    try {
      const auto mode = static_cast<Mode>(m);
      const double r = pearson(a.column(mode), b_aligned.column(mode));
      cmp.r = r;
      cmp.p_corrected = bonferroni(pearson_pvalue(r, a.municipalities.size()), kModeLabels.size());
    } catch (const DomainError&) {
      // constant column: the mode stays undefined
    }
    out.push_back(std::move(cmp));
  }
  return out;
}

}  // namespace modefusion
