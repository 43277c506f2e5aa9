#pragma once

#include "modefusion/mode_split.hpp"
#include "modefusion/relation_graph.hpp"
#include "modefusion/trifactor.hpp"

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace modefusion {

inline const RelationId kTargetRelation = "R01";

enum class DataConfiguration { All, NoDpi, NoMobile };

/// "all", "no-dpi", "no-mobile" (case-insensitive; '_' accepted for '-').
DataConfiguration parse_data_configuration(std::string_view text);
std::string to_string(DataConfiguration config);

/// Relations dropped by a configuration: NO_DPI drops R09 and R13; NO_MOBILE
/// additionally drops R05, R07, R08 and R10.
std::set<RelationId> dropped_relations(DataConfiguration config);

/// The graph restricted to a configuration, orphaned concepts removed. Throws
/// ValidationError when nothing remains.
RelationGraph apply_configuration(const RelationGraph& graph, DataConfiguration config);

struct RunConfig {
  int n_instances = 100;
  DataConfiguration data_configuration = DataConfiguration::All;
  std::uint64_t base_seed = 0;
  SolverConfig solver;
  /// Worker threads; 0 uses the hardware concurrency.
  unsigned threads = 0;

  void check() const;
};

struct UpdatedSplit {
  ModeSplit split;            // negatives clamped to 0
  ModeSplit unclamped;
  std::size_t clamped_cells = 0;
};

struct InstanceResult {
  std::uint64_t seed = 0;
  FitReport report;
  double global_error = 0.0;
  UpdatedSplit updated;
  FactorSet factors;
};

/// Fits n_instances models on `graph` (already filtered for the configuration)
/// with seeds base_seed + i. Instances run concurrently; results are ordered
/// by seed and do not depend on the thread count.
std::vector<InstanceResult> run_instances(const RelationGraph& graph, const RankAssignment& ranks,
                                          const RunConfig& config,
                                          const RelationId& target = kTargetRelation);

/// Geometric mean of the per-relation normalized errors, `excluded` left out;
/// zeros are floored at 1e-15. Throws ValidationError with nothing to average.
double global_error(const FitReport& report, const RelationId& excluded = kTargetRelation);

/// Minimal global error, ties to the smallest seed. Throws on empty input.
const InstanceResult& select_best(const std::vector<InstanceResult>& results);

/// G_municipality * S_target * G_mode^T with negative cells clamped to 0.
UpdatedSplit updated_mode_split(const RelationGraph& graph, const FactorSet& factors,
                                const RelationId& target = kTargetRelation);

struct ModeShares {
  std::vector<double> citywide;          // column sums / grand total
  Matrix per_municipality;               // row-normalized; undefined rows are NaN
  std::vector<bool> defined;             // row sum > 0
};

/// Throws DomainError when the split has no positive row.
ModeShares mode_shares(const ModeSplit& split);

/// Pearson r with 1/n moments. Throws DomainError on length < 3, mismatched
/// lengths, or a constant vector.
double pearson(const Vector& x, const Vector& y);

/// Two-sided p from t = r sqrt((n-2)/(1-r^2)) on n-2 degrees of freedom;
/// exactly 0 when |r| = 1.
double pearson_pvalue(double r, std::size_t n);

/// min(1, p * comparisons).
double bonferroni(double p, std::size_t comparisons);

struct MacroTotals {
  std::map<std::string, double> per_area;
  double total = 0.0;
};

/// Sums one mode column per macro-area. Throws ValidationError on an unmapped
/// municipality.
MacroTotals macro_totals(const ModeSplit& split, const std::map<std::string, std::string>& mapping,
                         Mode mode = Mode::MassTransit);

struct ModeComparison {
  std::string mode;
  std::optional<double> r;
  std::optional<double> p_corrected;  // Bonferroni over the four modes
};

/// Per-mode Pearson r between two splits aligned by municipality label.
std::vector<ModeComparison> compare_configurations(const ModeSplit& a, const ModeSplit& b);

}  // namespace modefusion
