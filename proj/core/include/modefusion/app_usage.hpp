#pragma once

#include "modefusion/labeled_matrix.hpp"

#include <cstddef>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace modefusion {

/// Reduces a hostname to its registrable base: the last two labels, or the
/// last three when the name ends in one of `multi_label_suffixes` (for
/// example "gob.cl"). Lower-cases and drops a trailing dot. Idempotent.
std::string unify_domain(std::string_view raw,
                         const std::vector<std::string>& multi_label_suffixes = {});

std::map<std::string, std::string> unify_domains(
    const std::vector<std::string>& raw, const std::vector<std::string>& multi_label_suffixes = {});

/// Tower x app access counts.
struct UsageCounts {
  std::vector<std::string> towers;
  std::vector<std::string> apps;
  Matrix counts;

  /// Columns restricted to `keep` (in this object's column order).
  [[nodiscard]] UsageCounts with_apps(const std::vector<std::string>& keep) const;
};

struct UsageRecord {
  std::string tower;
  std::string domain;
  double count = 0.0;
};

/// Long-format CSV `tower,domain,count`.
std::vector<UsageRecord> read_usage_csv(const std::filesystem::path& path);
void write_usage_csv(const std::filesystem::path& path, const std::vector<UsageRecord>& records);

/// One domain per line; blank lines and '#' comments ignored.
std::set<std::string> read_exclusion_list(const std::filesystem::path& path);

/// Unifies domains, drops excluded ones (matched on raw or unified name) and
/// sums counts per (tower, unified app). Rows follow `towers`; records for
/// towers outside that list are rejected with ValidationError.
UsageCounts aggregate_usage(const std::vector<UsageRecord>& records,
                            const std::vector<std::string>& towers,
                            const std::set<std::string>& excluded = {},
                            const std::vector<std::string>& multi_label_suffixes = {});

/// H(a) = -sum_t p_t ln p_t over the app's tower distribution.
double app_entropy(const Vector& column);

/// Apps with positive total, minus those whose entropy falls below the
/// drop_fraction quantile. With n such apps and cut = floor(drop_fraction*n),
/// the threshold is the cut-th smallest entropy (0-based) and apps strictly
/// below it are removed, so ties at the threshold are all kept.
std::vector<std::string> entropy_filter(const UsageCounts& usage, double drop_fraction = 0.10);

struct LogOddsScores {
  Matrix z;        // signed z-scores
  Matrix clipped;  // max(z, 0), fed to the factorization
  std::size_t clipped_cells = 0;
};

/// Z-scored log-odds of each app at each tower against the whole network,
/// smoothed by a Dirichlet prior of total strength `prior_strength`.
///
/// For app a at tower t, with y_t its count, n_t the tower total, y and n the
/// network totals over towers with n_t > 0, T the number of such towers and
/// p = y / n:
///
///   tower prior  c_t = prior_strength / T,   a_t = c_t * p
///   global prior c   = prior_strength,       a   = c * p
///   delta = ln((y_t + a_t) / (n_t + c_t - y_t - a_t))
///         - ln((y + a) / (n + c - y - a))
///   var   = 1 / (y_t + a_t) + 1 / (y - y_t + a - a_t)
///   z     = delta / sqrt(var)
///
/// Since the prior follows the app's network share, delta is exactly zero
/// whenever the app's tower distribution equals the tower-total distribution.
/// Towers with zero total and apps with zero total score 0.
LogOddsScores log_odds_dirichlet(const UsageCounts& usage, double prior_strength = 1.0);

struct AssociationEntry {
  std::string app;
  std::vector<std::string> modes;
};

/// Lines `app,mode1[,mode2...]`; throws ValidationError on an unknown mode.
std::vector<AssociationEntry> read_association_file(const std::filesystem::path& path);

/// App x mode matrix: an associated app spreads weight 1 evenly over its
/// modes, an unassociated app gets 0.25 on every mode. Every row sums to 1.
LabeledMatrix build_mode_association(const std::vector<AssociationEntry>& entries,
                                     const std::vector<std::string>& apps,
                                     const std::vector<std::string>& multi_label_suffixes = {});

}  // namespace modefusion
