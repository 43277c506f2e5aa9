#pragma once

#include "modefusion/mode_split.hpp"

#include <filesystem>
#include <map>
#include <string>

namespace modefusion {

struct MunicipalityStats {
  double population_base = 0.0;
  double population_new = 0.0;
  double permits_base = 0.0;
  double permits_new = 0.0;
};

/// Official statistics for the base and update years.
struct OfficialStats {
  std::map<std::string, MunicipalityStats> municipalities;
  double metro_base = 0.0;  // citywide smart-card transactions
  double metro_new = 0.0;
  double active_factor = 0.975;
  double taxi_factor = 1.09;

  /// Throws ValidationError on non-positive populations or metro counts and
  /// on negative permits.
  void check() const;
};

/// Updated prior, per municipality m with p = population_new / population_base:
///   MT' = MT * p * sqrt(metro_new / metro_base)
///   C'  = C  * p * sqrt(permits_new / permits_base)
///   A'  = A  * p * active_factor
///   T'  = (T + 1) * p * taxi_factor
/// A municipality with no permits in either year keeps its C unscaled by the
/// permit term. Throws DomainError on zero base population, zero base permits
/// with nonzero new permits, or zero metro_base.
ModeSplit project_mode_split(const ModeSplit& base, const OfficialStats& stats);

/// Total projected trips over the total of `base` scaled by population change
/// alone. Throws DomainError when that denominator is zero.
double naive_ratio(const ModeSplit& base, const ModeSplit& projected, const OfficialStats& stats);

/// `municipality,pop_base,pop_new,permits_base,permits_new`.
OfficialStats read_stats_csv(const std::filesystem::path& stats_path,
                             const std::filesystem::path& metro_path);
/// `metro_base,metro_new` with a single data row.
void write_stats_csv(const std::filesystem::path& stats_path,
                     const std::filesystem::path& metro_path, const OfficialStats& stats,
                     const std::vector<std::string>& order);

}  // namespace modefusion
