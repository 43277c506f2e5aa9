#include "modefusion/mode_priors.hpp"

#include "modefusion/csv_io.hpp"
#include "modefusion/errors.hpp"

#include <cmath>
#include <sstream>

namespace modefusion {

std::vector<std::string> mode_labels() {
  return {kModeLabels.begin(), kModeLabels.end()};
}

std::size_t mode_index(std::string_view name) {
  for (std::size_t i = 0; i < kModeLabels.size(); ++i) {
    if (kModeLabels[i] == name) return i;
  }
  throw ValidationError("unknown mode '" + std::string(name) + "'");
}

ModeSplit ModeSplit::from_labeled(const LabeledMatrix& m) {
  m.check_shape();
  const LabeledMatrix aligned = m.with_col_order(mode_labels());
  return ModeSplit{aligned.row_labels, aligned.values};
}

LabeledMatrix ModeSplit::to_labeled() const {
  return LabeledMatrix{"municipality", "mode", municipalities, mode_labels(), counts};
}

ModeSplit ModeSplit::aligned_to(const std::vector<std::string>& order) const {
  return from_labeled(to_labeled().with_row_order(order));
}

void OfficialStats::check() const {
  for (const auto& [name, s] : municipalities) {
    if (!(s.population_base > 0.0) || !(s.population_new > 0.0)) {
      throw ValidationError("municipality '" + name + "': populations must be > 0");
    }
    if (s.permits_base < 0.0 || s.permits_new < 0.0) {
      throw ValidationError("municipality '" + name + "': permits must be >= 0");
    }
  }
  if (!(metro_base > 0.0) || !(metro_new > 0.0)) {
    throw ValidationError("metro counts must be > 0");
  }
}

namespace {

const MunicipalityStats& stats_for(const OfficialStats& stats, const std::string& m) {
  auto it = stats.municipalities.find(m);
  if (it == stats.municipalities.end()) {
    throw ValidationError("no official statistics for municipality '" + m + "'");
  }
  return it->second;
}

double population_ratio(const MunicipalityStats& s, const std::string& m) {
  if (s.population_base == 0.0) throw DomainError("municipality '" + m + "': zero base population");
  return s.population_new / s.population_base;
}

}  // namespace

ModeSplit project_mode_split(const ModeSplit& base, const OfficialStats& stats) {
  if (stats.metro_base == 0.0) throw DomainError("zero metro_base");
  const double metro_term = std::sqrt(stats.metro_new / stats.metro_base);
  ModeSplit out{base.municipalities, Matrix(base.counts.rows(), 4)};
  for (std::size_t i = 0; i < base.municipalities.size(); ++i) {
    const auto& name = base.municipalities[i];
    const MunicipalityStats& s = stats_for(stats, name);
    const double p = population_ratio(s, name);
    double permit_term = 1.0;
    if (s.permits_base == 0.0) {
      if (s.permits_new != 0.0) {
        throw DomainError("municipality '" + name + "': zero base permits with nonzero new permits");
      }
    } else {
      permit_term = std::sqrt(s.permits_new / s.permits_base);
    }
    const auto row = static_cast<Eigen::Index>(i);
    out.counts(row, 0) = base.counts(row, 0) * p * metro_term;
    out.counts(row, 1) = base.counts(row, 1) * p * permit_term;
    out.counts(row, 2) = base.counts(row, 2) * p * stats.active_factor;
    out.counts(row, 3) = (base.counts(row, 3) + 1.0) * p * stats.taxi_factor;
  }
  return out;
}

double naive_ratio(const ModeSplit& base, const ModeSplit& projected, const OfficialStats& stats) {
  if (base.municipalities != projected.municipalities) {
    throw ValidationError("naive_ratio: base and projected municipalities differ");
  }
  double naive = 0.0;
  for (std::size_t i = 0; i < base.municipalities.size(); ++i) {
    const auto& name = base.municipalities[i];
    naive += base.counts.row(static_cast<Eigen::Index>(i)).sum() *
             population_ratio(stats_for(stats, name), name);
  }
  if (naive == 0.0) throw DomainError("naive_ratio: zero naive total");
  return projected.counts.sum() / naive;
}

OfficialStats read_stats_csv(const std::filesystem::path& stats_path,
                             const std::filesystem::path& metro_path) {
  OfficialStats stats;
  read_long_csv(stats_path, {"municipality", "pop_base", "pop_new", "permits_base", "permits_new"},
                [&](const std::vector<std::string>& f) {
                  MunicipalityStats s{parse_double(f[1]), parse_double(f[2]), parse_double(f[3]),
                                      parse_double(f[4])};
                  if (!stats.municipalities.emplace(f[0], s).second) {
                    throw ValidationError("duplicate municipality '" + f[0] + "'");
                  }
                },
                0.0);
  bool seen = false;
  read_long_csv(metro_path, {"metro_base", "metro_new"},
                [&](const std::vector<std::string>& f) {
                  if (seen) throw ValidationError("metro file must have one data row");
                  stats.metro_base = parse_double(f[0]);
                  stats.metro_new = parse_double(f[1]);
                  seen = true;
                },
                0.0);
  if (!seen) throw IoError("'" + metro_path.string() + "': no metro row");
  stats.check();
  return stats;
}

void write_stats_csv(const std::filesystem::path& stats_path,
                     const std::filesystem::path& metro_path, const OfficialStats& stats,
                     const std::vector<std::string>& order) {
  std::ostringstream os;
  os << "municipality,pop_base,pop_new,permits_base,permits_new\n";
  for (const auto& name : order) {
    const auto& s = stats_for(stats, name);
    os << csv_escape(name) << ',' << format_double(s.population_base) << ','
       << format_double(s.population_new) << ',' << format_double(s.permits_base) << ','
       << format_double(s.permits_new) << '\n';
  }
  write_text_file(stats_path, os.str());
  write_text_file(metro_path, "metro_base,metro_new\n" + format_double(stats.metro_base) + "," +
                                  format_double(stats.metro_new) + "\n");
}

}  // namespace modefusion
