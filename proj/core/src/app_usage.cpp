#include "modefusion/app_usage.hpp"

#include "modefusion/csv_io.hpp"
#include "modefusion/errors.hpp"
#include "modefusion/mode_split.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <sstream>
#include <unordered_map>

namespace modefusion {

namespace {

std::vector<std::string> split_labels(std::string_view host) {
  std::vector<std::string> labels;
  std::size_t start = 0;
  while (true) {
    const auto dot = host.find('.', start);
    labels.emplace_back(host.substr(start, dot == std::string_view::npos ? host.npos : dot - start));
    if (dot == std::string_view::npos) break;
    start = dot + 1;
  }
  return labels;
}

bool ends_with_labels(const std::vector<std::string>& labels,
                      const std::vector<std::string>& suffix) {
  if (suffix.size() >= labels.size()) return false;
  return std::equal(suffix.rbegin(), suffix.rend(), labels.rbegin());
}

std::string trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return std::string(s);
}

}  // namespace

std::string unify_domain(std::string_view raw, const std::vector<std::string>& multi_label_suffixes) {
  std::string host;
  host.reserve(raw.size());
  for (char c : trim(raw)) host.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  if (!host.empty() && host.back() == '.') host.pop_back();
  if (host.empty()) throw ValidationError("empty domain");

  const auto labels = split_labels(host);
  for (const auto& l : labels) {
    if (l.empty()) throw ValidationError("malformed domain '" + std::string(raw) + "'");
  }

  std::size_t keep = 2;
  for (const auto& suffix : multi_label_suffixes) {
    const auto suffix_labels = split_labels(unify_domain(suffix, {}));
    if (suffix_labels.size() >= 2 && ends_with_labels(labels, suffix_labels)) {
      keep = std::max(keep, suffix_labels.size() + 1);
    }
  }
  if (labels.size() <= keep) return host;
  std::string out;
  for (std::size_t i = labels.size() - keep; i < labels.size(); ++i) {
    if (!out.empty()) out.push_back('.');
    out += labels[i];
  }
  return out;
}

std::map<std::string, std::string> unify_domains(const std::vector<std::string>& raw,
                                                 const std::vector<std::string>& suffixes) {
  std::map<std::string, std::string> out;
  for (const auto& d : raw) out.emplace(d, unify_domain(d, suffixes));
  return out;
}

UsageCounts UsageCounts::with_apps(const std::vector<std::string>& keep) const {
  UsageCounts out;
  out.towers = towers;
  out.counts.resize(counts.rows(), static_cast<Eigen::Index>(keep.size()));
  for (std::size_t j = 0; j < keep.size(); ++j) {
    auto it = std::find(apps.begin(), apps.end(), keep[j]);
    if (it == apps.end()) throw ValidationError("unknown app '" + keep[j] + "'");
    out.counts.col(static_cast<Eigen::Index>(j)) = counts.col(it - apps.begin());
  }
  out.apps = keep;
  return out;
}

std::vector<UsageRecord> read_usage_csv(const std::filesystem::path& path) {
  std::vector<UsageRecord> records;
  read_long_csv(path, {"tower", "domain", "count"}, [&](const std::vector<std::string>& f) {
    const double count = parse_double(f[2]);
    if (!(count >= 0.0) || !std::isfinite(count)) throw IoError("count must be >= 0");
    if (f[0].empty() || f[1].empty()) throw IoError("empty id");
    records.push_back(UsageRecord{f[0], f[1], count});
  });
  return records;
}

void write_usage_csv(const std::filesystem::path& path, const std::vector<UsageRecord>& records) {
  std::ostringstream os;
  os << "tower,domain,count\n";
  for (const auto& r : records) {
    os << csv_escape(r.tower) << ',' << csv_escape(r.domain) << ',' << format_double(r.count) << '\n';
  }
  write_text_file(path, os.str());
}

std::set<std::string> read_exclusion_list(const std::filesystem::path& path) {
  std::set<std::string> out;
  std::istringstream in(read_text_file(path));
  std::string line;
  while (std::getline(in, line)) {
    auto entry = trim(line);
    if (entry.empty() || entry.front() == '#') continue;
    std::transform(entry.begin(), entry.end(), entry.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    out.insert(entry);
  }
  return out;
}

UsageCounts aggregate_usage(const std::vector<UsageRecord>& records,
                            const std::vector<std::string>& towers,
                            const std::set<std::string>& excluded,
                            const std::vector<std::string>& suffixes) {
  std::unordered_map<std::string, std::size_t> tower_row;
  for (std::size_t i = 0; i < towers.size(); ++i) tower_row.emplace(towers[i], i);

  std::map<std::string, std::size_t> app_col;  // sorted app order
  std::map<std::string, std::string> cache;
  std::vector<std::pair<std::size_t, std::string>> resolved;
  resolved.reserve(records.size());
  for (const auto& r : records) {
    auto row = tower_row.find(r.tower);
    if (row == tower_row.end()) throw ValidationError("usage for unknown tower '" + r.tower + "'");
    auto [it, fresh] = cache.try_emplace(r.domain);
    if (fresh) it->second = unify_domain(r.domain, suffixes);
    std::string lowered = r.domain;
    std::transform(lowered.begin(), lowered.end(), lowered.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (excluded.count(lowered) != 0 || excluded.count(it->second) != 0) {
      resolved.emplace_back(std::numeric_limits<std::size_t>::max(), std::string{});
      continue;
    }
    app_col.emplace(it->second, 0);
    resolved.emplace_back(row->second, it->second);
  }
  UsageCounts out;
  out.towers = towers;
  for (auto& [app, col] : app_col) {
    col = out.apps.size();
    out.apps.push_back(app);
  }
  out.counts = Matrix::Zero(static_cast<Eigen::Index>(towers.size()),
                            static_cast<Eigen::Index>(out.apps.size()));
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& [row, app] = resolved[i];
    if (app.empty()) continue;
    out.counts(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(app_col.at(app))) +=
        records[i].count;
  }
  return out;
}

double app_entropy(const Vector& column) {
  const double total = column.sum();
  if (!(total > 0.0)) return 0.0;
  double h = 0.0;
  for (Eigen::Index t = 0; t < column.size(); ++t) {
    if (column(t) > 0.0) {
      const double p = column(t) / total;
      h -= p * std::log(p);
    }
  }
  return h;
}

std::vector<std::string> entropy_filter(const UsageCounts& usage, double drop_fraction) {
  if (drop_fraction < 0.0 || drop_fraction >= 1.0) {
    throw ValidationError("drop_fraction must lie in [0, 1)");
  }
  std::vector<std::pair<std::size_t, double>> positive;
  for (Eigen::Index a = 0; a < usage.counts.cols(); ++a) {
    if (usage.counts.col(a).sum() > 0.0) {
      positive.emplace_back(static_cast<std::size_t>(a), app_entropy(usage.counts.col(a)));
    }
  }
  const auto cut = static_cast<std::size_t>(std::floor(drop_fraction * static_cast<double>(positive.size())));
  double threshold = -std::numeric_limits<double>::infinity();
  if (cut > 0) {
    std::vector<double> sorted;
    for (const auto& [_, h] : positive) sorted.push_back(h);
    std::sort(sorted.begin(), sorted.end());
    threshold = sorted[cut];
  }
  std::vector<std::string> kept;
  for (const auto& [a, h] : positive) {
    if (h >= threshold) kept.push_back(usage.apps[a]);
  }
  return kept;
}

LogOddsScores log_odds_dirichlet(const UsageCounts& usage, double prior_strength) {
  if (!(prior_strength > 0.0)) throw ValidationError("prior_strength must be > 0");
  const Matrix& counts = usage.counts;
  if (counts.size() > 0 && counts.minCoeff() < 0.0) throw ValidationError("negative usage count");

  LogOddsScores out{Matrix::Zero(counts.rows(), counts.cols()),
                    Matrix::Zero(counts.rows(), counts.cols()), 0};
  const Vector tower_total = counts.rowwise().sum();
  const double n = tower_total.sum();
  const auto scored_towers = (tower_total.array() > 0.0).count();
  if (scored_towers == 0) return out;
  const double c_tower = prior_strength / static_cast<double>(scored_towers);
  const double c_global = prior_strength;

  for (Eigen::Index a = 0; a < counts.cols(); ++a) {
    const double y = counts.col(a).sum();
    if (!(y > 0.0) || y >= n) continue;  // odds undefined for an app owning all traffic
    const double p = y / n;
    const double a_tower = c_tower * p;
    const double a_global = c_global * p;
    const double log_global = std::log((y + a_global) / (n + c_global - y - a_global));
    for (Eigen::Index t = 0; t < counts.rows(); ++t) {
      const double n_t = tower_total(t);
      if (!(n_t > 0.0)) continue;
      const double y_t = counts(t, a);
      const double log_tower = std::log((y_t + a_tower) / (n_t + c_tower - y_t - a_tower));
      double delta = log_tower - log_global;
      // Cancellation noise when the tower's odds equal the network odds.
      const double noise = 64.0 * std::numeric_limits<double>::epsilon() *
                           (std::abs(log_tower) + std::abs(log_global) + 1.0);
      if (std::abs(delta) <= noise) delta = 0.0;
      double variance = 1.0 / (y_t + a_tower);
      const double rest = y - y_t + a_global - a_tower;
      if (rest > 0.0) variance += 1.0 / rest;
      out.z(t, a) = delta / std::sqrt(variance);
    }
  }
  out.clipped = out.z.cwiseMax(0.0);
  out.clipped_cells = static_cast<std::size_t>((out.z.array() < 0.0).count());
  return out;
}

std::vector<AssociationEntry> read_association_file(const std::filesystem::path& path) {
  std::vector<AssociationEntry> out;
  std::istringstream in(read_text_file(path));
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto text = trim(line);
    if (text.empty() || text.front() == '#') continue;
    auto fields = split_csv_line(text);
    AssociationEntry entry{trim(fields.front()), {}};
    if (entry.app.empty()) {
      throw ValidationError(path.filename().string() + ":" + std::to_string(line_no) + ": empty app");
    }
    for (std::size_t i = 1; i < fields.size(); ++i) {
      auto mode = trim(fields[i]);
      if (mode.empty()) continue;
      try {
        static_cast<void>(mode_index(mode));
      } catch (const ValidationError& e) {
        throw ValidationError(path.filename().string() + ":" + std::to_string(line_no) + ": " +
                              e.what());
      }
      entry.modes.push_back(mode);
    }
    out.push_back(std::move(entry));
  }
  return out;
}

LabeledMatrix build_mode_association(const std::vector<AssociationEntry>& entries,
                                     const std::vector<std::string>& apps,
                                     const std::vector<std::string>& suffixes) {
  std::map<std::string, std::set<std::size_t>> modes_of;
  for (const auto& e : entries) {
    auto& set = modes_of[unify_domain(e.app, suffixes)];
    for (const auto& m : e.modes) set.insert(mode_index(m));
  }
  LabeledMatrix out{"application", "mode", apps, mode_labels(),
                    Matrix::Zero(static_cast<Eigen::Index>(apps.size()),
                                 static_cast<Eigen::Index>(kModeLabels.size()))};
  for (std::size_t i = 0; i < apps.size(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    auto it = modes_of.find(apps[i]);
    if (it == modes_of.end() || it->second.empty()) {
      out.values.row(row).setConstant(1.0 / static_cast<double>(kModeLabels.size()));
      continue;
    }
    const double share = 1.0 / static_cast<double>(it->second.size());
    for (std::size_t m : it->second) out.values(row, static_cast<Eigen::Index>(m)) = share;
  }
  return out;
}

}  // namespace modefusion
