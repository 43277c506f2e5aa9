#include "modefusion/pipeline.hpp"

#include "modefusion/app_usage.hpp"
#include "modefusion/csv_io.hpp"
#include "modefusion/errors.hpp"
#include "modefusion/mode_priors.hpp"

#include <json.hpp>

#include <ostream>
#include <sstream>

namespace modefusion {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json parse_json_file(const fs::path& path) {
  const std::string text = read_text_file(path);
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError("'" + path.string() + "': " + e.what());
  }
}

fs::path resolve(const fs::path& base, const std::string& value) {
  const fs::path p(value);
  return p.is_absolute() ? p : base / p;
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("run config key '") + key + "': " + e.what());
  }
}

std::optional<fs::path> optional_path(const json& j, const char* key, const fs::path& base) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return resolve(base, j.at(key).get<std::string>());
}

const fs::path& require(const fs::path& p, const char* what) {
  if (p.empty()) throw ValidationError(std::string("pipeline manifest has no '") + what + "'");
  return p;
}

std::vector<std::string> latent_labels(Eigen::Index k) {
  std::vector<std::string> out;
  for (Eigen::Index i = 1; i <= k; ++i) out.push_back("k" + std::to_string(i));
  return out;
}

std::map<std::string, std::string> read_macro_areas(const fs::path& path) {
  std::map<std::string, std::string> out;
  read_long_csv(path, {"municipality", "macro_area"},
                [&](const std::vector<std::string>& f) {
                  if (!out.emplace(f[0], f[1]).second) {
                    throw ValidationError("duplicate municipality '" + f[0] + "' in macro-area file");
                  }
                },
                0.0);
  return out;
}

std::string format_optional(const std::optional<double>& v) {
  return v ? format_double(*v) : std::string("undefined");
}

void write_comparisons(std::ostream& os, const std::string& estimate,
                       const std::vector<ModeComparison>& rows) {
  for (const auto& c : rows) {
    os << estimate << ',' << c.mode << ',' << format_optional(c.r) << ','
       << format_optional(c.p_corrected) << '\n';
  }
}

}  // namespace

PipelineManifest PipelineManifest::load(const fs::path& path) {
  const json j = parse_json_file(path);
  if (!j.is_object()) throw ValidationError("'" + path.string() + "': expected a JSON object");
  const fs::path base = path.parent_path();
  PipelineManifest m;
  auto field = [&](const char* key, fs::path& out) {
    if (j.contains(key) && !j.at(key).is_null()) out = resolve(base, j.at(key).get<std::string>());
  };
  field("relation_manifest", m.relation_manifest);
  field("events", m.events);
  field("towers", m.towers);
  field("usage", m.usage);
  field("associations", m.associations);
  field("exclusions", m.exclusions);
  field("stats", m.stats);
  field("metro", m.metro);
  field("base_split", m.base_split);
  field("run_config", m.run_config);
  field("derived_dir", m.derived_dir);
  field("output_dir", m.output_dir);
  if (m.output_dir.empty()) m.output_dir = base / "out";
  if (m.derived_dir.empty()) m.derived_dir = base / "derived";
  return m;
}

PipelineConfig PipelineConfig::load(const fs::path& path) {
  return parse(read_text_file(path), path.parent_path());
}

PipelineConfig PipelineConfig::parse(const std::string& json_text, const fs::path& base_dir) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("run config: ") + e.what());
  }
  if (!j.is_object()) throw ValidationError("run config: expected a JSON object");

  PipelineConfig c;
  try {
    c.run.data_configuration = parse_data_configuration(get_or<std::string>(j, "data_configuration", "all"));
    c.run.n_instances = get_or<int>(j, "n_instances", c.run.n_instances);
    c.run.base_seed = get_or<std::uint64_t>(j, "base_seed", c.run.base_seed);
    c.run.threads = get_or<unsigned>(j, "threads", c.run.threads);
    if (j.contains("solver")) {
      const json& s = j.at("solver");
      c.run.solver.max_iterations = get_or<int>(s, "max_iterations", c.run.solver.max_iterations);
      c.run.solver.relative_tolerance =
          get_or<double>(s, "relative_tolerance", c.run.solver.relative_tolerance);
      c.run.solver.epsilon = get_or<double>(s, "epsilon", c.run.solver.epsilon);
      c.run.solver.extrapolation_max = get_or<double>(s, "extrapolation_max", c.run.solver.extrapolation_max);
      c.run.solver.stall_window = get_or<int>(s, "stall_window", c.run.solver.stall_window);
    }
    c.active_factor = get_or<double>(j, "active_factor", c.active_factor);
    c.taxi_factor = get_or<double>(j, "taxi_factor", c.taxi_factor);
    c.speed_scheme = optional_path(j, "speed_scheme", base_dir);
    c.macro_areas = optional_path(j, "macro_areas", base_dir);
    c.reference_split = optional_path(j, "reference_split", base_dir);
    c.compare_split = optional_path(j, "compare_split", base_dir);
    c.prior_strength = get_or<double>(j, "prior_strength", c.prior_strength);
    c.entropy_drop_fraction = get_or<double>(j, "entropy_drop_fraction", c.entropy_drop_fraction);
    c.domain_suffixes = get_or<std::vector<std::string>>(j, "domain_suffixes", {});
    if (j.contains("trip_filter")) {
      const json& f = j.at("trip_filter");
      c.trip_filter.speed_min_kmh = get_or<double>(f, "speed_min_kmh", c.trip_filter.speed_min_kmh);
      c.trip_filter.speed_max_kmh = get_or<double>(f, "speed_max_kmh", c.trip_filter.speed_max_kmh);
      c.trip_filter.window_start_s =
          get_or<std::int64_t>(f, "window_start_s", c.trip_filter.window_start_s);
      c.trip_filter.window_end_s = get_or<std::int64_t>(f, "window_end_s", c.trip_filter.window_end_s);
    }
    c.rank_overrides = get_or<std::map<ConceptId, int>>(j, "ranks", {});
  } catch (const json::exception& e) {
    throw ValidationError(std::string("run config: ") + e.what());
  }
  c.run.check();
  return c;
}

RelationGraph load_relation_graph(const fs::path& relation_manifest) {
  const json j = parse_json_file(relation_manifest);
  const fs::path base = relation_manifest.parent_path();
  RelationGraph graph;
  try {
    for (const json& r : j.at("relations")) {
      const auto id = r.at("id").get<std::string>();
      const auto path = resolve(base, r.at("path").get<std::string>());
      graph.add_labeled_relation(id, r.at("source").get<std::string>(),
                                 r.at("target").get<std::string>(), read_matrix_csv(path),
                                 r.value("provenance", std::string("derived")));
    }
    graph.set_target_relation(j.value("target", std::string(kTargetRelation)));
  } catch (const json::exception& e) {
    throw ValidationError("'" + relation_manifest.string() + "': " + e.what());
  }
  return graph;
}

void write_factor_set(const fs::path& dir, const RelationGraph& graph, const FactorSet& factors) {
  for (const auto& [id, g] : factors.factors) {
    write_matrix_csv(dir / ("G_" + id + ".csv"),
                     {id, "latent", graph.concept_at(id).labels, latent_labels(g.cols()), g});
  }
  for (const auto& [id, s] : factors.backbones) {
    const Relation& r = graph.relation_at(id);
    write_matrix_csv(dir / ("S_" + id + ".csv"),
                     {"latent:" + r.source, "latent:" + r.target, latent_labels(s.rows()),
                      latent_labels(s.cols()), s});
  }
}

FactorSet read_factor_set(const fs::path& dir, const RelationGraph& graph) {
  FactorSet out;
  auto read = [&](const fs::path& p) {
    if (!fs::exists(p)) throw IoError("missing model artifact '" + p.string() + "'");
    return read_matrix_csv(p);
  };
  for (const auto& c : graph.concepts()) {
    const LabeledMatrix g = read(dir / ("G_" + c.id + ".csv"));
    out.factors.emplace(c.id, g.with_row_order(c.labels).values);
  }
  for (const auto& r : graph.relations()) {
    const LabeledMatrix s = read(dir / ("S_" + r.id + ".csv"));
    const auto ks = out.factors.at(r.source).cols();
    const auto kt = out.factors.at(r.target).cols();
    if (s.rows() != ks || s.cols() != kt) {
      throw ValidationError("backbone '" + r.id + "' does not match the factor ranks");
    }
    out.backbones.emplace(r.id, s.values);
  }
  return out;
}

IngestSummary cmd_ingest(const PipelineManifest& manifest, const PipelineConfig& config,
                         std::ostream& log) {
  IngestSummary summary;
  const fs::path& out = require(manifest.derived_dir, "derived_dir");

  OfficialStats stats = read_stats_csv(require(manifest.stats, "stats"), require(manifest.metro, "metro"));
  stats.active_factor = config.active_factor;
  stats.taxi_factor = config.taxi_factor;
  const ModeSplit base = ModeSplit::from_labeled(read_matrix_csv(require(manifest.base_split, "base_split")));
  const ModeSplit prior = project_mode_split(base, stats);
  write_matrix_csv(out / "R01.csv", prior.to_labeled());
  log << "ingest: prior split for " << prior.municipalities.size()
      << " municipalities, naive ratio " << format_double(naive_ratio(base, prior, stats)) << '\n';
  const auto& municipalities = base.municipalities;

  const TowerIndex towers = read_towers_csv(require(manifest.towers, "towers"));
  const std::vector<NetworkEvent> events =
      read_events_csv(require(manifest.events, "events"), &summary.warnings);
  summary.events = events.size();
  if (events.empty()) summary.warnings.emplace_back("no network events; mobility matrices are all zero");

  const std::vector<Trip> trips = extract_trips(events, towers);
  const std::vector<Trip> kept = filter_trips(trips, config.trip_filter);
  summary.trips_extracted = trips.size();
  summary.trips_kept = kept.size();

  LabeledMatrix waypoints = build_municipality_waypoint(kept, towers, municipalities);
  waypoints.values = tfidf(waypoints.values);
  write_matrix_csv(out / "R05.csv", waypoints);

  const SpeedRangeScheme scheme =
      config.speed_scheme ? SpeedRangeScheme::from_csv(*config.speed_scheme) : SpeedRangeScheme::standard();
  const SpeedMatrices speeds = build_speed_matrices(kept, towers, scheme, municipalities);
  write_matrix_csv(out / "R07.csv", speeds.municipality_speed);
  write_matrix_csv(out / "R08.csv", speeds.waypoint_speed);
  log << "ingest: " << summary.events << " events, " << summary.trips_extracted
      << " trips extracted, " << summary.trips_kept << " trips kept\n";

  const std::set<std::string> excluded =
      manifest.exclusions.empty() ? std::set<std::string>{} : read_exclusion_list(manifest.exclusions);
  const UsageCounts usage = aggregate_usage(read_usage_csv(require(manifest.usage, "usage")),
                                            towers.ids(), excluded, config.domain_suffixes);
  const std::vector<std::string> apps = entropy_filter(usage, config.entropy_drop_fraction);
  const UsageCounts kept_usage = usage.with_apps(apps);
  const LogOddsScores scores = log_odds_dirichlet(kept_usage, config.prior_strength);
  summary.apps_total = usage.apps.size();
  summary.apps_kept = apps.size();
  summary.clipped_cells = scores.clipped_cells;
  write_matrix_csv(out / "R09.csv", {"waypoint", "application", kept_usage.towers, apps, scores.clipped});
  write_matrix_csv(out / "R09_z.csv", {"waypoint", "application", kept_usage.towers, apps, scores.z});

  const auto associations = read_association_file(require(manifest.associations, "associations"));
  write_matrix_csv(out / "R13.csv", build_mode_association(associations, apps, config.domain_suffixes));
  log << "ingest: " << summary.apps_total << " apps, " << summary.apps_kept << " kept, "
      << summary.clipped_cells << " negative scores clipped\n";
  for (const auto& w : summary.warnings) log << "warning: " << w << '\n';
  return summary;
}

namespace {

RelationGraph configured_graph(const PipelineManifest& manifest, const PipelineConfig& config) {
  const RelationGraph graph = load_relation_graph(require(manifest.relation_manifest, "relation_manifest"));
  auto issues = graph.validate();
  if (issues.empty()) {
    const RelationGraph configured = apply_configuration(graph, config.run.data_configuration);
    issues = configured.validate();
    if (issues.empty()) return configured;
  }
  std::string message = "relation graph is invalid:";
  for (const auto& i : issues) message += "\n  " + i;
  throw ValidationError(message);
}

}  // namespace

FitSummary cmd_fit(const PipelineManifest& manifest, const PipelineConfig& config, std::ostream& log) {
  const RelationGraph graph = configured_graph(manifest, config);
  RankAssignment ranks = graph.heuristic_ranks();
  for (const auto& [id, k] : config.rank_overrides) {
    if (graph.find_concept(id) != nullptr) ranks.set(id, k);
  }
  graph.check_ranks(ranks);

  log << "fit: " << to_string(config.run.data_configuration) << ", " << graph.relations().size()
      << " relations, " << config.run.n_instances << " instances\n";
  const auto results = run_instances(graph, ranks, config.run);
  const InstanceResult& best = select_best(results);

  const fs::path& out = manifest.output_dir;
  FitSummary summary;
  std::ostringstream table;
  table << "seed,global_error,iterations,converged,selected\n";
  for (const auto& r : results) {
    summary.instances.emplace_back(r.seed, r.global_error);
    table << r.seed << ',' << format_double(r.global_error) << ',' << r.report.iterations_run << ','
          << (r.report.converged ? 1 : 0) << ',' << (&r == &best ? 1 : 0) << '\n';
  }
  write_text_file(out / "instances.csv", table.str());

  fs::remove_all(out / "factors");
  write_factor_set(out / "factors", graph, best.factors);

  json report = {
      {"data_configuration", to_string(config.run.data_configuration)},
      {"seed", best.seed},
      {"global_error", best.global_error},
      {"iterations_run", best.report.iterations_run},
      {"converged", best.report.converged},
      {"per_relation_error", best.report.per_relation_error},
      {"ranks", ranks.entries()},
      {"objective_trace", best.report.objective_trace},
  };
  write_text_file(out / "fit_report.json", report.dump(2) + "\n");

  summary.best_seed = best.seed;
  summary.best_error = best.global_error;
  log << "fit: selected seed " << best.seed << ", global error " << format_double(best.global_error)
      << '\n';
  return summary;
}

ReportSummary cmd_report(const PipelineManifest& manifest, const PipelineConfig& config,
                         std::ostream& log) {
  const fs::path& out = manifest.output_dir;
  const fs::path report_path = out / "fit_report.json";
  if (!fs::exists(report_path)) throw IoError("missing model artifact '" + report_path.string() + "'");
  const json fitted = parse_json_file(report_path);
  const std::string fitted_config = fitted.value("data_configuration", std::string());
  if (fitted_config != to_string(config.run.data_configuration)) {
    throw ValidationError("model in '" + out.string() + "' was fitted under '" + fitted_config +
                          "', not '" + to_string(config.run.data_configuration) + "'");
  }

  const RelationGraph graph = configured_graph(manifest, config);
  const FactorSet factors = read_factor_set(out / "factors", graph);
  const UpdatedSplit updated = updated_mode_split(graph, factors);

  ReportSummary summary;
  summary.updated = updated.split;
  summary.prior = ModeSplit::from_labeled(graph.labeled(kTargetRelation)).aligned_to(updated.split.municipalities);
  summary.clamped_cells = updated.clamped_cells;
  const auto& names = summary.updated.municipalities;

  write_matrix_csv(out / "updated_split.csv", updated.split.to_labeled());
  write_matrix_csv(out / "updated_split_unclamped.csv", updated.unclamped.to_labeled());
  LabeledMatrix change = updated.split.to_labeled();
  change.values -= summary.prior.counts;
  write_matrix_csv(out / "change_vs_prior.csv", change);

  const ModeShares shares = mode_shares(updated.split);
  {
    std::ostringstream os;
    os << "municipality";
    for (auto m : kModeLabels) os << ',' << m;
    os << '\n';
    for (std::size_t i = 0; i < names.size(); ++i) {
      os << csv_escape(names[i]);
      for (Eigen::Index j = 0; j < 4; ++j) {
        os << ',';
        if (shares.defined[i]) os << format_double(shares.per_municipality(static_cast<Eigen::Index>(i), j));
      }
      os << '\n';
    }
    write_text_file(out / "shares.csv", os.str());
  }
  {
    const ModeShares prior_shares = mode_shares(summary.prior);
    const ModeShares unclamped = mode_shares(updated.unclamped);
    std::ostringstream os;
    os << "mode,prior,updated,updated_unclamped\n";
    for (std::size_t m = 0; m < kModeLabels.size(); ++m) {
      os << kModeLabels[m] << ',' << format_double(prior_shares.citywide[m]) << ','
         << format_double(shares.citywide[m]) << ',' << format_double(unclamped.citywide[m]) << '\n';
    }
    write_text_file(out / "citywide_shares.csv", os.str());
  }
  if (config.macro_areas) {
    const auto mapping = read_macro_areas(*config.macro_areas);
    std::ostringstream os;
    os << "macro_area,mode,prior,updated\n";
    for (std::size_t m = 0; m < kModeLabels.size(); ++m) {
      const auto mode = static_cast<Mode>(m);
      const MacroTotals before = macro_totals(summary.prior, mapping, mode);
      const MacroTotals after = macro_totals(summary.updated, mapping, mode);
      for (const auto& [area, value] : after.per_area) {
        os << csv_escape(area) << ',' << kModeLabels[m] << ',' << format_double(before.per_area.at(area))
           << ',' << format_double(value) << '\n';
      }
      os << "total," << kModeLabels[m] << ',' << format_double(before.total) << ','
         << format_double(after.total) << '\n';
    }
    write_text_file(out / "macro_areas.csv", os.str());
  }

  std::ostringstream csv;
  std::ostringstream text;
  csv << "estimate,mode,r,p_bonferroni\n";
  text << "data configuration: " << to_string(config.run.data_configuration) << '\n'
       << "selected seed: " << fitted.value("seed", std::uint64_t{0}) << '\n'
       << "clamped cells: " << summary.clamped_cells << '\n';
  if (config.reference_split) {
    const ModeSplit reference = ModeSplit::from_labeled(read_matrix_csv(*config.reference_split));
    summary.validation = compare_configurations(summary.updated, reference);
    summary.baseline = compare_configurations(summary.prior, reference);
    write_comparisons(csv, "updated", *summary.validation);
    write_comparisons(csv, "prior", *summary.baseline);
    text << "validation against " << config.reference_split->filename().string() << ":\n";
    for (std::size_t m = 0; m < kModeLabels.size(); ++m) {
      text << "  " << kModeLabels[m] << ": r = " << format_optional((*summary.validation)[m].r)
           << " (p = " << format_optional((*summary.validation)[m].p_corrected)
           << "), prior r = " << format_optional((*summary.baseline)[m].r) << '\n';
    }
  } else {
    text << "validation: skipped (no reference split)\n";
  }
  write_text_file(out / "validation.csv", csv.str());
  write_text_file(out / "validation_report.txt", text.str());

  if (config.compare_split) {
    const ModeSplit other = ModeSplit::from_labeled(read_matrix_csv(*config.compare_split));
    summary.comparison = compare_configurations(summary.updated, other);
    std::ostringstream os;
    os << "mode,r,p_bonferroni\n";
    for (const auto& c : *summary.comparison) {
      os << c.mode << ',' << format_optional(c.r) << ',' << format_optional(c.p_corrected) << '\n';
    }
    write_text_file(out / "comparison.csv", os.str());
  }

  log << "report: " << names.size() << " municipalities, " << summary.clamped_cells
      << " clamped cells";
  if (summary.validation) log << ", mass-transit r = " << format_optional(summary.validation->front().r);
  log << '\n';
  return summary;
}

std::vector<std::string> cmd_validate_graph(const PipelineManifest& manifest) {
  return load_relation_graph(require(manifest.relation_manifest, "relation_manifest")).validate();
}

}  // namespace modefusion
