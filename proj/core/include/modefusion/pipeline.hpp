#pragma once

#include "modefusion/fusion_runner.hpp"
#include "modefusion/mobility_ingest.hpp"
#include "modefusion/relation_graph.hpp"
#include "modefusion/trifactor.hpp"

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace modefusion {

/// Paths of one pipeline run. Relative paths in the JSON file are resolved
/// against the manifest's directory. Example:
///   {"relation_manifest": "relations.json", "events": "events.csv",
///    "towers": "towers.csv", "usage": "usage.csv",
///    "associations": "associations.csv", "exclusions": "exclusions.txt",
///    "stats": "stats.csv", "metro": "metro.csv", "base_split": "base_split.csv",
///    "run_config": "run_config.json", "derived_dir": "derived", "output_dir": "out"}
struct PipelineManifest {
  std::filesystem::path relation_manifest;
  std::filesystem::path events;
  std::filesystem::path towers;
  std::filesystem::path usage;
  std::filesystem::path associations;
  std::filesystem::path exclusions;  // optional
  std::filesystem::path stats;
  std::filesystem::path metro;
  std::filesystem::path base_split;
  std::filesystem::path run_config;
  std::filesystem::path derived_dir;
  std::filesystem::path output_dir;

  static PipelineManifest load(const std::filesystem::path& path);
};

/// Run configuration (JSON). Every key is optional:
///   data_configuration, n_instances, base_seed, threads,
///   solver {max_iterations, relative_tolerance, epsilon, extrapolation_max,
///           stall_window},
///   active_factor, taxi_factor, speed_scheme, macro_areas, reference_split,
///   compare_split, prior_strength, entropy_drop_fraction, domain_suffixes,
///   trip_filter {speed_min_kmh, speed_max_kmh, window_start_s, window_end_s},
///   ranks {concept: k}
struct PipelineConfig {
  RunConfig run;
  double active_factor = 0.975;
  double taxi_factor = 1.09;
  std::optional<std::filesystem::path> speed_scheme;
  std::optional<std::filesystem::path> macro_areas;
  std::optional<std::filesystem::path> reference_split;
  std::optional<std::filesystem::path> compare_split;
  double prior_strength = 1.0;
  double entropy_drop_fraction = 0.10;
  std::vector<std::string> domain_suffixes;
  TripFilter trip_filter;
  std::map<ConceptId, int> rank_overrides;

  static PipelineConfig load(const std::filesystem::path& path);
  /// Parses JSON text; relative paths resolve against `base_dir`.
  static PipelineConfig parse(const std::string& json_text, const std::filesystem::path& base_dir);
};

/// Reads the relation manifest
///   {"target": "R01", "relations": [{"id", "source", "target", "path", "provenance"}]}
/// and builds the graph, aligning matrices by label.
RelationGraph load_relation_graph(const std::filesystem::path& relation_manifest);

/// G_<concept>.csv and S_<relation>.csv under `dir`.
void write_factor_set(const std::filesystem::path& dir, const RelationGraph& graph,
                      const FactorSet& factors);
FactorSet read_factor_set(const std::filesystem::path& dir, const RelationGraph& graph);

struct IngestSummary {
  std::size_t events = 0;
  std::size_t trips_extracted = 0;
  std::size_t trips_kept = 0;
  std::size_t apps_total = 0;
  std::size_t apps_kept = 0;
  std::size_t clipped_cells = 0;
  std::vector<std::string> warnings;
};

/// Writes R01 (projected prior), R05, R07, R08, R09 (plus R09_z.csv, the
/// signed scores) and R13 into the derived directory.
IngestSummary cmd_ingest(const PipelineManifest& manifest, const PipelineConfig& config,
                         std::ostream& log);

struct FitSummary {
  std::vector<std::pair<std::uint64_t, double>> instances;  // (seed, global error)
  std::uint64_t best_seed = 0;
  double best_error = 0.0;
};

/// Fits the configured instances and writes instances.csv, fit_report.json
/// and factors/ under the output directory.
FitSummary cmd_fit(const PipelineManifest& manifest, const PipelineConfig& config, std::ostream& log);

struct ReportSummary {
  ModeSplit updated;
  ModeSplit prior;
  std::size_t clamped_cells = 0;
  std::optional<std::vector<ModeComparison>> validation;  // updated vs reference
  std::optional<std::vector<ModeComparison>> baseline;    // prior vs reference
  std::optional<std::vector<ModeComparison>> comparison;  // updated vs compare_split
};

/// Reads the best model from the output directory and writes
/// updated_split.csv, updated_split_unclamped.csv, shares.csv,
/// citywide_shares.csv, change_vs_prior.csv, macro_areas.csv (when a mapping
/// is configured), validation.csv, validation_report.txt and comparison.csv
/// (when compare_split is configured).
ReportSummary cmd_report(const PipelineManifest& manifest, const PipelineConfig& config,
                         std::ostream& log);

/// Violations of the full graph; empty when it is usable.
std::vector<std::string> cmd_validate_graph(const PipelineManifest& manifest);

}  // namespace modefusion
