#pragma once

#include "modefusion/mode_split.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>

namespace modefusion {

/// Parameters of a synthetic city. `planted_split` is the ground-truth updated
/// mode split; every generated dataset is sampled consistently with it.
struct SyntheticSpec {
  std::size_t n_municipalities = 10;
  std::size_t n_towers = 200;
  std::size_t n_devices = 5000;
  std::size_t n_apps = 40;
  std::size_t n_days = 1;
  ModeSplit planted_split;
  double noise_level = 0.05;
  std::uint64_t seed = 1;

  /// Throws ValidationError for inconsistent sizes or a split with no trips.
  void check() const;

  /// Parameters with a planted split drawn from three latent municipality profiles
  /// (transit core, car-oriented, peripheral mixed).
  static SyntheticSpec with_default_split(std::size_t n_municipalities, std::size_t n_towers,
                                          std::size_t n_devices, double noise_level,
                                          std::uint64_t seed);
};

/// Municipality labels M01, M02, ...
std::vector<std::string> synthetic_municipalities(std::size_t n);

ModeSplit make_planted_split(std::size_t n_municipalities, std::uint64_t seed);

/// The ground truth used by `generate`; independent of noise_level.
ModeSplit planted_truth(const SyntheticSpec& spec);

struct SyntheticBundle {
  std::filesystem::path root;
  std::filesystem::path pipeline_manifest;
  std::filesystem::path truth;
  /// Morning-window trips the generator emitted; ingest should recover them.
  std::size_t ledger_trips = 0;
};

/// Writes a complete input bundle under `out_dir`:
///   pipeline.json, relations.json, run_config.json
///   towers.csv, events.csv, usage.csv, exclusions.txt, associations.csv
///   stats.csv, metro.csv, base_split.csv, macro_areas.csv
///   relations/R02..R04, R06, R10..R12, R14 (prepared matrices)
///   truth.csv, trip_ledger.csv
/// Relations R01, R05, R07, R08, R09 and R13 are produced by `ingest` into
/// derived/. Deterministic in the spec. Throws ValidationError when the
/// official statistics cannot be back-solved (negative base taxi counts).
SyntheticBundle generate(const SyntheticSpec& spec, const std::filesystem::path& out_dir);

}  // namespace modefusion
