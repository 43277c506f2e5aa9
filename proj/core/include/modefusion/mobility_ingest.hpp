#pragma once

#include "modefusion/labeled_matrix.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace modefusion {

using Timestamp = std::int64_t;  // seconds, local offset already applied

struct NetworkEvent {
  std::string device;
  std::string tower;
  Timestamp timestamp = 0;
};

struct Tower {
  std::string id;
  double x_m = 0.0;
  double y_m = 0.0;
  std::string municipality;
};

/// Towers by id, in file order. Row order of every waypoint matrix follows
/// this order.
class TowerIndex {
 public:
  TowerIndex() = default;
  explicit TowerIndex(std::vector<Tower> towers);

  [[nodiscard]] const std::vector<Tower>& towers() const { return towers_; }
  [[nodiscard]] std::optional<std::size_t> find(const std::string& id) const;
  [[nodiscard]] const Tower& at(const std::string& id) const;
  [[nodiscard]] std::vector<std::string> ids() const;
  /// Distinct municipalities in first-seen order.
  [[nodiscard]] std::vector<std::string> municipalities() const;
  [[nodiscard]] double distance_m(const std::string& a, const std::string& b) const;

 private:
  std::vector<Tower> towers_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct Trip {
  std::string device;
  std::string origin;
  std::string destination;
  std::vector<std::string> waypoints;  // origin .. destination
  Timestamp start = 0;
  Timestamp end = 0;
  double mean_speed_kmh = 0.0;

  bool operator==(const Trip&) const = default;
};

/// Straight-line speed in km/h between two tower positions.
double leg_speed_kmh(double distance_m, Timestamp dt_s);

/// Stop-based segmentation. `events` must be sorted by (device, timestamp).
/// Each consecutive pair of a device's events whose straight-line speed is
/// above `break_speed_kmh` is a trip part; maximal runs of adjacent parts form
/// one trip. Throws ValidationError on an unknown tower.
std::vector<Trip> extract_trips(std::span<const NetworkEvent> events, const TowerIndex& towers,
                                double break_speed_kmh = 0.5);

struct TripFilter {
  double speed_min_kmh = 5.0;
  double speed_max_kmh = 120.0;
  std::int64_t window_start_s = 6 * 3600;  // seconds after local midnight
  std::int64_t window_end_s = 9 * 3600;    // exclusive
};

/// Keeps trips with speed_min <= mean speed <= speed_max whose start time of
/// day falls in [window_start, window_end).
std::vector<Trip> filter_trips(std::span<const Trip> trips, const TripFilter& filter = {});

struct SpeedBin {
  std::string label;
  double lower_kmh = 0.0;  // exclusive
  double upper_kmh = 0.0;  // inclusive
};

/// Eight contiguous (lower, upper] speed bins.
class SpeedRangeScheme {
 public:
  static constexpr std::size_t kBins = 8;

  /// (0,5], (5,10], (10,20], (20,30], (30,60], (60,80], (80,100], (100,120].
  static SpeedRangeScheme standard();
  /// Validates count, contiguity and ordering.
  static SpeedRangeScheme from_bins(std::vector<SpeedBin> bins);
  /// CSV with header `label,lower_kmh,upper_kmh`.
  static SpeedRangeScheme from_csv(const std::filesystem::path& path);

  [[nodiscard]] const std::vector<SpeedBin>& bins() const { return bins_; }
  [[nodiscard]] std::vector<std::string> labels() const;
  [[nodiscard]] std::optional<std::size_t> bin_of(double speed_kmh) const;

 private:
  std::vector<SpeedBin> bins_;
};

/// Distinct towers of a trip in first-visit order.
std::vector<std::string> distinct_waypoints(const Trip& trip);

/// Cell (m, w) counts trips whose origin tower lies in municipality m and
/// whose waypoints include tower w. Rows follow `municipalities`, columns
/// follow the tower index.
LabeledMatrix build_municipality_waypoint(std::span<const Trip> trips, const TowerIndex& towers,
                                          const std::vector<std::string>& municipalities);

/// w(m,t) = (c(m,t) / sum_t c(m,t)) * ln(1 + rows / df_t), df_t = rows with
/// c(., t) > 0. Zero rows stay zero.
Matrix tfidf(const Matrix& counts);

struct SpeedMatrices {
  LabeledMatrix municipality_speed;  // R07
  LabeledMatrix waypoint_speed;      // R08
};

/// Each trip adds 1 to its origin municipality's bin and 1 to the bin of each
/// of its distinct waypoints. Throws DomainError for a speed no bin covers.
SpeedMatrices build_speed_matrices(std::span<const Trip> trips, const TowerIndex& towers,
                                   const SpeedRangeScheme& scheme,
                                   const std::vector<std::string>& municipalities);

/// Long-format readers. Events are returned sorted by (device, timestamp) with
/// exact duplicates removed.
std::vector<NetworkEvent> read_events_csv(const std::filesystem::path& path,
                                          std::vector<std::string>* warnings = nullptr);
TowerIndex read_towers_csv(const std::filesystem::path& path);
void write_events_csv(const std::filesystem::path& path, std::span<const NetworkEvent> events);
void write_towers_csv(const std::filesystem::path& path, const TowerIndex& towers);

}  // namespace modefusion
