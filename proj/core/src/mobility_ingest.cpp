#include "modefusion/mobility_ingest.hpp"

#include "modefusion/csv_io.hpp"
#include "modefusion/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <unordered_set>

namespace modefusion {

TowerIndex::TowerIndex(std::vector<Tower> towers) : towers_(std::move(towers)) {
  for (std::size_t i = 0; i < towers_.size(); ++i) {
    const Tower& t = towers_[i];
    if (!std::isfinite(t.x_m) || !std::isfinite(t.y_m)) {
      throw ValidationError("tower '" + t.id + "': non-finite position");
    }
    if (!index_.emplace(t.id, i).second) throw ValidationError("duplicate tower '" + t.id + "'");
  }
}

std::optional<std::size_t> TowerIndex::find(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

const Tower& TowerIndex::at(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw ValidationError("unknown tower '" + id + "'");
  return towers_[it->second];
}

std::vector<std::string> TowerIndex::ids() const {
  std::vector<std::string> out;
  out.reserve(towers_.size());
  for (const auto& t : towers_) out.push_back(t.id);
  return out;
}

std::vector<std::string> TowerIndex::municipalities() const {
  std::vector<std::string> out;
  std::unordered_set<std::string> seen;
  for (const auto& t : towers_) {
    if (seen.insert(t.municipality).second) out.push_back(t.municipality);
  }
  return out;
}

double TowerIndex::distance_m(const std::string& a, const std::string& b) const {
  const Tower& ta = at(a);
  const Tower& tb = at(b);
  return std::hypot(ta.x_m - tb.x_m, ta.y_m - tb.y_m);
}

double leg_speed_kmh(double distance_m, Timestamp dt_s) {
  if (dt_s <= 0) return distance_m > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
  return (distance_m / 1000.0) / (static_cast<double>(dt_s) / 3600.0);
}

std::vector<Trip> extract_trips(std::span<const NetworkEvent> events, const TowerIndex& towers,
                                double break_speed_kmh) {
  std::vector<Trip> trips;
  std::size_t begin = 0;
  while (begin < events.size()) {
    std::size_t end = begin + 1;
    while (end < events.size() && events[end].device == events[begin].device) ++end;

    std::vector<const Tower*> at;
    at.reserve(end - begin);
    for (std::size_t i = begin; i < end; ++i) at.push_back(&towers.at(events[i].tower));

    bool open = false;
    Trip current;
    double distance_m = 0.0;
    auto close = [&] {
      if (!open) return;
      const double seconds = static_cast<double>(current.end - current.start);
      current.mean_speed_kmh = (distance_m / 1000.0) / (seconds / 3600.0);
      current.destination = current.waypoints.back();
      trips.push_back(std::move(current));
      current = Trip{};
      open = false;
    };

    for (std::size_t i = begin; i + 1 < end; ++i) {
      const Tower& a = *at[i - begin];
      const Tower& b = *at[i + 1 - begin];
      const Timestamp dt = events[i + 1].timestamp - events[i].timestamp;
      const double d = std::hypot(a.x_m - b.x_m, a.y_m - b.y_m);
      // Non-increasing timestamps cannot carry a movement; they break the chain.
      const bool part = dt > 0 && leg_speed_kmh(d, dt) > break_speed_kmh;
      if (!part) {
        close();
        continue;
      }
      if (!open) {
        open = true;
        current.device = events[i].device;
        current.origin = a.id;
        current.start = events[i].timestamp;
        current.waypoints.push_back(a.id);
        distance_m = 0.0;
      }
      current.waypoints.push_back(b.id);
      current.end = events[i + 1].timestamp;
      distance_m += d;
    }
    close();
    begin = end;
  }
  return trips;
}

std::vector<Trip> filter_trips(std::span<const Trip> trips, const TripFilter& filter) {
  std::vector<Trip> kept;
  for (const auto& t : trips) {
    if (t.mean_speed_kmh < filter.speed_min_kmh || t.mean_speed_kmh > filter.speed_max_kmh) continue;
    std::int64_t time_of_day = t.start % 86400;
    if (time_of_day < 0) time_of_day += 86400;
    if (time_of_day < filter.window_start_s || time_of_day >= filter.window_end_s) continue;
    kept.push_back(t);
  }
  return kept;
}

SpeedRangeScheme SpeedRangeScheme::standard() {
  return from_bins({{"0-5", 0, 5},
                    {"5-10", 5, 10},
                    {"10-20", 10, 20},
                    {"20-30", 20, 30},
                    {"30-60", 30, 60},
                    {"60-80", 60, 80},
                    {"80-100", 80, 100},
                    {"100-120", 100, 120}});
}

SpeedRangeScheme SpeedRangeScheme::from_bins(std::vector<SpeedBin> bins) {
  if (bins.size() != kBins) {
    throw ValidationError("speed scheme needs exactly 8 bins, got " + std::to_string(bins.size()));
  }
  for (std::size_t i = 0; i < bins.size(); ++i) {
    if (!(bins[i].upper_kmh > bins[i].lower_kmh)) {
      throw ValidationError("speed bin '" + bins[i].label + "' is empty");
    }
    if (i > 0 && bins[i].lower_kmh != bins[i - 1].upper_kmh) {
      throw ValidationError("speed bins are not contiguous at '" + bins[i].label + "'");
    }
  }
  SpeedRangeScheme s;
  s.bins_ = std::move(bins);
  return s;
}

SpeedRangeScheme SpeedRangeScheme::from_csv(const std::filesystem::path& path) {
  std::vector<SpeedBin> bins;
  read_long_csv(path, {"label", "lower_kmh", "upper_kmh"},
                [&](const std::vector<std::string>& f) {
                  bins.push_back(SpeedBin{f[0], parse_double(f[1]), parse_double(f[2])});
                },
                0.0);
  return from_bins(std::move(bins));
}

std::vector<std::string> SpeedRangeScheme::labels() const {
  std::vector<std::string> out;
  for (const auto& b : bins_) out.push_back(b.label);
  return out;
}

std::optional<std::size_t> SpeedRangeScheme::bin_of(double speed_kmh) const {
  for (std::size_t i = 0; i < bins_.size(); ++i) {
    if (speed_kmh > bins_[i].lower_kmh && speed_kmh <= bins_[i].upper_kmh) return i;
  }
  return std::nullopt;
}

std::vector<std::string> distinct_waypoints(const Trip& trip) {
  std::vector<std::string> out;
  std::unordered_set<std::string> seen;
  for (const auto& w : trip.waypoints) {
    if (seen.insert(w).second) out.push_back(w);
  }
  return out;
}

namespace {

std::size_t municipality_row(const std::vector<std::string>& municipalities,
                             const std::string& name) {
  auto it = std::find(municipalities.begin(), municipalities.end(), name);
  if (it == municipalities.end()) throw ValidationError("unknown municipality '" + name + "'");
  return static_cast<std::size_t>(it - municipalities.begin());
}

}  // namespace

LabeledMatrix build_municipality_waypoint(std::span<const Trip> trips, const TowerIndex& towers,
                                          const std::vector<std::string>& municipalities) {
  LabeledMatrix out{"municipality", "waypoint", municipalities, towers.ids(),
                    Matrix::Zero(static_cast<Eigen::Index>(municipalities.size()),
                                 static_cast<Eigen::Index>(towers.towers().size()))};
  for (const auto& trip : trips) {
    const auto row = static_cast<Eigen::Index>(
        municipality_row(municipalities, towers.at(trip.origin).municipality));
    for (const auto& w : distinct_waypoints(trip)) {
      out.values(row, static_cast<Eigen::Index>(*towers.find(w))) += 1.0;
    }
  }
  return out;
}

Matrix tfidf(const Matrix& counts) {
  const auto rows = counts.rows();
  Matrix out = Matrix::Zero(rows, counts.cols());
  for (Eigen::Index t = 0; t < counts.cols(); ++t) {
    const auto df = (counts.col(t).array() > 0.0).count();
    if (df == 0) continue;
    const double idf = std::log(1.0 + static_cast<double>(rows) / static_cast<double>(df));
    for (Eigen::Index m = 0; m < rows; ++m) {
      const double c = counts(m, t);
      if (c > 0.0) out(m, t) = c * idf;
    }
  }
  for (Eigen::Index m = 0; m < rows; ++m) {
    const double total = counts.row(m).sum();
    if (total > 0.0) out.row(m) /= total;
  }
  return out;
}

SpeedMatrices build_speed_matrices(std::span<const Trip> trips, const TowerIndex& towers,
                                   const SpeedRangeScheme& scheme,
                                   const std::vector<std::string>& municipalities) {
  const auto bins = static_cast<Eigen::Index>(scheme.bins().size());
  SpeedMatrices out{
      LabeledMatrix{"municipality", "speed", municipalities, scheme.labels(),
                    Matrix::Zero(static_cast<Eigen::Index>(municipalities.size()), bins)},
      LabeledMatrix{"waypoint", "speed", towers.ids(), scheme.labels(),
                    Matrix::Zero(static_cast<Eigen::Index>(towers.towers().size()), bins)}};
  for (const auto& trip : trips) {
    const auto bin = scheme.bin_of(trip.mean_speed_kmh);
    if (!bin) {
      throw DomainError("trip speed " + std::to_string(trip.mean_speed_kmh) +
                        " km/h outside the speed scheme");
    }
    const auto col = static_cast<Eigen::Index>(*bin);
    const auto row = static_cast<Eigen::Index>(
        municipality_row(municipalities, towers.at(trip.origin).municipality));
    out.municipality_speed.values(row, col) += 1.0;
    for (const auto& w : distinct_waypoints(trip)) {
      out.waypoint_speed.values(static_cast<Eigen::Index>(*towers.find(w)), col) += 1.0;
    }
  }
  return out;
}

std::vector<NetworkEvent> read_events_csv(const std::filesystem::path& path,
                                          std::vector<std::string>* warnings) {
  std::vector<NetworkEvent> events;
  auto stats = read_long_csv(path, {"device", "tower", "timestamp"},
                             [&](const std::vector<std::string>& f) {
                               if (f[0].empty() || f[1].empty()) throw IoError("empty id");
                               events.push_back(NetworkEvent{f[0], f[1], parse_int(f[2])});
                             });
  if (warnings != nullptr) {
    warnings->insert(warnings->end(), stats.messages.begin(), stats.messages.end());
  }
  std::stable_sort(events.begin(), events.end(), [](const NetworkEvent& a, const NetworkEvent& b) {
    if (a.device != b.device) return a.device < b.device;
    return a.timestamp < b.timestamp;
  });
  auto last = std::unique(events.begin(), events.end(),
                          [](const NetworkEvent& a, const NetworkEvent& b) {
                            return a.device == b.device && a.timestamp == b.timestamp;
                          });
  events.erase(last, events.end());
  return events;
}

TowerIndex read_towers_csv(const std::filesystem::path& path) {
  std::vector<Tower> towers;
  read_long_csv(path, {"tower", "x_m", "y_m", "municipality"},
                [&](const std::vector<std::string>& f) {
                  if (f[0].empty() || f[3].empty()) throw IoError("empty id");
                  towers.push_back(Tower{f[0], parse_double(f[1]), parse_double(f[2]), f[3]});
                });
  return TowerIndex(std::move(towers));
}

void write_events_csv(const std::filesystem::path& path, std::span<const NetworkEvent> events) {
  std::ostringstream os;
  os << "device,tower,timestamp\n";
  for (const auto& e : events) {
    os << csv_escape(e.device) << ',' << csv_escape(e.tower) << ',' << e.timestamp << '\n';
  }
  write_text_file(path, os.str());
}

void write_towers_csv(const std::filesystem::path& path, const TowerIndex& towers) {
  std::ostringstream os;
  os << "tower,x_m,y_m,municipality\n";
  for (const auto& t : towers.towers()) {
    os << csv_escape(t.id) << ',' << format_double(t.x_m) << ',' << format_double(t.y_m) << ','
       << csv_escape(t.municipality) << '\n';
  }
  write_text_file(path, os.str());
}

}  // namespace modefusion
