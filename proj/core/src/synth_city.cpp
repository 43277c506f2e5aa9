#include "modefusion/synth_city.hpp"

#include "modefusion/app_usage.hpp"
#include "modefusion/csv_io.hpp"
#include "modefusion/errors.hpp"
#include "modefusion/mobility_ingest.hpp"
#include "modefusion/mode_priors.hpp"
#include "sampling.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

namespace modefusion {

namespace fs = std::filesystem;
using detail::Sampler;

namespace {

constexpr Timestamp kFirstDay = 1583107200;  // a Monday, 00:00 local
constexpr double kCellM = 4000.0;
constexpr std::size_t kModes = 4;

// Latent municipality profiles: transit core, car-oriented, peripheral mixed.
constexpr std::array<std::array<double, kModes>, 3> kProfiles = {{
    {0.60, 0.15, 0.20, 0.05},
    {0.20, 0.65, 0.08, 0.07},
    {0.35, 0.25, 0.37, 0.03},
}};

// Speed model per mode: lognormal median and log-sigma, clamped.
constexpr std::array<double, kModes> kSpeedMedian = {20.0, 34.0, 7.0, 30.0};
constexpr std::array<double, kModes> kSpeedSigma = {0.35, 0.40, 0.30, 0.40};
constexpr double kSpeedLo = 5.5;
constexpr double kSpeedHi = 110.0;

const std::vector<std::string> kWorkTypes = {"agriculture", "mining",       "manufacturing",
                                             "construction", "retail",      "transport",
                                             "finance",      "public-admin", "education",
                                             "health"};
const std::vector<std::string> kIncome = {"Q1", "Q2", "Q3", "Q4", "Q5"};
const std::vector<std::string> kInfrastructure = {"railway",  "highway",         "bus-corridor",
                                                  "cycleway", "pedestrian-zone", "parking",
                                                  "taxi-stand"};
// infrastructure x mode
constexpr std::array<std::array<int, kModes>, 7> kInfraModes = {{
    {1, 0, 0, 0},
    {0, 1, 0, 1},
    {1, 0, 0, 0},
    {0, 0, 1, 0},
    {0, 0, 1, 0},
    {0, 1, 0, 0},
    {0, 0, 0, 1},
}};

struct ModeApp {
  const char* domain;
  std::array<double, kModes> affinity;
};

const std::array<ModeApp, 8> kModeApps = {{
    {"transitpay.cl", {1, 0, 0, 0}},
    {"metro-live.cl", {1, 0, 0, 0}},
    {"ridenow.com", {0, 0, 0, 1}},
    {"cabnet.com", {0, 0, 0, 1}},
    {"roadnav.com", {0, 0.5, 0, 0.5}},
    {"fuelspot.com", {0, 1, 0, 0}},
    {"stridetrack.io", {0, 0, 1, 0}},
    {"bikeshare.io", {0, 0, 1, 0}},
}};

const std::array<const char*, 2> kTrackers = {"beacon.adnet-track.com", "sdk.spyware-metrics.net"};
const std::array<const char*, 2> kTrackerExclusions = {"adnet-track.com", "spyware-metrics.net"};
const std::array<const char*, 4> kSubdomains = {"", "api.", "cdn.", "www."};

std::string numbered(const char* prefix, std::size_t i, int width) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%0*zu", prefix, width, i);
  return buf;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// P(speed <= v) for a mode under the clamped lognormal.
double speed_cdf(std::size_t mode, double v) {
  if (v < kSpeedLo) return 0.0;
  if (v >= kSpeedHi) return 1.0;
  return normal_cdf((std::log(v) - std::log(kSpeedMedian[mode])) / kSpeedSigma[mode]);
}

struct City {
  std::vector<std::string> municipalities;
  std::size_t grid_cols = 1;
  std::size_t center = 0;
  std::vector<Tower> towers;
  std::vector<std::size_t> tower_municipality;
  std::vector<std::vector<std::size_t>> towers_of;  // per municipality
  std::vector<std::size_t> rail;                    // sorted by x
  std::vector<std::size_t> highway;                 // sorted by y
  std::vector<std::array<bool, 7>> infrastructure;
};

double dist(const Tower& a, const Tower& b) { return std::hypot(a.x_m - b.x_m, a.y_m - b.y_m); }

std::vector<std::size_t> corridor(const std::vector<Tower>& towers, double line, bool horizontal,
                                  std::size_t min_count) {
  std::vector<std::pair<double, std::size_t>> by_distance;
  for (std::size_t i = 0; i < towers.size(); ++i) {
    const double d = horizontal ? std::abs(towers[i].y_m - line) : std::abs(towers[i].x_m - line);
    by_distance.emplace_back(d, i);
  }
  std::sort(by_distance.begin(), by_distance.end());
  double band = 600.0;
  if (by_distance.size() >= min_count) band = std::max(band, by_distance[min_count - 1].first);
  std::vector<std::size_t> out;
  for (const auto& [d, i] : by_distance) {
    if (d <= band) out.push_back(i);
  }
  std::sort(out.begin(), out.end(), [&](std::size_t a, std::size_t b) {
    return horizontal ? towers[a].x_m < towers[b].x_m : towers[a].y_m < towers[b].y_m;
  });
  return out;
}

City build_city(const SyntheticSpec& spec, const std::vector<std::string>& names, Sampler& rng) {
  City city;
  city.municipalities = names;
  const std::size_t n = names.size();
  city.grid_cols = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n))));
  const std::size_t grid_rows = (n + city.grid_cols - 1) / city.grid_cols;
  const double width = static_cast<double>(city.grid_cols) * kCellM;
  const double height = static_cast<double>(grid_rows) * kCellM;

  double best = 1e300;
  for (std::size_t m = 0; m < n; ++m) {
    const double cx = (static_cast<double>(m % city.grid_cols) + 0.5) * kCellM;
    const double cy = (static_cast<double>(m / city.grid_cols) + 0.5) * kCellM;
    const double d = std::hypot(cx - width / 2, cy - height / 2);
    if (d < best - 1e-9) {
      best = d;
      city.center = m;
    }
  }

  city.towers_of.resize(n);
  for (std::size_t m = 0; m < n; ++m) {
    const std::size_t count = spec.n_towers / n + (m < spec.n_towers % n ? 1 : 0);
    const double x0 = static_cast<double>(m % city.grid_cols) * kCellM;
    const double y0 = static_cast<double>(m / city.grid_cols) * kCellM;
    for (std::size_t k = 0; k < count; ++k) {
      Tower t;
      t.id = numbered("BTS-", city.towers.size() + 1, 4);
      t.x_m = std::round(x0 + rng.uniform(50.0, kCellM - 50.0));
      t.y_m = std::round(y0 + rng.uniform(50.0, kCellM - 50.0));
      t.municipality = names[m];
      city.towers_of[m].push_back(city.towers.size());
      city.tower_municipality.push_back(m);
      city.towers.push_back(std::move(t));
    }
  }

  const std::size_t min_corridor = std::max<std::size_t>(2, spec.n_towers / 12);
  city.rail = corridor(city.towers, height / 2, true, min_corridor);
  city.highway = corridor(city.towers, width / 2, false, min_corridor);

  city.infrastructure.assign(city.towers.size(), {});
  for (std::size_t i : city.rail) city.infrastructure[i][0] = true;
  for (std::size_t i : city.highway) city.infrastructure[i][1] = true;
  for (std::size_t i = 0; i < city.towers.size(); ++i) {
    auto& f = city.infrastructure[i];
    const bool central = city.tower_municipality[i] == city.center;
    f[2] = f[0] ? rng.uniform() < 0.5 : rng.uniform() < 0.15;
    f[3] = rng.uniform() < (central ? 0.5 : 0.2);
    f[4] = central ? rng.uniform() < 0.6 : rng.uniform() < 0.05;
    f[5] = f[1] ? rng.uniform() < 0.6 : rng.uniform() < 0.15;
    f[6] = rng.uniform() < (central ? 0.4 : 0.08);
  }
  return city;
}

std::size_t nearest_in(const City& city, const std::vector<std::size_t>& set, double x, double y) {
  std::size_t best = set.front();
  double best_d = 1e300;
  for (std::size_t i : set) {
    const double d = std::hypot(city.towers[i].x_m - x, city.towers[i].y_m - y);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

std::size_t nearest_any(const City& city, double x, double y) {
  std::size_t best = 0;
  double best_d = 1e300;
  for (std::size_t i = 0; i < city.towers.size(); ++i) {
    const double d = std::hypot(city.towers[i].x_m - x, city.towers[i].y_m - y);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

void push_distinct(std::vector<std::size_t>& path, std::size_t tower) {
  if (std::find(path.begin(), path.end(), tower) == path.end()) path.push_back(tower);
}

std::vector<std::size_t> route(const City& city, std::size_t origin, std::size_t destination,
                               std::size_t mode) {
  std::vector<std::size_t> path{origin};
  const Tower& o = city.towers[origin];
  const Tower& d = city.towers[destination];
  if (mode == 2) {
    const double length = dist(o, d);
    const auto steps = static_cast<std::size_t>(length / 800.0);
    for (std::size_t s = 1; s < steps; ++s) {
      const double f = static_cast<double>(s) / static_cast<double>(steps);
      push_distinct(path, nearest_any(city, o.x_m + f * (d.x_m - o.x_m), o.y_m + f * (d.y_m - o.y_m)));
    }
  } else {
    const bool rail = mode == 0;
    const auto& line = rail ? city.rail : city.highway;
    const std::size_t entry = nearest_in(city, line, o.x_m, o.y_m);
    const std::size_t exit = nearest_in(city, line, d.x_m, d.y_m);
    const auto pos = [&](std::size_t i) {
      return std::find(line.begin(), line.end(), i) - line.begin();
    };
    const auto a = pos(entry);
    const auto b = pos(exit);
    if (a <= b) {
      for (auto k = a; k <= b; ++k) push_distinct(path, line[static_cast<std::size_t>(k)]);
    } else {
      for (auto k = a; k >= b; --k) push_distinct(path, line[static_cast<std::size_t>(k)]);
    }
  }
  // the destination always ends the path, even when a corridor passed it
  path.erase(std::remove(path.begin(), path.end(), destination), path.end());
  path.push_back(destination);
  return path;
}

struct Movement {
  std::vector<NetworkEvent> events;
  Timestamp start = 0;
  Timestamp end = 0;
  double mean_speed_kmh = 0.0;
};

// Emits one event per waypoint, ceil-rounding leg times so that no leg is
// faster than `speed_kmh`.
Movement travel(const City& city, const std::string& device, const std::vector<std::size_t>& path,
                Timestamp start, double speed_kmh) {
  Movement mv;
  mv.start = start;
  Timestamp t = start;
  double distance = 0.0;
  mv.events.push_back({device, city.towers[path.front()].id, t});
  for (std::size_t k = 1; k < path.size(); ++k) {
    const double d = dist(city.towers[path[k - 1]], city.towers[path[k]]);
    distance += d;
    t += std::max<Timestamp>(1, static_cast<Timestamp>(std::ceil(d / (speed_kmh / 3.6))));
    mv.events.push_back({device, city.towers[path[k]].id, t});
  }
  mv.end = t;
  mv.mean_speed_kmh = (distance / 1000.0) / (static_cast<double>(mv.end - mv.start) / 3600.0);
  return mv;
}

Matrix conditional_profiles(std::size_t labels, Sampler& rng) {
  Matrix p(static_cast<Eigen::Index>(kModes), static_cast<Eigen::Index>(labels));
  for (Eigen::Index m = 0; m < p.rows(); ++m) {
    for (Eigen::Index k = 0; k < p.cols(); ++k) p(m, k) = std::exp(1.2 * rng.normal());
    p.row(m) /= p.row(m).sum();
  }
  return p;
}

// diag(population) * shares * P(label | mode), with multiplicative noise.
Matrix attribute_counts(const Vector& population, const Matrix& shares, const Matrix& profiles,
                        double noise, Sampler& rng) {
  Matrix out = population.asDiagonal() * shares * profiles;
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    for (Eigen::Index j = 0; j < out.cols(); ++j) {
      out(i, j) = std::round(std::max(0.0, out(i, j) * (1.0 + noise * rng.uniform(-1.0, 1.0))));
    }
  }
  return out;
}

Matrix row_normalized(Matrix m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const double s = m.row(i).sum();
    if (s > 0.0) m.row(i) /= s;
  }
  return m;
}

nlohmann::json relation_entry(const char* id, const char* source, const char* target,
                              const std::string& path, const char* provenance) {
  return {{"id", id}, {"source", source}, {"target", target}, {"path", path}, {"provenance", provenance}};
}

}  // namespace

void SyntheticSpec::check() const {
  if (n_municipalities < 3) throw ValidationError("synthetic city needs at least 3 municipalities");
  if (n_towers < 2 * n_municipalities) {
    throw ValidationError("synthetic city needs at least two towers per municipality");
  }
  if (n_devices < 1) throw ValidationError("synthetic city needs at least one device");
  if (n_apps < kModeApps.size() + 4) {
    throw ValidationError("synthetic city needs at least " + std::to_string(kModeApps.size() + 4) +
                          " apps");
  }
  if (n_days < 1) throw ValidationError("synthetic city needs at least one day");
  if (!(noise_level >= 0.0 && noise_level < 1.0)) {
    throw ValidationError("noise_level must be in [0, 1)");
  }
  if (planted_split.municipalities.empty()) return;
  if (planted_split.municipalities.size() != n_municipalities ||
      planted_split.counts.rows() != static_cast<Eigen::Index>(n_municipalities) ||
      planted_split.counts.cols() != static_cast<Eigen::Index>(kModes)) {
    throw ValidationError("planted split does not match n_municipalities x 4");
  }
  if (!planted_split.counts.allFinite() || (planted_split.counts.array() < 0.0).any()) {
    throw ValidationError("planted split must be finite and non-negative");
  }
  if ((planted_split.counts.rowwise().sum().array() <= 0.0).any()) {
    throw ValidationError("every planted municipality needs trips");
  }
}

std::vector<std::string> synthetic_municipalities(std::size_t n) {
  std::vector<std::string> out;
  const int width = n >= 100 ? 3 : 2;
  for (std::size_t i = 1; i <= n; ++i) out.push_back(numbered("M", i, width));
  return out;
}

ModeSplit make_planted_split(std::size_t n_municipalities, std::uint64_t seed) {
  Sampler rng(seed * 0x9E3779B97F4A7C15ULL + 17);
  ModeSplit out{synthetic_municipalities(n_municipalities),
                Matrix(static_cast<Eigen::Index>(n_municipalities), 4)};
  for (Eigen::Index i = 0; i < out.counts.rows(); ++i) {
    std::array<double, 3> w{};
    double total = 0.0;
    for (double& x : w) {
      const double u = rng.uniform();
      x = u * u + 0.05;
      total += x;
    }
    const double trips = std::round(rng.uniform(20000.0, 120000.0));
    for (Eigen::Index j = 0; j < 4; ++j) {
      double share = 0.0;
      for (std::size_t p = 0; p < 3; ++p) share += w[p] / total * kProfiles[p][static_cast<std::size_t>(j)];
      out.counts(i, j) = std::round(trips * share);
    }
  }
  return out;
}

SyntheticSpec SyntheticSpec::with_default_split(std::size_t n_municipalities, std::size_t n_towers,
                                                std::size_t n_devices, double noise_level,
                                                std::uint64_t seed) {
  SyntheticSpec spec;
  spec.n_municipalities = n_municipalities;
  spec.n_towers = n_towers;
  spec.n_devices = n_devices;
  spec.noise_level = noise_level;
  spec.seed = seed;
  spec.planted_split = make_planted_split(n_municipalities, seed);
  return spec;
}

ModeSplit planted_truth(const SyntheticSpec& spec) {
  spec.check();
  if (!spec.planted_split.municipalities.empty()) return spec.planted_split;
  return make_planted_split(spec.n_municipalities, spec.seed);
}

SyntheticBundle generate(const SyntheticSpec& spec, const fs::path& out_dir) {
  const ModeSplit truth = planted_truth(spec);
  const auto& names = truth.municipalities;
  const std::size_t n = names.size();
  const double noise = spec.noise_level;
  Sampler rng(spec.seed);

  const Vector trips_per_municipality = truth.counts.rowwise().sum();
  Matrix shares = truth.counts;
  for (Eigen::Index i = 0; i < shares.rows(); ++i) shares.row(i) /= trips_per_municipality(i);

  SyntheticBundle bundle;
  bundle.root = out_dir;
  bundle.pipeline_manifest = out_dir / "pipeline.json";
  bundle.truth = out_dir / "truth.csv";
  write_matrix_csv(bundle.truth, truth.to_labeled());

  // Official statistics and the base-year survey that projects onto the truth.
  OfficialStats stats;
  stats.metro_base = 2400000.0;
  stats.metro_new = std::round(stats.metro_base * 0.563);
  for (std::size_t i = 0; i < n; ++i) {
    MunicipalityStats s;
    s.population_new = std::round(trips_per_municipality(static_cast<Eigen::Index>(i)) /
                                  0.4);
    s.population_base = std::round(s.population_new / (1.0 + rng.uniform(-0.05, 0.15)));
    s.permits_base = std::round(s.population_base * rng.uniform(0.15, 0.35));
    s.permits_new = std::round(s.permits_base * (1.0 + rng.uniform(0.05, 0.5)));
    stats.municipalities.emplace(names[i], s);
  }
  write_stats_csv(out_dir / "stats.csv", out_dir / "metro.csv", stats, names);

  ModeSplit base{names, Matrix(static_cast<Eigen::Index>(n), 4)};
  for (std::size_t i = 0; i < n; ++i) {
    const auto& s = stats.municipalities.at(names[i]);
    const double p = s.population_new / s.population_base;
    const auto r = static_cast<Eigen::Index>(i);
    std::array<double, kModes> target{};
    for (std::size_t j = 0; j < kModes; ++j) {
      target[j] = truth.counts(r, static_cast<Eigen::Index>(j)) * (1.0 + noise * rng.uniform(-1.0, 1.0));
    }
    base.counts(r, 0) = target[0] / (p * std::sqrt(stats.metro_new / stats.metro_base));
    base.counts(r, 1) = target[1] / (p * std::sqrt(s.permits_new / s.permits_base));
    base.counts(r, 2) = target[2] / (p * stats.active_factor);
    base.counts(r, 3) = target[3] / (p * stats.taxi_factor) - 1.0;
    if (base.counts(r, 3) < 0.0) {
      throw ValidationError("municipality '" + names[i] +
                            "': taxi trips too few to back-solve a base-year survey");
    }
  }
  write_matrix_csv(out_dir / "base_split.csv", base.to_labeled());

  // Geography.
  const City city = build_city(spec, names, rng);
  write_towers_csv(out_dir / "towers.csv", TowerIndex(city.towers));

  {
    std::ostringstream os;
    os << "municipality,macro_area\n";
    const std::size_t ccol = city.center % city.grid_cols;
    const std::size_t crow = city.center / city.grid_cols;
    for (std::size_t m = 0; m < n; ++m) {
      const auto dx = static_cast<long>(m % city.grid_cols) - static_cast<long>(ccol);
      const auto dy = static_cast<long>(m / city.grid_cols) - static_cast<long>(crow);
      const char* area = "center";
      if (m != city.center) {
        if (std::labs(dx) >= std::labs(dy)) {
          area = dx > 0 ? "east" : "west";
        } else {
          area = dy > 0 ? "north" : "south";
        }
      }
      os << names[m] << ',' << area << '\n';
    }
    write_text_file(out_dir / "macro_areas.csv", os.str());
  }

  // Devices and their network events.
  std::vector<NetworkEvent> events;
  std::vector<std::array<double, kModes>> traffic(city.towers.size(), std::array<double, kModes>{});
  std::ostringstream ledger;
  ledger << "device,mode,origin,destination,start,end,n_waypoints,mean_speed_kmh\n";
  const std::vector<double> municipality_weights(trips_per_municipality.data(),
                                                 trips_per_municipality.data() + n);
  const TripFilter window;
  for (std::size_t d = 0; d < spec.n_devices; ++d) {
    const std::string device = numbered("D", d + 1, 6);
    const std::size_t home_m = rng.categorical(municipality_weights);
    const auto row = static_cast<Eigen::Index>(home_m);
    const std::array<double, kModes> mode_weights = {shares(row, 0), shares(row, 1), shares(row, 2),
                                                     shares(row, 3)};
    const std::size_t mode = rng.categorical(mode_weights);
    const std::size_t home = city.towers_of[home_m][rng.index(city.towers_of[home_m].size())];
    const bool stationary = rng.uniform() < 0.05;

    std::size_t work = home;
    if (mode == 2) {
      std::vector<std::size_t> near;
      for (std::size_t i = 0; i < city.towers.size(); ++i) {
        const double dd = dist(city.towers[i], city.towers[home]);
        if (i != home && dd > 600.0 && dd < 3500.0) near.push_back(i);
      }
      if (near.empty()) {
        double best = 1e300;
        for (std::size_t i = 0; i < city.towers.size(); ++i) {
          const double dd = dist(city.towers[i], city.towers[home]);
          if (i != home && dd < best) {
            best = dd;
            work = i;
          }
        }
      } else {
        work = near[rng.index(near.size())];
      }
    } else {
      while (work == home) {
        const std::size_t wm = rng.uniform() < 0.35 ? city.center : rng.index(n);
        work = city.towers_of[wm][rng.index(city.towers_of[wm].size())];
      }
    }
    const std::vector<std::size_t> path = route(city, home, work, mode);
    std::vector<std::size_t> back(path.rbegin(), path.rend());
    const double speed =
        std::clamp(rng.lognormal(kSpeedMedian[mode], kSpeedSigma[mode]), kSpeedLo, kSpeedHi);

    for (std::size_t day = 0; day < spec.n_days; ++day) {
      const Timestamp midnight = kFirstDay + static_cast<Timestamp>(day) * 86400;
      auto at = [&](double lo_h, double hi_h) {
        return midnight + static_cast<Timestamp>(std::round(rng.uniform(lo_h, hi_h) * 3600.0));
      };
      const std::string& home_id = city.towers[home].id;
      events.push_back({device, home_id, at(0.2, 4.0)});
      events.push_back({device, home_id, at(4.5, 5.9)});
      if (stationary) {
        events.push_back({device, home_id, at(10.0, 14.0)});
        events.push_back({device, home_id, at(19.0, 23.5)});
        continue;
      }
      const Movement morning = travel(city, device, path, at(6.1, 8.7), speed);
      events.insert(events.end(), morning.events.begin(), morning.events.end());
      const Timestamp dwell = morning.end + static_cast<Timestamp>(rng.uniform(900.0, 3000.0));
      const Timestamp noon = std::max(dwell + 600, at(12.2, 12.8));
      events.push_back({device, city.towers[work].id, dwell});
      events.push_back({device, city.towers[work].id, noon});
      const Movement evening = travel(city, device, back, std::max(noon + 600, at(17.0, 19.0)), speed);
      events.insert(events.end(), evening.events.begin(), evening.events.end());
      events.push_back({device, home_id, evening.end + static_cast<Timestamp>(rng.uniform(600.0, 2400.0))});
      for (std::size_t w : path) traffic[w][mode] += 2.0;

      const Timestamp tod = morning.start - midnight;
      if (tod >= window.window_start_s && tod < window.window_end_s &&
          morning.mean_speed_kmh >= window.speed_min_kmh && morning.mean_speed_kmh <= window.speed_max_kmh) {
        ++bundle.ledger_trips;
        ledger << device << ',' << kModeLabels[mode] << ',' << city.towers[home].id << ','
               << city.towers[work].id << ',' << morning.start << ',' << morning.end << ','
               << path.size() << ',' << format_double(morning.mean_speed_kmh) << '\n';
      }
    }
  }
  write_events_csv(out_dir / "events.csv", events);
  write_text_file(out_dir / "trip_ledger.csv", ledger.str());

  // Application usage seen by deep packet inspection.
  double mean_traffic = 0.0;
  for (const auto& t : traffic) mean_traffic += t[0] + t[1] + t[2] + t[3];
  mean_traffic = std::max(1.0, mean_traffic / static_cast<double>(city.towers.size()));
  std::vector<double> activity(city.towers.size());
  for (std::size_t i = 0; i < city.towers.size(); ++i) {
    const auto& t = traffic[i];
    activity[i] = 0.5 + (t[0] + t[1] + t[2] + t[3]) / mean_traffic;
  }

  std::vector<UsageRecord> usage;
  auto emit = [&](std::size_t tower, const std::string& domain, double lambda, bool variants) {
    lambda *= 1.0 + noise * rng.uniform(-1.0, 1.0);
    const std::size_t nv = variants ? 1 + rng.index(3) : 1;
    for (std::size_t v = 0; v < nv; ++v) {
      const auto c = rng.poisson(lambda / static_cast<double>(nv));
      if (c == 0) continue;
      std::string name = std::string(kSubdomains[v]) + domain;
      if (v == 1 && tower % 7 == 0) {
        std::transform(name.begin(), name.end(), name.begin(),
                       [](unsigned char ch) { return static_cast<char>(std::toupper(ch)); });
        name += '.';
      }
      usage.push_back({city.towers[tower].id, name, static_cast<double>(c)});
    }
  };

  const std::size_t n_local = std::max<std::size_t>(1, spec.n_apps / 10);
  const std::size_t n_generic = spec.n_apps - kModeApps.size() - n_local;
  std::vector<double> popularity(n_generic);
  for (auto& p : popularity) p = rng.uniform(20.0, 200.0);
  std::vector<std::vector<std::size_t>> local_sites(n_local);
  for (auto& sites : local_sites) {
    sites.push_back(rng.index(city.towers.size()));
    if (rng.uniform() < 0.5) sites.push_back(rng.index(city.towers.size()));
  }

  for (std::size_t t = 0; t < city.towers.size(); ++t) {
    for (std::size_t g = 0; g < n_generic; ++g) {
      emit(t, numbered("app", g + 1, 2) + ".com", popularity[g] * activity[t], true);
    }
    for (const auto& app : kModeApps) {
      double mode_traffic = 0.0;
      for (std::size_t m = 0; m < kModes; ++m) mode_traffic += app.affinity[m] * traffic[t][m];
      emit(t, app.domain, 8.0 * activity[t] + 60.0 * mode_traffic / mean_traffic, true);
    }
    for (std::size_t l = 0; l < n_local; ++l) {
      const auto& sites = local_sites[l];
      if (std::find(sites.begin(), sites.end(), t) != sites.end()) {
        emit(t, numbered("localnews", l + 1, 2) + ".cl", 300.0, false);
      }
    }
    for (const char* tracker : kTrackers) emit(t, tracker, 30.0 * activity[t], false);
  }
  write_usage_csv(out_dir / "usage.csv", usage);

  {
    std::string text = "# unified domains never counted as user applications\n";
    for (const char* e : kTrackerExclusions) text += std::string(e) + "\n";
    write_text_file(out_dir / "exclusions.txt", text);
    std::ostringstream os;
    os << "# app,mode[,mode]\n";
    for (const auto& app : kModeApps) {
      os << app.domain;
      for (std::size_t m = 0; m < kModes; ++m) {
        if (app.affinity[m] > 0.0) os << ',' << kModeLabels[m];
      }
      os << '\n';
    }
    write_text_file(out_dir / "associations.csv", os.str());
  }

  // Prepared relations.
  const fs::path rel = out_dir / "relations";
  Vector pop_new(static_cast<Eigen::Index>(n));
  Vector pop_base(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    pop_new(static_cast<Eigen::Index>(i)) = stats.municipalities.at(names[i]).population_new;
    pop_base(static_cast<Eigen::Index>(i)) = stats.municipalities.at(names[i]).population_base;
  }

  const Matrix work_profiles = conditional_profiles(kWorkTypes.size(), rng);
  write_matrix_csv(rel / "R02.csv", {"municipality", "work_type", names, kWorkTypes,
                                     attribute_counts(pop_new, shares, work_profiles, noise, rng)});

  std::vector<std::string> origins;
  for (std::size_t k = 1; k <= 6; ++k) origins.push_back(numbered("origin-", k, 2));
  const Matrix migration_profiles = conditional_profiles(origins.size(), rng);
  write_matrix_csv(rel / "R03.csv",
                   {"municipality", "migration", names, origins,
                    attribute_counts(pop_new * 0.06, shares, migration_profiles, noise, rng)});

  std::vector<std::string> age_labels;
  std::vector<std::string> groups;
  for (int a = 0; a < 100; a += 10) groups.push_back(numbered("", static_cast<std::size_t>(a), 2) + "-" +
                                                     numbered("", static_cast<std::size_t>(a + 9), 2));
  groups.emplace_back("100+");
  for (const auto& g : groups) age_labels.push_back("base:" + g);
  for (const auto& g : groups) age_labels.push_back("new:" + g);
  const Matrix age_profiles = conditional_profiles(groups.size(), rng);
  Matrix ages(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(age_labels.size()));
  const auto g = static_cast<Eigen::Index>(groups.size());
  ages.leftCols(g) = attribute_counts(pop_base, shares, age_profiles, noise, rng);
  ages.rightCols(g) = attribute_counts(pop_new, shares, age_profiles, noise, rng);
  write_matrix_csv(rel / "R04.csv", {"municipality", "population", names, age_labels, ages});

  const Matrix income_profiles = conditional_profiles(kIncome.size(), rng);
  write_matrix_csv(rel / "R06.csv", {"municipality", "income", names, kIncome,
                                     attribute_counts(pop_new, shares, income_profiles, noise, rng)});

  Matrix infra(static_cast<Eigen::Index>(city.towers.size()), 7);
  for (std::size_t i = 0; i < city.towers.size(); ++i) {
    for (std::size_t k = 0; k < 7; ++k) {
      infra(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = city.infrastructure[i][k] ? 1 : 0;
    }
  }
  std::vector<std::string> tower_ids;
  for (const auto& t : city.towers) tower_ids.push_back(t.id);
  write_matrix_csv(rel / "R10.csv", {"waypoint", "infrastructure", tower_ids, kInfrastructure, infra});

  // Survey cross-tabulations: share of each row's trips per mode.
  const Vector base_mode_totals = base.counts.colwise().sum().transpose();
  Matrix income_mode = (income_profiles.transpose() * base_mode_totals.asDiagonal()).eval();
  write_matrix_csv(rel / "R11.csv",
                   {"income", "mode", kIncome, mode_labels(), row_normalized(income_mode)});

  const SpeedRangeScheme scheme = SpeedRangeScheme::standard();
  Matrix speed_mode(static_cast<Eigen::Index>(SpeedRangeScheme::kBins), 4);
  for (std::size_t b = 0; b < SpeedRangeScheme::kBins; ++b) {
    const auto& bin = scheme.bins()[b];
    for (std::size_t m = 0; m < kModes; ++m) {
      speed_mode(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(m)) =
          base_mode_totals(static_cast<Eigen::Index>(m)) *
          (speed_cdf(m, bin.upper_kmh) - speed_cdf(m, bin.lower_kmh));
    }
  }
  write_matrix_csv(rel / "R12.csv",
                   {"speed", "mode", scheme.labels(), mode_labels(), row_normalized(speed_mode)});

  Matrix infra_mode(7, 4);
  for (Eigen::Index k = 0; k < 7; ++k) {
    for (Eigen::Index m = 0; m < 4; ++m) {
      infra_mode(k, m) = kInfraModes[static_cast<std::size_t>(k)][static_cast<std::size_t>(m)];
    }
  }
  write_matrix_csv(rel / "R14.csv", {"infrastructure", "mode", kInfrastructure, mode_labels(), infra_mode});

  // Manifests.
  nlohmann::json relations = nlohmann::json::array();
  relations.push_back(relation_entry("R01", "municipality", "mode", "derived/R01.csv", "derived"));
  relations.push_back(relation_entry("R02", "municipality", "work_type", "relations/R02.csv", "census"));
  relations.push_back(relation_entry("R03", "municipality", "migration", "relations/R03.csv", "census"));
  relations.push_back(relation_entry("R04", "municipality", "population", "relations/R04.csv", "census"));
  relations.push_back(relation_entry("R05", "municipality", "waypoint", "derived/R05.csv", "mobile"));
  relations.push_back(relation_entry("R06", "municipality", "income", "relations/R06.csv", "census"));
  relations.push_back(relation_entry("R07", "municipality", "speed", "derived/R07.csv", "mobile"));
  relations.push_back(relation_entry("R08", "waypoint", "speed", "derived/R08.csv", "mobile"));
  relations.push_back(relation_entry("R09", "waypoint", "application", "derived/R09.csv", "dpi"));
  relations.push_back(relation_entry("R10", "waypoint", "infrastructure", "relations/R10.csv", "osm"));
  relations.push_back(relation_entry("R11", "income", "mode", "relations/R11.csv", "survey"));
  relations.push_back(relation_entry("R12", "speed", "mode", "relations/R12.csv", "survey"));
  relations.push_back(relation_entry("R13", "application", "mode", "derived/R13.csv", "dpi"));
  relations.push_back(relation_entry("R14", "infrastructure", "mode", "relations/R14.csv", "manual"));
  write_text_file(out_dir / "relations.json",
                  nlohmann::json{{"target", "R01"}, {"relations", relations}}.dump(2) + "\n");

  const nlohmann::json run_config = {
      {"data_configuration", "all"},
      {"n_instances", 20},
      {"base_seed", 1},
      {"solver", {{"max_iterations", 2000}, {"relative_tolerance", 1e-5}, {"epsilon", 1e-12}}},
      {"macro_areas", "macro_areas.csv"},
      {"reference_split", "truth.csv"},
  };
  write_text_file(out_dir / "run_config.json", run_config.dump(2) + "\n");

  const nlohmann::json pipeline = {
      {"relation_manifest", "relations.json"},
      {"events", "events.csv"},
      {"towers", "towers.csv"},
      {"usage", "usage.csv"},
      {"associations", "associations.csv"},
      {"exclusions", "exclusions.txt"},
      {"stats", "stats.csv"},
      {"metro", "metro.csv"},
      {"base_split", "base_split.csv"},
      {"run_config", "run_config.json"},
      {"derived_dir", "derived"},
      {"output_dir", "out"},
  };
  write_text_file(bundle.pipeline_manifest, pipeline.dump(2) + "\n");
  return bundle;
}

}  // namespace modefusion
