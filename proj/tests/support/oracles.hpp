#pragma once

// Random generators and brute-force reference implementations shared by the
// unit and acceptance suites. Everything here is written independently of the
// library code it checks.

#include "modefusion/mobility_ingest.hpp"
#include "modefusion/relation_graph.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <random>
#include <string>
#include <vector>

namespace oracles {

using modefusion::Matrix;

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  int integer(int lo, int hi) {  // inclusive
    return lo + static_cast<int>(engine_() % static_cast<std::uint64_t>(hi - lo + 1));
  }
  double normal() {
    const double u1 = 1.0 - uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * uniform());
  }
  Matrix matrix(Eigen::Index rows, Eigen::Index cols, double lo = 0.0, double hi = 1.0) {
    Matrix m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j) {
      for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = uniform(lo, hi);
    }
    return m;
  }
  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

inline std::vector<std::string> labels(const std::string& prefix, Eigen::Index n) {
  std::vector<std::string> out;
  for (Eigen::Index i = 0; i < n; ++i) out.push_back(prefix + std::to_string(i));
  return out;
}

struct PlantedGraph {
  modefusion::RelationGraph graph;
  modefusion::RankAssignment ranks;
};

// Chain a - b - c plus a - c, every relation exactly G_i S_ij G_j^T with
// non-negative factors and backbones.
inline PlantedGraph planted_graph(Rng& rng, int max_cardinality = 20, int max_rank = 4) {
  PlantedGraph out;
  const std::vector<std::string> names = {"a", "b", "c"};
  std::map<std::string, Matrix> g;
  for (const auto& name : names) {
    const int k = rng.integer(1, max_rank);
    const int n = rng.integer(std::max(k, 3), max_cardinality);
    g[name] = rng.matrix(n, k, 0.1, 1.0);
    out.graph.add_concept(name, labels(name, n));
    out.ranks.set(name, k);
  }
  auto relate = [&](const char* id, const std::string& s, const std::string& t) {
    const Matrix backbone = rng.matrix(g[s].cols(), g[t].cols(), 0.5, 2.0);
    out.graph.add_relation(id, s, t, g[s] * backbone * g[t].transpose());
  };
  relate("R01", "a", "b");
  relate("R02", "b", "c");
  relate("R03", "a", "c");
  out.graph.set_target_relation("R01");
  return out;
}

// Random graph of 2-4 concepts in a chain, positive entries, no planted structure.
inline PlantedGraph random_graph(Rng& rng) {
  PlantedGraph out;
  const int concepts = rng.integer(2, 4);
  for (int c = 0; c < concepts; ++c) {
    const std::string name = "c" + std::to_string(c);
    const int n = rng.integer(2, 9);
    out.graph.add_concept(name, labels(name, n));
    out.ranks.set(name, rng.integer(1, n));
  }
  for (int c = 0; c + 1 < concepts; ++c) {
    const std::string s = "c" + std::to_string(c);
    const std::string t = "c" + std::to_string(c + 1);
    const auto rows = static_cast<Eigen::Index>(out.graph.concept_at(s).cardinality());
    const auto cols = static_cast<Eigen::Index>(out.graph.concept_at(t).cardinality());
    out.graph.add_relation("R" + std::to_string(c + 1), s, t, rng.matrix(rows, cols, 0.0, 5.0));
  }
  out.graph.set_target_relation("R1");
  return out;
}

// Towers on a 3 km square, a few of them co-located.
inline modefusion::TowerIndex random_towers(Rng& rng, int n) {
  std::vector<modefusion::Tower> towers;
  for (int i = 0; i < n; ++i) {
    modefusion::Tower t{"T" + std::to_string(i), std::round(rng.uniform(0, 3000)),
                        std::round(rng.uniform(0, 3000)), i % 2 == 0 ? "north" : "south"};
    if (i > 0 && rng.uniform() < 0.1) {
      t.x_m = towers.back().x_m;
      t.y_m = towers.back().y_m;
    }
    towers.push_back(t);
  }
  return modefusion::TowerIndex(std::move(towers));
}

// Up to `max_events` events over 1-3 devices, sorted by (device, timestamp).
// Gaps mix slow hand-offs, fast moves and repeated timestamps so the 0.5 km/h
// break rule and both filter bounds are all exercised.
inline std::vector<modefusion::NetworkEvent> random_events(Rng& rng, const modefusion::TowerIndex& towers,
                                                           int max_events = 50) {
  std::vector<modefusion::NetworkEvent> events;
  const int devices = rng.integer(1, 3);
  const int total = rng.integer(0, max_events);
  const auto& list = towers.towers();
  for (int d = 0; d < devices; ++d) {
    const int count = d + 1 == devices ? total - static_cast<int>(events.size())
                                       : rng.integer(0, total - static_cast<int>(events.size()));
    std::int64_t t = 1583107200 + rng.integer(4, 10) * 3600 + rng.integer(0, 3599);
    for (int i = 0; i < count; ++i) {
      const double kind = rng.uniform();
      if (kind < 0.1) {
        t += 0;
      } else if (kind < 0.5) {
        t += rng.integer(5, 600);
      } else if (kind < 0.8) {
        t += rng.integer(600, 7200);
      } else {
        t += rng.integer(1, 30);
      }
      const auto& tower = list[static_cast<std::size_t>(rng.integer(0, static_cast<int>(list.size()) - 1))];
      events.push_back({"dev" + std::to_string(d), tower.id, t});
    }
  }
  std::stable_sort(events.begin(), events.end(), [](const auto& a, const auto& b) {
    return a.device != b.device ? a.device < b.device : a.timestamp < b.timestamp;
  });
  return events;
}

// Reference trip segmentation: mark each consecutive event pair as moving or
// not, then cut the marks into maximal runs.
inline std::vector<modefusion::Trip> reference_trips(const std::vector<modefusion::NetworkEvent>& events,
                                                     const modefusion::TowerIndex& towers,
                                                     double break_kmh = 0.5) {
  std::map<std::string, std::vector<modefusion::NetworkEvent>> by_device;
  std::vector<std::string> order;
  for (const auto& e : events) {
    if (!by_device.count(e.device)) order.push_back(e.device);
    by_device[e.device].push_back(e);
  }
  std::vector<modefusion::Trip> out;
  for (const auto& device : order) {
    const auto& ev = by_device[device];
    std::vector<bool> moving;
    std::vector<double> meters;
    for (std::size_t i = 0; i + 1 < ev.size(); ++i) {
      const auto& a = towers.at(ev[i].tower);
      const auto& b = towers.at(ev[i + 1].tower);
      const double m = std::sqrt((a.x_m - b.x_m) * (a.x_m - b.x_m) + (a.y_m - b.y_m) * (a.y_m - b.y_m));
      const double hours = static_cast<double>(ev[i + 1].timestamp - ev[i].timestamp) / 3600.0;
      moving.push_back(hours > 0.0 && (m / 1000.0) / hours > break_kmh);
      meters.push_back(m);
    }
    std::size_t i = 0;
    while (i < moving.size()) {
      if (!moving[i]) {
        ++i;
        continue;
      }
      std::size_t j = i;
      while (j + 1 < moving.size() && moving[j + 1]) ++j;
      modefusion::Trip trip;
      trip.device = device;
      double m = 0.0;
      for (std::size_t k = i; k <= j + 1; ++k) trip.waypoints.push_back(ev[k].tower);
      for (std::size_t k = i; k <= j; ++k) m += meters[k];
      trip.origin = trip.waypoints.front();
      trip.destination = trip.waypoints.back();
      trip.start = ev[i].timestamp;
      trip.end = ev[j + 1].timestamp;
      trip.mean_speed_kmh = (m / 1000.0) / (static_cast<double>(trip.end - trip.start) / 3600.0);
      out.push_back(trip);
      i = j + 1;
    }
  }
  return out;
}

inline bool reference_keep(const modefusion::Trip& t, double lo = 5.0, double hi = 120.0,
                           std::int64_t from = 6 * 3600, std::int64_t to = 9 * 3600) {
  const std::int64_t tod = ((t.start % 86400) + 86400) % 86400;
  return t.mean_speed_kmh >= lo && t.mean_speed_kmh <= hi && tod >= from && tod < to;
}

// Sample covariance route (n - 1 denominators), accumulated term by term.
inline double reference_pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double cov = 0.0;
  double vx = 0.0;
  double vy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    cov += (x[i] - mx) * (y[i] - my);
    vx += (x[i] - mx) * (x[i] - mx);
    vy += (y[i] - my) * (y[i] - my);
  }
  const double denom = static_cast<double>(n - 1);
  return (cov / denom) / (std::sqrt(vx / denom) * std::sqrt(vy / denom));
}

// Two-sided p for Pearson r by Simpson integration of the Student t density.
inline double reference_pvalue(double r, std::size_t n) {
  const double nu = static_cast<double>(n - 2);
  const double t = std::abs(r) * std::sqrt(nu / (1.0 - r * r));
  const double log_c = std::lgamma((nu + 1) / 2) - std::lgamma(nu / 2) - 0.5 * std::log(nu * std::numbers::pi);
  auto density = [&](double x) { return std::exp(log_c - (nu + 1) / 2 * std::log1p(x * x / nu)); };
  const int steps = 20000;
  const double h = t / steps;
  double s = density(0) + density(t);
  for (int i = 1; i < steps; ++i) s += density(i * h) * (i % 2 == 1 ? 4.0 : 2.0);
  const double central = s * h / 3.0;  // integral over [0, t]
  return std::max(0.0, 1.0 - 2.0 * central);
}

}  // namespace oracles
