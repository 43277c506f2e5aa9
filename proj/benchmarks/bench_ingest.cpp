#include "modefusion/app_usage.hpp"
#include "modefusion/mobility_ingest.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace modefusion;

namespace {

TowerIndex grid_towers(int side) {
  std::vector<Tower> towers;
  for (int i = 0; i < side * side; ++i) {
    towers.push_back({"T" + std::to_string(i), 800.0 * (i % side), 800.0 * (i / side),
                      i % side < side / 2 ? "west" : "east"});
  }
  return TowerIndex(towers);
}

std::vector<NetworkEvent> random_walks(const TowerIndex& towers, int devices, int per_device) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<std::size_t> pick(0, towers.towers().size() - 1);
  std::uniform_int_distribution<int> gap(30, 900);
  std::vector<NetworkEvent> out;
  for (int d = 0; d < devices; ++d) {
    Timestamp t = 1583107200 + 6 * 3600;
    for (int k = 0; k < per_device; ++k) {
      t += gap(rng);
      out.push_back({"d" + std::to_string(d), towers.towers()[pick(rng)].id, t});
    }
  }
  return out;
}

void BM_ExtractTrips(benchmark::State& state) {
  const TowerIndex towers = grid_towers(15);
  const auto events = random_walks(towers, static_cast<int>(state.range(0)), 40);
  for (auto _ : state) benchmark::DoNotOptimize(extract_trips(events, towers));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(events.size()));
}
BENCHMARK(BM_ExtractTrips)->Arg(100)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_Tfidf(benchmark::State& state) {
  std::mt19937_64 rng(5);
  std::poisson_distribution<int> counts(0.7);
  Matrix m(state.range(0), 10 * state.range(0));
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = counts(rng);
  for (auto _ : state) benchmark::DoNotOptimize(tfidf(m));
}
BENCHMARK(BM_Tfidf)->Arg(20)->Arg(100);

void BM_LogOdds(benchmark::State& state) {
  std::mt19937_64 rng(6);
  std::poisson_distribution<int> counts(4.0);
  UsageCounts u;
  for (int i = 0; i < state.range(0); ++i) u.towers.push_back("T" + std::to_string(i));
  for (int i = 0; i < 200; ++i) u.apps.push_back("app" + std::to_string(i) + ".com");
  u.counts = Matrix(state.range(0), 200);
  for (Eigen::Index i = 0; i < u.counts.size(); ++i) u.counts.data()[i] = counts(rng);
  for (auto _ : state) benchmark::DoNotOptimize(log_odds_dirichlet(u));
}
BENCHMARK(BM_LogOdds)->Arg(200)->Arg(2000);

}  // namespace
