#include "modefusion/trifactor.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace modefusion;

namespace {

std::vector<std::string> labels(const std::string& prefix, Eigen::Index n) {
  std::vector<std::string> out;
  for (Eigen::Index i = 0; i < n; ++i) out.push_back(prefix + std::to_string(i));
  return out;
}

Matrix random_matrix(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

// Star graph around a municipality concept, roughly the shape of a city run.
RelationGraph city_graph(Eigen::Index scale) {
  std::mt19937_64 rng(7);
  RelationGraph g;
  g.add_concept("municipality", labels("m", scale));
  g.add_concept("mode", labels("k", 4));
  g.add_concept("waypoint", labels("w", 20 * scale));
  g.add_concept("app", labels("a", 4 * scale));
  g.add_relation("R01", "municipality", "mode", random_matrix(rng, scale, 4));
  g.add_relation("R05", "municipality", "waypoint", random_matrix(rng, scale, 20 * scale));
  g.add_relation("R09", "waypoint", "app", random_matrix(rng, 20 * scale, 4 * scale));
  g.add_relation("R13", "app", "mode", random_matrix(rng, 4 * scale, 4));
  g.set_target_relation("R01");
  return g;
}

void BM_FitIterations(benchmark::State& state) {
  const RelationGraph g = city_graph(state.range(0));
  const RankAssignment ranks = g.heuristic_ranks();
  SolverConfig config;
  config.max_iterations = 50;
  config.relative_tolerance = 1e-300;
  for (auto _ : state) benchmark::DoNotOptimize(fit(g, ranks, config));
  state.SetItemsProcessed(state.iterations() * config.max_iterations);
}
BENCHMARK(BM_FitIterations)->Arg(10)->Arg(20)->Arg(40)->Unit(benchmark::kMillisecond);

void BM_UpdateBackbones(benchmark::State& state) {
  const RelationGraph g = city_graph(state.range(0));
  const FactorSet fs = initialize(g, g.heuristic_ranks(), 1);
  for (auto _ : state) benchmark::DoNotOptimize(update_backbones(g, fs));
}
BENCHMARK(BM_UpdateBackbones)->Arg(10)->Arg(40);

}  // namespace
