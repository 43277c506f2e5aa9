#include "modefusion/errors.hpp"
#include "modefusion/fusion_runner.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace modefusion;

namespace {

const std::vector<std::string> kAll = {"R01", "R02", "R03", "R04", "R05", "R06", "R07",
                                       "R08", "R09", "R10", "R11", "R12", "R13", "R14"};

// Concepts chained so that every relation id in kAll is present.
RelationGraph fourteen_relations() {
  RelationGraph g;
  g.add_concept("c0", {"x"});
  for (std::size_t i = 0; i < kAll.size(); ++i) {
    g.add_concept("c" + std::to_string(i + 1), {"x"});
    g.add_relation(kAll[i], "c0", "c" + std::to_string(i + 1), Matrix::Ones(1, 1));
  }
  g.set_target_relation("R01");
  return g;
}

std::vector<std::string> ids(const RelationGraph& g) {
  std::vector<std::string> out;
  for (const auto& r : g.relations()) out.push_back(r.id);
  std::sort(out.begin(), out.end());
  return out;
}

// Municipality x mode target plus two side relations, all from planted factors.
RelationGraph small_city(oracles::Rng& rng, int municipalities = 6) {
  const Matrix gm = rng.matrix(municipalities, 2, 0.0, 1.0);
  const Matrix go = rng.matrix(4, 2, 0.0, 1.0);
  const Matrix gx = rng.matrix(5, 2, 0.0, 1.0);
  const Matrix gy = rng.matrix(3, 2, 0.0, 1.0);
  RelationGraph g;
  g.add_concept("municipality", oracles::labels("m", municipalities));
  g.add_concept("mode", mode_labels());
  g.add_concept("x", oracles::labels("x", 5));
  g.add_concept("y", oracles::labels("y", 3));
  g.add_relation("R01", "municipality", "mode", 100.0 * gm * rng.matrix(2, 2, 0.2, 1.0) * go.transpose());
  g.add_relation("R02", "municipality", "x", gm * rng.matrix(2, 2, 0.2, 1.0) * gx.transpose());
  g.add_relation("R03", "x", "y", gx * rng.matrix(2, 2, 0.2, 1.0) * gy.transpose());
  g.set_target_relation("R01");
  return g;
}

RankAssignment twos() {
  RankAssignment r;
  for (const char* c : {"municipality", "mode", "x", "y"}) r.set(c, 2);
  return r;
}

InstanceResult instance(std::uint64_t seed, double e) {
  InstanceResult r;
  r.seed = seed;
  r.global_error = e;
  return r;
}

TEST(DataConfiguration, ParseAndPrint) {
  EXPECT_EQ(parse_data_configuration("ALL"), DataConfiguration::All);
  EXPECT_EQ(parse_data_configuration("no_dpi"), DataConfiguration::NoDpi);
  EXPECT_EQ(parse_data_configuration("No-Mobile"), DataConfiguration::NoMobile);
  EXPECT_THROW(parse_data_configuration("some"), ValidationError);
  for (auto c : {DataConfiguration::All, DataConfiguration::NoDpi, DataConfiguration::NoMobile}) {
    EXPECT_EQ(parse_data_configuration(to_string(c)), c);
  }
}

TEST(DataConfiguration, DroppedRelations) {
  const RelationGraph g = fourteen_relations();
  EXPECT_EQ(ids(apply_configuration(g, DataConfiguration::All)), kAll);
  const auto no_dpi = ids(apply_configuration(g, DataConfiguration::NoDpi));
  EXPECT_EQ(no_dpi.size(), 12u);
  EXPECT_EQ(std::count(no_dpi.begin(), no_dpi.end(), "R09"), 0);
  EXPECT_EQ(std::count(no_dpi.begin(), no_dpi.end(), "R13"), 0);
  EXPECT_EQ(ids(apply_configuration(g, DataConfiguration::NoMobile)),
            (std::vector<std::string>{"R01", "R02", "R03", "R04", "R06", "R11", "R12", "R14"}));
  EXPECT_TRUE(apply_configuration(g, DataConfiguration::NoMobile).validate().empty());
}

TEST(GlobalError, Examples) {
  FitReport r;
  r.per_relation_error = {{"R02", 0.04}, {"R03", 0.25}};
  EXPECT_NEAR(global_error(r), 0.1, 1e-12);
  r.per_relation_error["R01"] = 99.0;
  EXPECT_NEAR(global_error(r), 0.1, 1e-12);
  r.per_relation_error["R04"] = 0.9;  // 0.04 * 0.25 * 0.9 = 0.009
  EXPECT_NEAR(global_error(r), std::cbrt(0.009), 1e-12);
  r.per_relation_error = {{"R02", 0.0}, {"R03", 1e-15}};
  EXPECT_NEAR(global_error(r), 1e-15, 1e-27);
  r.per_relation_error = {{"R01", 0.5}};
  EXPECT_THROW(global_error(r), ValidationError);
}

TEST(GlobalError, InvariantToTargetEntry) {
  oracles::Rng rng(50);
  for (int trial = 0; trial < 500; ++trial) {
    FitReport r;
    const int n = rng.integer(1, 13);
    for (int i = 0; i < n; ++i) r.per_relation_error["R" + std::to_string(10 + i)] = rng.uniform(0.0, 2.0);
    const double base = global_error(r);
    r.per_relation_error["R01"] = rng.uniform(0.0, 1e6);
    EXPECT_EQ(global_error(r), base);
    double log_sum = 0;
    for (int i = 0; i < n; ++i) log_sum += std::log(std::max(1e-15, r.per_relation_error["R" + std::to_string(10 + i)]));
    EXPECT_NEAR(base, std::exp(log_sum / n), 1e-12 * base);
  }
}

TEST(SelectBest, Examples) {
  const std::vector<InstanceResult> a = {instance(0, 0.3), instance(1, 0.1), instance(2, 0.2)};
  EXPECT_EQ(select_best(a).seed, 1u);
  const std::vector<InstanceResult> tie = {instance(4, 0.5), instance(2, 0.1), instance(3, 0.1)};
  EXPECT_EQ(select_best(tie).seed, 2u);
  EXPECT_THROW(select_best({}), ValidationError);
}

TEST(SelectBest, AlwaysTheMinimum) {
  oracles::Rng rng(51);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<InstanceResult> v;
    const int n = rng.integer(1, 30);
    for (int i = 0; i < n; ++i) v.push_back(instance(static_cast<std::uint64_t>(rng.integer(0, 1000)),
                                                     static_cast<double>(rng.integer(1, 8)) / 10.0));
    const auto& best = select_best(v);
    for (const auto& r : v) {
      EXPECT_LE(best.global_error, r.global_error);
      if (r.global_error == best.global_error) EXPECT_LE(best.seed, r.seed);
    }
  }
}

TEST(ModeShares, Example) {
  ModeSplit s;
  s.municipalities = {"a", "b", "c"};
  s.counts = Matrix(3, 4);
  s.counts << 30, 50, 15, 5,
              0, 0, 0, 0,
              60, 100, 30, 10;
  const ModeShares sh = mode_shares(s);
  EXPECT_EQ(sh.citywide, (std::vector<double>{0.3, 0.5, 0.15, 0.05}));
  EXPECT_TRUE(sh.defined[0]);
  EXPECT_FALSE(sh.defined[1]);
  EXPECT_TRUE(std::isnan(sh.per_municipality(1, 0)));
  EXPECT_NEAR(sh.per_municipality.row(2).sum(), 1.0, 1e-15);
  s.counts.setZero();
  EXPECT_THROW(mode_shares(s), DomainError);
}

TEST(Pearson, Examples) {
  Vector x(3);
  x << 1, 2, 3;
  Vector y(3);
  y << 2, 4, 6;
  EXPECT_DOUBLE_EQ(pearson(x, y), 1.0);
  y << 3, 2, 1;
  EXPECT_DOUBLE_EQ(pearson(x, y), -1.0);
  y << 1, 3, 2;
  EXPECT_NEAR(pearson(x, y), 0.5, 1e-15);
  EXPECT_THROW(pearson(x, Vector::Constant(3, 2.0)), DomainError);
  EXPECT_THROW(pearson(x.head(2), y.head(2)), DomainError);
  EXPECT_THROW(pearson(x, Vector::Ones(4)), DomainError);
}

TEST(Pearson, MatchesBruteForceAndProperties) {
  oracles::Rng rng(52);
  for (int trial = 0; trial < 300; ++trial) {
    const Eigen::Index n = rng.integer(3, 60);
    const Vector x = rng.matrix(n, 1, -100.0, 100.0);
    const Vector y = rng.matrix(n, 1, -5.0, 5.0);
    const double r = pearson(x, y);
    const std::vector<double> xv(x.data(), x.data() + n);
    const std::vector<double> yv(y.data(), y.data() + n);
    EXPECT_NEAR(r, oracles::reference_pearson(xv, yv), 1e-12);
    EXPECT_LE(std::abs(r), 1.0);
    EXPECT_NEAR(pearson(y, x), r, 1e-15);
    const double a = rng.uniform(0.1, 10.0);
    const double b = rng.uniform(-50.0, 50.0);
    const Vector shifted = (a * x.array() + b).matrix();
    EXPECT_NEAR(pearson(shifted, y), r, 1e-12);
    EXPECT_EQ(pearson(x, x), 1.0);
    EXPECT_EQ(pearson(x, (-x).eval()), -1.0);
  }
}

TEST(PearsonPvalue, Examples) {
  EXPECT_NEAR(pearson_pvalue(0.0, 10), 1.0, 1e-15);
  EXPECT_EQ(pearson_pvalue(1.0, 10), 0.0);
  EXPECT_EQ(pearson_pvalue(-1.0, 10), 0.0);
  EXPECT_LT(pearson_pvalue(0.88, 40), 0.001);
  EXPECT_THROW(pearson_pvalue(0.5, 2), DomainError);
  EXPECT_THROW(pearson_pvalue(1.5, 10), DomainError);
}

TEST(PearsonPvalue, MatchesNumericalIntegration) {
  oracles::Rng rng(53);
  for (int trial = 0; trial < 100; ++trial) {
    const double r = rng.uniform(-0.7, 0.7);
    const auto n = static_cast<std::size_t>(rng.integer(5, 80));
    EXPECT_NEAR(pearson_pvalue(r, n), oracles::reference_pvalue(r, n), 1e-7) << r << " " << n;
    EXPECT_EQ(pearson_pvalue(r, n), pearson_pvalue(-r, n));
  }
}

TEST(Bonferroni, Examples) {
  EXPECT_DOUBLE_EQ(bonferroni(0.01, 4), 0.04);
  EXPECT_EQ(bonferroni(0.3, 4), 1.0);
  EXPECT_EQ(bonferroni(0.0, 4), 0.0);
}

TEST(MacroTotals, SumsPerArea) {
  ModeSplit s;
  s.municipalities = {"a", "b", "c"};
  s.counts = Matrix::Zero(3, 4);
  s.counts.col(0) << 10, 20, 5;
  s.counts.col(1) << 1, 2, 3;
  const std::map<std::string, std::string> mapping = {{"a", "north"}, {"b", "north"}, {"c", "south"},
                                                      {"z", "east"}};
  const MacroTotals t = macro_totals(s, mapping);
  EXPECT_EQ(t.per_area.at("north"), 30.0);
  EXPECT_EQ(t.per_area.at("south"), 5.0);
  EXPECT_EQ(t.per_area.at("east"), 0.0);
  EXPECT_EQ(t.total, 35.0);
  EXPECT_EQ(macro_totals(s, mapping, Mode::Motorised).total, 6.0);
  EXPECT_THROW(macro_totals(s, {{"a", "north"}}), ValidationError);
  ModeSplit empty;
  empty.counts = Matrix::Zero(0, 4);
  EXPECT_EQ(macro_totals(empty, mapping).total, 0.0);
}

TEST(CompareConfigurations, IdenticalAndPermuted) {
  oracles::Rng rng(54);
  ModeSplit a;
  a.municipalities = oracles::labels("m", 8);
  a.counts = rng.matrix(8, 4, 1.0, 100.0);
  a.counts.col(3).setConstant(2.0);
  const auto same = compare_configurations(a, a);
  ASSERT_EQ(same.size(), 4u);
  for (int m = 0; m < 3; ++m) {
    EXPECT_EQ(same[static_cast<std::size_t>(m)].mode, std::string(kModeLabels[static_cast<std::size_t>(m)]));
    EXPECT_DOUBLE_EQ(*same[static_cast<std::size_t>(m)].r, 1.0);
    EXPECT_EQ(*same[static_cast<std::size_t>(m)].p_corrected, 0.0);
  }
  EXPECT_FALSE(same[3].r.has_value());

  std::vector<std::string> order = a.municipalities;
  std::reverse(order.begin(), order.end());
  const auto permuted = compare_configurations(a, a.aligned_to(order));
  for (int m = 0; m < 3; ++m) EXPECT_DOUBLE_EQ(*permuted[static_cast<std::size_t>(m)].r, 1.0);

  ModeSplit b = a;
  b.counts = rng.matrix(8, 4, 1.0, 100.0);
  for (const auto& c : compare_configurations(a, b)) {
    if (!c.r) continue;
    EXPECT_GE(*c.p_corrected, 0.0);
    EXPECT_LE(*c.p_corrected, 1.0);
    EXPECT_EQ(*c.p_corrected, bonferroni(pearson_pvalue(*c.r, 8), 4));
  }
}

TEST(UpdatedModeSplit, IdentityFactorsReturnTheTarget) {
  oracles::Rng rng(55);
  const RelationGraph g = small_city(rng);
  FactorSet fs;
  fs.factors["municipality"] = Matrix::Identity(6, 6);
  fs.factors["mode"] = Matrix::Identity(4, 4);
  fs.backbones["R01"] = g.relation_at("R01").values;
  const UpdatedSplit u = updated_mode_split(g, fs);
  EXPECT_TRUE(u.split.counts == g.relation_at("R01").values);
  EXPECT_EQ(u.clamped_cells, 0u);
  fs.backbones["R01"](0, 0) = -1.0;
  const UpdatedSplit c = updated_mode_split(g, fs);
  EXPECT_EQ(c.clamped_cells, 1u);
  EXPECT_EQ(c.split.counts(0, 0), 0.0);
  EXPECT_EQ(c.unclamped.counts(0, 0), -1.0);
}

TEST(RunInstances, SeedsAndDeterminism) {
  oracles::Rng rng(56);
  const RelationGraph g = small_city(rng);
  RunConfig config;
  config.n_instances = 1;
  config.base_seed = 17;
  config.solver.max_iterations = 100;
  const auto one = run_instances(g, twos(), config);
  ASSERT_EQ(one.size(), 1u);
  EXPECT_EQ(one[0].seed, 17u);

  config.n_instances = 5;
  config.threads = 1;
  const auto serial = run_instances(g, twos(), config);
  config.threads = 3;
  const auto parallel = run_instances(g, twos(), config);
  ASSERT_EQ(serial.size(), 5u);
  for (std::size_t i = 0; i < serial.size(); ++i) {
    EXPECT_EQ(serial[i].seed, 17u + i);
    EXPECT_EQ(serial[i].report, parallel[i].report);
    EXPECT_EQ(serial[i].global_error, parallel[i].global_error);
    EXPECT_TRUE(serial[i].updated.split.counts == parallel[i].updated.split.counts);
    EXPECT_EQ(serial[i].global_error, global_error(serial[i].report));
  }
  EXPECT_TRUE(one[0].report == serial[0].report);

  config.n_instances = 0;
  EXPECT_THROW(run_instances(g, twos(), config), ValidationError);
}

}  // namespace
