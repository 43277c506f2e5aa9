#include "modefusion/csv_io.hpp"
#include "modefusion/errors.hpp"
#include "modefusion/mobility_ingest.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <set>

namespace fs = std::filesystem;
using namespace modefusion;

namespace {

constexpr Timestamp kMonday = 1583107200;

TowerIndex line_towers() {
  // T0 at the origin, T1 1 km east, T2 100 m east, T3 2 km east
  return TowerIndex({{"T0", 0, 0, "m1"}, {"T1", 1000, 0, "m1"}, {"T2", 100, 0, "m2"}, {"T3", 2000, 0, "m2"}});
}

Trip trip_at(double speed, Timestamp start, std::vector<std::string> waypoints = {"T0", "T1"}) {
  Trip t;
  t.device = "d";
  t.waypoints = std::move(waypoints);
  t.origin = t.waypoints.front();
  t.destination = t.waypoints.back();
  t.start = start;
  t.end = start + 600;
  t.mean_speed_kmh = speed;
  return t;
}

TEST(ExtractTrips, HandExamples) {
  const TowerIndex towers = line_towers();
  const Timestamp t0 = kMonday + 7 * 3600;
  std::vector<NetworkEvent> same{{"d", "T0", t0}, {"d", "T0", t0 + 60}};
  EXPECT_TRUE(extract_trips(same, towers).empty());

  std::vector<NetworkEvent> moving{{"d", "T0", t0}, {"d", "T1", t0 + 360}};
  const auto trips = extract_trips(moving, towers);
  ASSERT_EQ(trips.size(), 1u);
  EXPECT_NEAR(trips[0].mean_speed_kmh, 10.0, 1e-12);
  EXPECT_EQ(trips[0].origin, "T0");
  EXPECT_EQ(trips[0].destination, "T1");

  std::vector<NetworkEvent> slow{{"d", "T0", t0}, {"d", "T2", t0 + 1800}};
  EXPECT_TRUE(extract_trips(slow, towers).empty());
  EXPECT_NEAR(leg_speed_kmh(100, 1800), 0.2, 1e-12);
}

TEST(ExtractTrips, ChainsAndBreaks) {
  const TowerIndex towers = line_towers();
  const Timestamp t0 = kMonday + 7 * 3600;
  std::vector<NetworkEvent> events{{"d", "T0", t0},        {"d", "T1", t0 + 360},
                                   {"d", "T3", t0 + 720},  {"d", "T3", t0 + 3600},
                                   {"d", "T1", t0 + 3700}, {"d", "T1", t0 + 3700}};
  const auto trips = extract_trips(events, towers);
  ASSERT_EQ(trips.size(), 2u);
  EXPECT_EQ(trips[0].waypoints, (std::vector<std::string>{"T0", "T1", "T3"}));
  EXPECT_NEAR(trips[0].mean_speed_kmh, 2.0 / (720.0 / 3600.0), 1e-12);
  EXPECT_EQ(trips[1].waypoints, (std::vector<std::string>{"T3", "T1"}));
}

TEST(ExtractTrips, UnknownTowerThrows) {
  std::vector<NetworkEvent> events{{"d", "T0", kMonday}, {"d", "X", kMonday + 60}};
  EXPECT_THROW(extract_trips(events, line_towers()), ValidationError);
}

// Oracle equivalence against the pairwise reference, including the filter.
TEST(ExtractTrips, MatchesReferenceOnRandomStreams) {
  oracles::Rng rng(20);
  std::size_t total_trips = 0;
  std::size_t kept = 0;
  for (int trial = 0; trial < 1500; ++trial) {
    const TowerIndex towers = oracles::random_towers(rng, rng.integer(2, 12));
    const auto events = oracles::random_events(rng, towers);
    const auto trips = extract_trips(events, towers);
    const auto expected = oracles::reference_trips(events, towers);
    ASSERT_EQ(trips.size(), expected.size()) << "trial " << trial;
    for (std::size_t i = 0; i < trips.size(); ++i) {
      EXPECT_EQ(trips[i].device, expected[i].device);
      EXPECT_EQ(trips[i].waypoints, expected[i].waypoints);
      EXPECT_EQ(trips[i].start, expected[i].start);
      EXPECT_EQ(trips[i].end, expected[i].end);
      EXPECT_NEAR(trips[i].mean_speed_kmh, expected[i].mean_speed_kmh,
                  1e-9 * std::max(1.0, expected[i].mean_speed_kmh));
    }
    const auto filtered = filter_trips(trips);
    std::size_t n = 0;
    for (const auto& t : expected) n += oracles::reference_keep(t) ? 1 : 0;
    EXPECT_EQ(filtered.size(), n);
    for (const auto& t : filtered) EXPECT_TRUE(oracles::reference_keep(t));
    total_trips += trips.size();
    kept += filtered.size();
  }
  EXPECT_GT(total_trips, 1000u);
  EXPECT_GT(kept, 100u);
}

TEST(ExtractTrips, DevicesAreIndependent) {
  oracles::Rng rng(21);
  for (int trial = 0; trial < 200; ++trial) {
    const TowerIndex towers = oracles::random_towers(rng, 8);
    auto a = oracles::random_events(rng, towers, 25);
    auto b = oracles::random_events(rng, towers, 25);
    for (auto& e : a) e.device = "A" + e.device;
    for (auto& e : b) e.device = "B" + e.device;
    std::vector<NetworkEvent> both = a;
    both.insert(both.end(), b.begin(), b.end());
    auto expected = extract_trips(a, towers);
    const auto tb = extract_trips(b, towers);
    expected.insert(expected.end(), tb.begin(), tb.end());
    EXPECT_EQ(extract_trips(both, towers), expected);
  }
}

TEST(FilterTrips, SpeedAndWindow) {
  const Timestamp morning = kMonday + 7 * 3600 + 1800;
  EXPECT_TRUE(filter_trips(std::vector<Trip>{trip_at(4.0, morning)}).empty());
  EXPECT_TRUE(filter_trips(std::vector<Trip>{trip_at(121.0, morning)}).empty());
  EXPECT_EQ(filter_trips(std::vector<Trip>{trip_at(60.0, morning)}).size(), 1u);
  EXPECT_EQ(filter_trips(std::vector<Trip>{trip_at(5.0, kMonday + 6 * 3600)}).size(), 1u);
  EXPECT_TRUE(filter_trips(std::vector<Trip>{trip_at(60.0, kMonday + 9 * 3600)}).empty());
  EXPECT_TRUE(filter_trips(std::vector<Trip>{trip_at(60.0, kMonday + 18 * 3600)}).empty());
}

TEST(MunicipalityWaypoint, Counts) {
  const TowerIndex towers = line_towers();
  const std::vector<std::string> muni = {"m1", "m2"};
  const auto one = build_municipality_waypoint(std::vector<Trip>{trip_at(10, 0, {"T0", "T1", "T3"})}, towers, muni);
  EXPECT_EQ(one.values.row(0).sum(), 3.0);
  EXPECT_EQ(one.values.row(1).sum(), 0.0);
  EXPECT_EQ(build_municipality_waypoint(std::vector<Trip>{}, towers, muni).values.norm(), 0.0);
  const auto two = build_municipality_waypoint(
      std::vector<Trip>{trip_at(10, 0, {"T0", "T1"}), trip_at(10, 0, {"T1", "T3", "T1"})}, towers, muni);
  EXPECT_EQ(two.values(0, 1), 2.0);  // T1 shared, a revisit counts once
  EXPECT_EQ(two.values(0, 0), 1.0);
  EXPECT_EQ(two.values(0, 3), 1.0);
}

TEST(MunicipalityWaypoint, MatchesBruteForceCounts) {
  oracles::Rng rng(22);
  const TowerIndex towers = oracles::random_towers(rng, 10);
  const std::vector<std::string> muni = {"north", "south"};
  std::vector<Trip> trips;
  for (int i = 0; i < 300; ++i) {
    std::vector<std::string> w;
    const int len = rng.integer(2, 7);
    for (int k = 0; k < len; ++k) w.push_back(towers.towers()[static_cast<std::size_t>(rng.integer(0, 9))].id);
    trips.push_back(trip_at(10, 0, w));
  }
  const auto m = build_municipality_waypoint(trips, towers, muni);
  for (std::size_t r = 0; r < muni.size(); ++r) {
    for (std::size_t c = 0; c < towers.towers().size(); ++c) {
      double n = 0;
      for (const auto& t : trips) {
        if (towers.at(t.origin).municipality != muni[r]) continue;
        const auto& id = towers.towers()[c].id;
        n += std::find(t.waypoints.begin(), t.waypoints.end(), id) != t.waypoints.end() ? 1 : 0;
      }
      EXPECT_EQ(m.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)), n);
    }
  }
}

TEST(Tfidf, HandValues) {
  Matrix single(1, 2);
  single << 2, 2;
  const Matrix w = tfidf(single);
  EXPECT_NEAR(w(0, 0), 0.5 * std::log(2.0), 1e-15);
  EXPECT_NEAR(w(0, 1), 0.5 * std::log(2.0), 1e-15);

  Matrix m(2, 3);
  m << 1, 0, 3,
       2, 2, 0;
  const Matrix x = tfidf(m);
  EXPECT_NEAR(x(0, 0), 0.25 * std::log(2.0), 1e-15);       // in every row
  EXPECT_NEAR(x(0, 2), 0.75 * std::log(3.0), 1e-15);       // df = 1
  EXPECT_NEAR(x(1, 1), 0.5 * std::log(3.0), 1e-15);
  EXPECT_EQ(x(0, 1), 0.0);
  EXPECT_EQ(tfidf(Matrix::Zero(2, 2)).norm(), 0.0);
}

TEST(Tfidf, PreservesZeroPatternAndSign) {
  oracles::Rng rng(23);
  for (int trial = 0; trial < 200; ++trial) {
    Matrix m = rng.matrix(rng.integer(1, 8), rng.integer(1, 8), 0.0, 5.0);
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      if (rng.uniform() < 0.4) m.data()[i] = 0.0;
    }
    const Matrix w = tfidf(m);
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      EXPECT_GE(w.data()[i], 0.0);
      EXPECT_EQ(w.data()[i] == 0.0, m.data()[i] == 0.0);
    }
  }
}

TEST(SpeedScheme, StandardAndValidation) {
  const auto s = SpeedRangeScheme::standard();
  EXPECT_EQ(s.bins().size(), 8u);
  EXPECT_EQ(s.bin_of(5.0), 0u);
  EXPECT_EQ(s.bin_of(5.0001), 1u);
  EXPECT_EQ(s.bin_of(120.0), 7u);
  EXPECT_FALSE(s.bin_of(0.0).has_value());
  EXPECT_FALSE(s.bin_of(120.5).has_value());
  auto bins = s.bins();
  bins.pop_back();
  EXPECT_THROW(SpeedRangeScheme::from_bins(bins), ValidationError);
  bins = s.bins();
  bins[3].lower_kmh = 21;
  EXPECT_THROW(SpeedRangeScheme::from_bins(bins), ValidationError);
}

TEST(SpeedMatrices, Counts) {
  const TowerIndex towers = line_towers();
  const std::vector<std::string> muni = {"m1", "m2"};
  const auto scheme = SpeedRangeScheme::standard();
  const auto one = build_speed_matrices(std::vector<Trip>{trip_at(10.0, 0)}, towers, scheme, muni);
  EXPECT_EQ(one.municipality_speed.values.sum(), 1.0);
  EXPECT_EQ(one.municipality_speed.values(0, 1), 1.0);

  const auto four = build_speed_matrices(std::vector<Trip>{trip_at(45.0, 0, {"T2", "T0", "T1", "T3"})},
                                         towers, scheme, muni);
  EXPECT_EQ(four.waypoint_speed.values.col(4).sum(), 4.0);
  EXPECT_EQ(four.waypoint_speed.values.sum(), 4.0);
  EXPECT_EQ(four.municipality_speed.values(1, 4), 1.0);

  const auto none = build_speed_matrices(std::vector<Trip>{}, towers, scheme, muni);
  EXPECT_EQ(none.municipality_speed.values.norm() + none.waypoint_speed.values.norm(), 0.0);
  EXPECT_THROW(build_speed_matrices(std::vector<Trip>{trip_at(130.0, 0)}, towers, scheme, muni), DomainError);
}

TEST(SpeedMatrices, EachTripContributesOnceAndPerDistinctWaypoint) {
  oracles::Rng rng(24);
  for (int trial = 0; trial < 200; ++trial) {
    const TowerIndex towers = oracles::random_towers(rng, 12);
    const auto trips = filter_trips(extract_trips(oracles::random_events(rng, towers), towers));
    const auto m = build_speed_matrices(trips, towers, SpeedRangeScheme::standard(), {"north", "south"});
    EXPECT_EQ(m.municipality_speed.values.sum(), static_cast<double>(trips.size()));
    double distinct = 0;
    for (const auto& t : trips) distinct += static_cast<double>(std::set(t.waypoints.begin(), t.waypoints.end()).size());
    EXPECT_EQ(m.waypoint_speed.values.sum(), distinct);
  }
}

TEST(MobilityIo, EventsSortedAndDeduplicated) {
  const fs::path dir = fs::temp_directory_path() / "modefusion-unit" / "events";
  fs::remove_all(dir);
  write_text_file(dir / "events.csv",
                  "device,tower,timestamp\nb,T1,30\na,T0,20\na,T1,10\na,T1,10\n");
  const auto events = read_events_csv(dir / "events.csv");
  ASSERT_EQ(events.size(), 3u);
  EXPECT_EQ(events[0].device, "a");
  EXPECT_EQ(events[0].timestamp, 10);
  EXPECT_EQ(events[1].timestamp, 20);
  EXPECT_EQ(events[2].device, "b");

  const TowerIndex towers = line_towers();
  write_towers_csv(dir / "towers.csv", towers);
  const TowerIndex back = read_towers_csv(dir / "towers.csv");
  EXPECT_EQ(back.ids(), towers.ids());
  EXPECT_EQ(back.municipalities(), (std::vector<std::string>{"m1", "m2"}));
  EXPECT_DOUBLE_EQ(back.distance_m("T0", "T3"), 2000.0);
}

}  // namespace
