#include <gtest/gtest.h>

#include <random>

#include "mmv2v/utility.hpp"

using namespace mmv2v;

namespace {

const Geometry& grid() {
  static const Geometry g = build_manhattan_grid({});
  return g;
}

const McsTable& table() {
  static const McsTable t = McsTable::load(default_mcs_table_path());
  return t;
}

VehicleState at(VehicleId id, double x, double y, double g, VehicleKind k = VehicleKind::regular,
                double heading = 0.0) {
  VehicleState v;
  v.id = id;
  v.kind = k;
  v.position = {x, y};
  v.heading = heading;
  v.speed = 8.0;
  v.generated_gbit = g;
  return v;
}

TraceSet random_frame(std::mt19937_64& rng, int n, double g_scale = 1.0) {
  const double levels[] = {0.25, 0.5, 0.75, 1.0};
  std::uniform_int_distribution<int> lvl(0, 3);
  std::uniform_real_distribution<double> along(0.0, 100.0);
  std::uniform_int_distribution<int> road(0, 5), dir(0, 1), lane(0, 1), kind(0, 6);
  std::vector<VehicleState> f;
  for (int i = 0; i < n; ++i) {
    const Road& r = grid().roads()[static_cast<std::size_t>(road(rng))];
    const int d = dir(rng) ? 1 : -1;
    const double c = r.lane_coordinate(d, lane(rng));
    const double a = along(rng);
    const Point p = r.axis == Axis::horizontal ? Point{a, c} : Point{c, a};
    const VehicleKind k = kind(rng) == 0 ? VehicleKind::emergency : VehicleKind::regular;
    f.push_back(at(i, p.x, p.y, g_scale * (k == VehicleKind::emergency ? 1.0 : levels[lvl(rng)]), k, r.heading(d)));
  }
  return TraceSet(1.0, {f});
}

}  // namespace

TEST(TypeWeight, Values) {
  EXPECT_EQ(type_weight(VehicleKind::emergency), 1.0);
  EXPECT_EQ(type_weight(VehicleKind::regular), 0.5);
}

TEST(Regional, IsolatedVehicleKeepsOwnData) {
  const TraceSet tr(1.0, {{at(1, 10, 48.4, 0.5), at(2, 90, 48.4, 1.0)}});
  EXPECT_DOUBLE_EQ(regional_data(tr, 0, 1, 20.0), 0.5);
}

TEST(Regional, SumsNeighboursRegardlessOfLos) {
  // Vehicle 3 sits behind a building from vehicle 1 but within R.
  const TraceSet tr(1.0, {{at(1, 37.5, 23.0, 1.0), at(2, 45.0, 23.0, 0.25), at(3, 37.5, 40.0, 0.75),
                           at(4, 90.0, 90.0, 1.0)}});
  ASSERT_FALSE(is_los(grid(), {37.5, 23.0}, {37.5, 40.0}));
  EXPECT_DOUBLE_EQ(regional_data(tr, 0, 1, 20.0), 2.0);
  for (VehicleId id : {1, 2, 3, 4}) EXPECT_GE(regional_data(tr, 0, id, 20.0), tr.find(0, id)->generated_gbit);
}

TEST(Regional, Normalisation) {
  const auto out = normalize_regional({{1, 2.0}, {2, 1.0}, {3, 0.5}});
  EXPECT_DOUBLE_EQ(out.at(1), 1.0);
  EXPECT_DOUBLE_EQ(out.at(2), 0.5);
  EXPECT_DOUBLE_EQ(out.at(3), 0.25);
  const auto same = normalize_regional({{1, 1.5}, {2, 1.5}});
  EXPECT_DOUBLE_EQ(same.at(1), 1.0);
  EXPECT_DOUBLE_EQ(same.at(2), 1.0);
  EXPECT_THROW(normalize_regional({}), Error);
  EXPECT_THROW(normalize_regional({{1, 0.0}}), Error);
}

TEST(Heading, FoldsIntoZeroPi) {
  EXPECT_DOUBLE_EQ(heading_difference(0.0, pi), pi);
  EXPECT_NEAR(heading_difference(0.1, two_pi - 0.1), 0.2, 1e-12);
  EXPECT_NEAR(heading_difference(3.0 * pi / 2.0, 0.0), pi / 2.0, 1e-12);
  EXPECT_DOUBLE_EQ(heading_difference(1.0, 1.0), 0.0);
}

TEST(Score, HandValues) {
  const UtilityWeights w;
  EXPECT_DOUBLE_EQ(direction_distance_score(0.0, 0.0, w), 1.0);
  EXPECT_DOUBLE_EQ(direction_distance_score(w.radius_m, pi, w), 0.0);
  EXPECT_DOUBLE_EQ(direction_distance_score(w.radius_m / 2.0, pi / 2.0, w), 0.5);
  EXPECT_THROW(direction_distance_score(w.radius_m + 0.1, 0.0, w), Error);
}

TEST(Utility, HandValues) {
  EXPECT_DOUBLE_EQ(utility(1.0, 1.0, 1.0, 6.0, 6.0), 1.0);
  EXPECT_DOUBLE_EQ(utility(0.5, 0.8, 0.5, 3.0, 3.0), 0.2);
  EXPECT_DOUBLE_EQ(utility(1.0, 1.0, 1.0, 0.0, 6.0), 0.0);
  EXPECT_DOUBLE_EQ(utility(1.0, 1.0, 1.0, 9.0, 6.0), 1.0);
}

TEST(Utility, AsymmetricByPartnerType) {
  const TraceSet tr(1.0, {{at(1, 10, 48.4, 1.0, VehicleKind::emergency), at(2, 20, 48.4, 1.0)}});
  const auto snap = take_snapshot(tr, 0, 20.0);
  LinkTable links;
  links.insert(evaluate_link(1, 2, 10.0, 0.0, {}, table()));
  const UtilityWeights w;
  const double u12 = pair_utility(*snap.find(1), *snap.find(2), *links.find(1, 2), w);
  const double u21 = pair_utility(*snap.find(2), *snap.find(1), *links.find(1, 2), w);
  EXPECT_DOUBLE_EQ(u21, 2.0 * u12);
}

TEST(Links, MaxRateBoundsRate) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> shadow(0.0, 5.8);
  std::uniform_real_distribution<double> ud(0.1, 40.0);
  for (int k = 0; k < 2000; ++k) {
    const LinkSample s = evaluate_link(1, 2, ud(rng), shadow(rng), {}, table());
    ASSERT_GE(s.rate_gbps, 0.0);
    ASSERT_LE(s.rate_gbps, s.max_rate_gbps);
    ASSERT_GT(s.distance_m, 0.0);
  }
}

TEST(Links, OneDrawSharedByBothDirections) {
  std::mt19937_64 rng(1);
  const TraceSet tr(1.0, {{at(1, 10, 48.4, 1.0), at(2, 20, 48.4, 1.0), at(3, 37.5, 23.0, 1.0)}});
  const auto snap = take_snapshot(tr, 0, 20.0);
  const LinkTable links = sample_links(snap, grid(), {}, table(), 20.0, rng);
  EXPECT_EQ(links.find(1, 2), links.find(2, 1));
  EXPECT_NE(links.find(1, 2), nullptr);
  EXPECT_EQ(links.find(1, 3), nullptr);  // beyond R
  EXPECT_EQ(links.size(), 1u);
}

TEST(Preferences, EmptyWhenNobodyNear) {
  std::mt19937_64 rng(1);
  const TraceSet tr(1.0, {{at(1, 10, 48.4, 1.0), at(2, 90, 48.4, 1.0)}});
  const auto snap = take_snapshot(tr, 0, 20.0);
  const auto links = sample_links(snap, grid(), {}, table(), 20.0, rng);
  EXPECT_TRUE(build_preference_list(1, snap, links, {}, 2).entries.empty());
}

TEST(Preferences, SortedWithIdTieBreak) {
  std::vector<PreferenceEntry> e{{4, 0.4}, {7, 0.7}, {3, 0.4}, {9, 0.7}};
  sort_preferences(e);
  EXPECT_EQ(e, (std::vector<PreferenceEntry>{{7, 0.7}, {9, 0.7}, {3, 0.4}, {4, 0.4}}));
}

TEST(Preferences, SymmetricTiesOrderedById) {
  // Two identical candidates mirrored around the owner.
  const TraceSet tr(1.0, {{at(5, 50, 48.4, 1.0), at(8, 60, 48.4, 0.5), at(2, 40, 48.4, 0.5)}});
  const auto snap = take_snapshot(tr, 0, 20.0);
  LinkTable links;
  links.insert(evaluate_link(5, 8, 10.0, 0.0, {}, table()));
  links.insert(evaluate_link(5, 2, 10.0, 0.0, {}, table()));
  const auto pl = build_preference_list(5, snap, links, {}, 2);
  ASSERT_EQ(pl.entries.size(), 2u);
  EXPECT_EQ(pl.entries[0].utility, pl.entries[1].utility);
  EXPECT_EQ(pl.ids(), (std::vector<VehicleId>{2, 8}));
}

TEST(Preferences, PropertiesOverRandomFrames) {
  std::mt19937_64 rng(77);
  const UtilityWeights w;
  for (int trial = 0; trial < 200; ++trial) {
    const TraceSet tr = random_frame(rng, 15);
    const auto snap = take_snapshot(tr, 0, w.radius_m);
    std::mt19937_64 ch(static_cast<std::uint64_t>(trial));
    const auto links = sample_links(snap, grid(), {}, table(), w.radius_m, ch);
    std::map<VehicleId, PreferenceList> lists;
    for (const auto& b : snap.beacons) lists[b.state.id] = build_preference_list(b.state.id, snap, links, w, 3);
    for (const auto& [id, pl] : lists) {
      for (std::size_t k = 0; k < pl.entries.size(); ++k) {
        const auto& e = pl.entries[k];
        ASSERT_NE(e.candidate, id);
        ASSERT_GE(e.utility, 0.0);
        ASSERT_LE(e.utility, 1.0);
        // Admission: within R, LOS, feasible MCS; and symmetric.
        const auto* a = snap.find(id);
        const auto* b = snap.find(e.candidate);
        ASSERT_LE(distance(a->state.position, b->state.position), w.radius_m);
        ASSERT_TRUE(is_los(grid(), a->state.position, b->state.position));
        const auto other = lists.at(e.candidate).ids();
        ASSERT_NE(std::find(other.begin(), other.end(), id), other.end());
        if (k > 0) {
          const auto& p = pl.entries[k - 1];
          ASSERT_TRUE(p.utility > e.utility || (p.utility == e.utility && p.candidate < e.candidate));
        }
      }
    }
  }
}

TEST(Preferences, OrderInvariantUnderDataScaling) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    std::mt19937_64 copy = rng;
    const TraceSet a = random_frame(rng, 12, 1.0);
    const TraceSet b = random_frame(copy, 12, 3.0);
    const auto sa = take_snapshot(a, 0, 20.0);
    const auto sb = take_snapshot(b, 0, 20.0);
    std::mt19937_64 ca(9), cb(9);
    const auto la = sample_links(sa, grid(), {}, table(), 20.0, ca);
    const auto lb = sample_links(sb, grid(), {}, table(), 20.0, cb);
    for (const auto& bc : sa.beacons) {
      ASSERT_NEAR(bc.regional_norm, sb.find(bc.state.id)->regional_norm, 1e-12);
      ASSERT_EQ(build_preference_list(bc.state.id, sa, la, {}, 2).ids(),
                build_preference_list(bc.state.id, sb, lb, {}, 2).ids());
    }
  }
}
