#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <random>
#include <set>
#include <sstream>

#include "mmv2v/traces.hpp"

using namespace mmv2v;

namespace {

const Geometry& grid() {
  static const Geometry g = build_manhattan_grid({});
  return g;
}

VehicleState at(VehicleId id, double x, double y, double g = 0.5, VehicleKind k = VehicleKind::regular) {
  VehicleState v;
  v.id = id;
  v.kind = k;
  v.position = {x, y};
  v.speed = 8.0;
  v.generated_gbit = g;
  return v;
}

std::vector<VehicleId> brute_neighbours(const TraceSet& tr, std::size_t t, VehicleId id, double r) {
  const VehicleState* self = tr.find(t, id);
  std::vector<std::pair<double, VehicleId>> all;
  for (const auto& v : tr.frame(t))
    if (v.id != id) {
      const double dx = v.position.x - self->position.x, dy = v.position.y - self->position.y;
      const double d = std::sqrt(dx * dx + dy * dy);
      if (d <= r) all.push_back({d, v.id});
    }
  std::stable_sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
    return a.first < b.first || (a.first == b.first && a.second < b.second);
  });
  std::vector<VehicleId> ids;
  for (const auto& a : all) ids.push_back(a.second);
  return ids;
}

}  // namespace

TEST(Generate, TwentyVehiclesAllOnRoads) {
  const TraceSet tr = generate_traces(grid(), 20, 0.15, 100, 7);
  EXPECT_EQ(tr.slot_count(), 100u);
  EXPECT_EQ(tr.vehicle_ids().size(), 20u);
  for (std::size_t t = 0; t < tr.slot_count(); ++t) {
    ASSERT_EQ(tr.frame(t).size(), 20u);
    for (const auto& v : tr.frame(t)) ASSERT_TRUE(grid().on_road(v.position)) << "t=" << t << " id=" << v.id;
  }
}

TEST(Generate, KindsSpeedsAndData) {
  MobilityConfig cfg;
  const TraceSet tr = generate_traces(grid(), 40, 0.3, 50, 5, cfg);
  const std::set<double> levels{0.25, 0.5, 0.75, 1.0};
  for (std::size_t t = 0; t < tr.slot_count(); ++t)
    for (const auto& v : tr.frame(t)) {
      if (v.kind == VehicleKind::emergency) {
        EXPECT_EQ(v.generated_gbit, 1.0);
        EXPECT_EQ(v.speed, 2.0 * cfg.base_speed_mps);
      } else {
        EXPECT_TRUE(levels.count(v.generated_gbit));
        EXPECT_EQ(v.speed, cfg.base_speed_mps);
      }
    }
}

TEST(Generate, AllEmergencyWhenProbabilityIsOne) {
  const TraceSet tr = generate_traces(grid(), 10, 1.0, 10, 3);
  for (std::size_t t = 0; t < tr.slot_count(); ++t)
    for (const auto& v : tr.frame(t)) {
      EXPECT_EQ(v.kind, VehicleKind::emergency);
      EXPECT_EQ(v.generated_gbit, 1.0);
    }
}

TEST(Generate, SameSeedSameTraces) {
  EXPECT_EQ(generate_traces(grid(), 20, 0.15, 60, 7), generate_traces(grid(), 20, 0.15, 60, 7));
  EXPECT_FALSE(generate_traces(grid(), 20, 0.15, 60, 7) == generate_traces(grid(), 20, 0.15, 60, 8));
}

TEST(Generate, VehiclesMoveAlongHeadingBetweenTurns) {
  const TraceSet tr = generate_traces(grid(), 20, 0.15, 60, 9);
  std::size_t straight_steps = 0;
  for (std::size_t t = 1; t < tr.slot_count(); ++t)
    for (const auto& v : tr.frame(t)) {
      const VehicleState* prev = tr.find(t - 1, v.id);
      // Regular vehicles cover less than one block per slot.
      if (v.kind != VehicleKind::regular || prev->heading != v.heading) continue;
      const double dx = v.position.x - prev->position.x, dy = v.position.y - prev->position.y;
      const double step = prev->speed * tr.slot_seconds();
      const double along = dx * std::cos(v.heading) + dy * std::sin(v.heading);
      // Either a plain step along the heading, or a wrap at the grid edge.
      if (std::abs(along - step) < 1e-6) ++straight_steps;
      else EXPECT_GT(std::abs(along), 50.0);
    }
  EXPECT_GT(straight_steps, 0u);
}

TEST(Generate, RejectsBadArguments) {
  EXPECT_THROW(generate_traces(grid(), 0, 0.1, 10, 1), Error);
  EXPECT_THROW(generate_traces(grid(), 5, 1.5, 10, 1), Error);
  EXPECT_THROW(generate_traces(grid(), 5, -0.1, 10, 1), Error);
}

TEST(TraceCsv, TwoVehiclesTwoSlots) {
  std::istringstream is(
      "t,id,kind,x,y,heading,speed,g\n"
      "0,1,R,10,48.4,0,8,0.5\n"
      "0,2,E,20,48.4,0,16,1\n"
      "1,1,R,26,48.4,0,8,0.25\n"
      "1,2,E,52,48.4,0,16,1\n");
  const TraceSet tr = read_traces(is);
  EXPECT_EQ(tr.sample_count(), 4u);
  EXPECT_EQ(tr.slot_count(), 2u);
  EXPECT_EQ(tr.find(1, 2)->kind, VehicleKind::emergency);
  EXPECT_DOUBLE_EQ(tr.find(1, 1)->generated_gbit, 0.25);
}

TEST(TraceCsv, NegativeDataNamesTheRow) {
  std::istringstream is(
      "t,id,kind,x,y,heading,speed,g\n"
      "0,1,R,10,48.4,0,8,0.5\n"
      "0,2,R,20,48.4,0,8,-1\n");
  try {
    read_traces(is);
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
}

TEST(TraceCsv, MalformedRows) {
  const char* bad[] = {
      "t,id,kind,x,y\n",
      "t,id,kind,x,y,heading,speed,g\n0,1,R,10,48.4,0,8\n",
      "t,id,kind,x,y,heading,speed,g\n0,1,Q,10,48.4,0,8,1\n",
      "t,id,kind,x,y,heading,speed,g\n0,1,R,abc,48.4,0,8,1\n",
      "t,id,kind,x,y,heading,speed,g\n0,1,R,10,48.4,7,8,1\n",
      "t,id,kind,x,y,heading,speed,g\n0,1,R,10,48.4,0,8,1\n0,1,R,11,48.4,0,8,1\n",
  };
  for (const char* text : bad) {
    std::istringstream is(text);
    EXPECT_THROW(read_traces(is), Error) << text;
  }
}

TEST(TraceCsv, OffRoadWarnsOrRejects) {
  const std::string text = "t,id,kind,x,y,heading,speed,g\n0,1,R,37,37,0,8,1\n";
  std::vector<std::string> warnings;
  TraceLoadOptions opt;
  opt.geometry = &grid();
  opt.warnings = &warnings;
  std::istringstream a(text);
  EXPECT_NO_THROW(read_traces(a, opt));
  EXPECT_EQ(warnings.size(), 1u);
  opt.off_road = OffRoadPolicy::reject;
  std::istringstream b(text);
  EXPECT_THROW(read_traces(b, opt), ParseError);
}

TEST(TraceCsv, SaveLoadRoundTrip) {
  const TraceSet tr = generate_traces(grid(), 20, 0.15, 40, 21);
  const auto path = std::filesystem::temp_directory_path() / "mmv2v_roundtrip.csv";
  save_traces(tr, path);
  TraceLoadOptions opt;
  opt.slot_seconds = tr.slot_seconds();
  EXPECT_EQ(load_traces(path, opt), tr);
  std::filesystem::remove(path);
}

TEST(TraceSetInvariants, GapsAndDuplicatesRejected) {
  std::vector<std::vector<VehicleState>> frames{{at(1, 10, 48.4)}, {}, {at(1, 10, 48.4)}};
  EXPECT_THROW(TraceSet(1.0, frames), Error);
  EXPECT_THROW(TraceSet(1.0, {{at(1, 10, 48.4), at(1, 12, 48.4)}}), Error);
  EXPECT_THROW(TraceSet(0.0, {}), Error);
  EXPECT_THROW(TraceSet(1.0, {{}}).frame(3), Error);
}

TEST(Neighbours, SingleVehicleHasNone) {
  const TraceSet tr(1.0, {{at(1, 10, 48.4)}});
  EXPECT_TRUE(neighbors_in_radius(tr, 0, 1, 20.0).empty());
}

TEST(Neighbours, BoundaryIsInside) {
  const TraceSet tr(1.0, {{at(1, 10, 48.4), at(2, 30, 48.4), at(3, 30.0001, 48.4)}});
  EXPECT_EQ(neighbors_in_radius(tr, 0, 1, 20.0), (std::vector<VehicleId>{2}));
  EXPECT_EQ(neighbors_in_radius(tr, 0, 1, 20.0), brute_neighbours(tr, 0, 1, 20.0));
}

TEST(Neighbours, TiesOrderedById) {
  const TraceSet tr(1.0, {{at(5, 50, 48.4), at(3, 60, 48.4), at(9, 40, 48.4)}});
  EXPECT_EQ(neighbors_in_radius(tr, 0, 5, 20.0), (std::vector<VehicleId>{3, 9}));
}

TEST(Neighbours, UnknownVehicle) {
  const TraceSet tr(1.0, {{at(1, 10, 48.4)}});
  EXPECT_THROW(neighbors_in_radius(tr, 0, 2, 20.0), Error);
}

TEST(Neighbours, MatchesScanAndNestsInRadius) {
  const TraceSet tr = generate_traces(grid(), 20, 0.15, 30, 4);
  for (std::size_t t = 0; t < tr.slot_count(); ++t)
    for (const auto& v : tr.frame(t)) {
      const auto n20 = neighbors_in_radius(tr, t, v.id, 20.0);
      ASSERT_EQ(n20, brute_neighbours(tr, t, v.id, 20.0));
      auto n40 = neighbors_in_radius(tr, t, v.id, 40.0);
      std::sort(n40.begin(), n40.end());
      for (VehicleId j : n20) ASSERT_TRUE(std::binary_search(n40.begin(), n40.end(), j));
    }
}
