#pragma once

#include <algorithm>
#include <array>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "mmv2v/common.hpp"
#include "mmv2v/geometry.hpp"

namespace mmv2v {

struct VehicleState {
  VehicleId id = 0;
  VehicleKind kind = VehicleKind::regular;
  Point position;
  double heading = 0.0;         // radians, [0, 2pi)
  double speed = 0.0;           // m/s
  double generated_gbit = 0.0;  // sensor data produced this timeslot

  friend bool operator==(const VehicleState&, const VehicleState&) = default;
};

// Per-timeslot vehicle samples. Immutable once constructed; each frame is
// sorted by id and every vehicle occupies one contiguous run of timeslots.
class TraceSet {
 public:
  TraceSet() = default;

  TraceSet(double slot_seconds, std::vector<std::vector<VehicleState>> frames)
      : slot_seconds_(slot_seconds), frames_(std::move(frames)) {
    if (!(slot_seconds_ > 0.0)) throw Error("timeslot duration must be positive");
    std::map<VehicleId, std::pair<std::size_t, std::size_t>> life;  // first, last
    for (std::size_t t = 0; t < frames_.size(); ++t) {
      auto& f = frames_[t];
      std::sort(f.begin(), f.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
      for (std::size_t k = 0; k < f.size(); ++k) {
        const auto& v = f[k];
        const std::string where = "timeslot " + std::to_string(t) + ", vehicle " + std::to_string(v.id);
        if (k > 0 && f[k - 1].id == v.id) throw Error("duplicate vehicle id at " + where);
        validate_state(v, where);
        auto [it, fresh] = life.try_emplace(v.id, t, t);
        if (!fresh) {
          if (it->second.second + 1 != t) throw Error("vehicle reappears after a gap at " + where);
          it->second.second = t;
        }
      }
    }
  }

  static void validate_state(const VehicleState& v, const std::string& where) {
    if (!(v.generated_gbit > 0.0)) throw Error("generated data must be > 0 at " + where);
    if (!(v.heading >= 0.0 && v.heading < two_pi)) throw Error("heading outside [0, 2pi) at " + where);
    if (!(v.speed >= 0.0)) throw Error("negative speed at " + where);
    if (!std::isfinite(v.position.x) || !std::isfinite(v.position.y))
      throw Error("non-finite position at " + where);
  }

  double slot_seconds() const { return slot_seconds_; }
  std::size_t slot_count() const { return frames_.size(); }
  std::size_t sample_count() const {
    std::size_t n = 0;
    for (const auto& f : frames_) n += f.size();
    return n;
  }

  std::span<const VehicleState> frame(std::size_t t) const {
    if (t >= frames_.size()) throw Error("timeslot " + std::to_string(t) + " not in traces");
    return frames_[t];
  }

  const VehicleState* find(std::size_t t, VehicleId id) const {
    if (t >= frames_.size()) return nullptr;
    const auto& f = frames_[t];
    auto it = std::lower_bound(f.begin(), f.end(), id, [](const auto& v, VehicleId x) { return v.id < x; });
    return (it != f.end() && it->id == id) ? &*it : nullptr;
  }

  std::vector<VehicleId> vehicle_ids() const {
    std::vector<VehicleId> ids;
    for (const auto& f : frames_)
      for (const auto& v : f) ids.push_back(v.id);
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    return ids;
  }

  friend bool operator==(const TraceSet&, const TraceSet&) = default;

 private:
  double slot_seconds_ = 1.0;
  std::vector<std::vector<VehicleState>> frames_;
};

struct MobilityConfig {
  double base_speed_mps = 8.0;  // r-CAV cruise speed; e-CAVs move twice as fast
  double slot_seconds = 2.0;
  double straight_probability = 0.5;  // remaining mass split evenly between left and right
  double min_spawn_gap_m = 5.0;
};

inline constexpr std::array<double, 4> regular_data_levels{0.25, 0.5, 0.75, 1.0};
inline constexpr double emergency_data_gbit = 1.0;

namespace detail {

// Lane-following agent used by the synthetic generator.
struct Mover {
  std::size_t road = 0;
  int direction = 1;
  int lane = 0;
  double along = 0.0;
  std::optional<std::size_t> next_cross;
  int action = 0;  // 0 straight, 1 left, 2 right
  double event_at = 0.0;
  int new_direction = 1;
};

inline Point mover_position(const Geometry& g, const Mover& m) {
  const Road& r = g.roads()[m.road];
  const double cross = r.lane_coordinate(m.direction, m.lane);
  return r.axis == Axis::horizontal ? Point{m.along, cross} : Point{cross, m.along};
}

inline int turn_direction(Axis current_axis, int direction, bool right) {
  if (current_axis == Axis::horizontal) return right ? -direction : direction;
  return right ? direction : -direction;
}

template <typename Rng>
void plan_next_intersection(const Geometry& g, Mover& m, const MobilityConfig& cfg, Rng& rng) {
  const Road& cur = g.roads()[m.road];
  std::optional<std::size_t> best;
  double best_dist = 0.0;
  for (std::size_t q = 0; q < g.roads().size(); ++q) {
    const Road& r = g.roads()[q];
    if (r.axis == cur.axis) continue;
    const double ahead = m.direction * (r.centre - m.along);
    if (ahead <= r.width() / 2.0) continue;  // behind us, or we are inside it
    if (!best || ahead < best_dist) {
      best = q;
      best_dist = ahead;
    }
  }
  m.next_cross = best;
  if (!best) return;
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const double x = u01(rng);
  m.action = x < cfg.straight_probability ? 0 : (x < cfg.straight_probability + (1.0 - cfg.straight_probability) / 2.0 ? 1 : 2);
  const Road& q = g.roads()[*best];
  if (m.action == 0) {
    m.event_at = q.centre;
  } else {
    m.new_direction = turn_direction(cur.axis, m.direction, m.action == 2);
    m.event_at = q.lane_coordinate(m.new_direction, std::min(m.lane, q.lanes_per_direction() - 1));
  }
}

template <typename Rng>
void advance(const Geometry& g, Mover& m, double travel, const MobilityConfig& cfg, Rng& rng) {
  double remaining = travel;
  for (int guard = 0; remaining > 0.0 && guard < 64; ++guard) {
    const Road& cur = g.roads()[m.road];
    const double extent = cur.axis == Axis::horizontal ? g.width() : g.height();
    if (!m.next_cross) plan_next_intersection(g, m, cfg, rng);
    const double to_edge = m.direction > 0 ? extent - m.along : m.along;
    const double to_event = m.next_cross ? m.direction * (m.event_at - m.along) : to_edge + 1.0;
    if (m.next_cross && to_event <= remaining && to_event <= to_edge) {
      m.along = m.event_at;
      remaining -= std::max(0.0, to_event);
      if (m.action != 0) {
        const Point here = mover_position(g, m);
        const Road& q = g.roads()[*m.next_cross];
        m.lane = std::min(m.lane, q.lanes_per_direction() - 1);
        m.road = *m.next_cross;
        m.direction = m.new_direction;
        m.along = q.axis == Axis::horizontal ? here.x : here.y;
      }
      m.next_cross.reset();
    } else if (to_edge <= remaining) {
      remaining -= to_edge;
      m.along = m.direction > 0 ? 0.0 : extent;  // wrap to the opposite edge
      m.next_cross.reset();
    } else {
      m.along += m.direction * remaining;
      remaining = 0.0;
    }
  }
}

}  // namespace detail

// Synthetic stand-in for SUMO traces: lane-following vehicles on the grid,
// seeded turn choices at intersections, wrap-around at the grid boundary.
inline TraceSet generate_traces(const Geometry& g, int vehicle_count, double ecav_probability, std::size_t duration,
                                std::uint64_t seed, const MobilityConfig& cfg = {}) {
  if (vehicle_count < 1) throw Error("vehicle_count must be >= 1");
  if (!(ecav_probability >= 0.0 && ecav_probability <= 1.0)) throw Error("ecav_probability must lie in [0, 1]");
  if (!(cfg.base_speed_mps >= 0.0)) throw Error("base speed must be >= 0");
  if (g.roads().empty()) throw Error("geometry has no roads");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick_road(0, g.roads().size() - 1);
  std::uniform_int_distribution<std::size_t> pick_level(0, regular_data_levels.size() - 1);

  std::vector<detail::Mover> movers;
  std::vector<VehicleKind> kinds;
  std::vector<Point> placed;
  for (int v = 0; v < vehicle_count; ++v) {
    kinds.push_back(u01(rng) < ecav_probability ? VehicleKind::emergency : VehicleKind::regular);
    detail::Mover m;
    for (int attempt = 0; attempt < 1000; ++attempt) {
      m.road = pick_road(rng);
      const Road& r = g.roads()[m.road];
      m.direction = u01(rng) < 0.5 ? 1 : -1;
      m.lane = std::uniform_int_distribution<int>(0, r.lanes_per_direction() - 1)(rng);
      const double extent = r.axis == Axis::horizontal ? g.width() : g.height();
      m.along = u01(rng) * extent;
      const Point p = detail::mover_position(g, m);
      const bool clear = std::none_of(placed.begin(), placed.end(),
                                      [&](Point o) { return distance(o, p) < cfg.min_spawn_gap_m; });
      if (clear) break;
    }
    placed.push_back(detail::mover_position(g, m));
    movers.push_back(m);
  }

  std::vector<std::vector<VehicleState>> frames(duration);
  for (std::size_t t = 0; t < duration; ++t) {
    auto& frame = frames[t];
    for (int v = 0; v < vehicle_count; ++v) {
      auto& m = movers[static_cast<std::size_t>(v)];
      const VehicleKind kind = kinds[static_cast<std::size_t>(v)];
      const double speed = kind == VehicleKind::emergency ? 2.0 * cfg.base_speed_mps : cfg.base_speed_mps;
      if (t > 0) detail::advance(g, m, speed * cfg.slot_seconds, cfg, rng);
      VehicleState s;
      s.id = v;
      s.kind = kind;
      s.position = detail::mover_position(g, m);
      s.heading = g.roads()[m.road].heading(m.direction);
      s.speed = speed;
      s.generated_gbit = kind == VehicleKind::emergency ? emergency_data_gbit : regular_data_levels[pick_level(rng)];
      frame.push_back(s);
    }
  }
  return TraceSet(cfg.slot_seconds, std::move(frames));
}

// ---- Trace CSV: t,id,kind,x,y,heading,speed,g ----

inline constexpr std::string_view trace_csv_header = "t,id,kind,x,y,heading,speed,g";

inline void write_traces(const TraceSet& traces, std::ostream& os) {
  os << trace_csv_header << '\n';
  for (std::size_t t = 0; t < traces.slot_count(); ++t)
    for (const auto& v : traces.frame(t))
      os << t << ',' << v.id << ',' << kind_code(v.kind) << ',' << format_double(v.position.x) << ','
         << format_double(v.position.y) << ',' << format_double(v.heading) << ',' << format_double(v.speed) << ','
         << format_double(v.generated_gbit) << '\n';
}

inline void save_traces(const TraceSet& traces, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open " + path.string() + " for writing");
  write_traces(traces, os);
  if (!os) throw Error("write failed: " + path.string());
}

enum class OffRoadPolicy { warn, reject };

struct TraceLoadOptions {
  double slot_seconds = 2.0;
  const Geometry* geometry = nullptr;  // enables the on-road check when set
  OffRoadPolicy off_road = OffRoadPolicy::warn;
  std::vector<std::string>* warnings = nullptr;
};

inline TraceSet read_traces(std::istream& is, const TraceLoadOptions& opt = {}) {
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(is, line)) throw ParseError(1, "missing header row");
  ++lineno;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != trace_csv_header) throw ParseError(1, "expected header '" + std::string(trace_csv_header) + "'");

  std::vector<std::vector<VehicleState>> frames;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string_view> cols;
    std::string_view rest(line);
    for (;;) {
      const auto pos = rest.find(',');
      cols.push_back(rest.substr(0, pos));
      if (pos == std::string_view::npos) break;
      rest.remove_prefix(pos + 1);
    }
    if (cols.size() != 8) throw ParseError(lineno, "expected 8 columns, got " + std::to_string(cols.size()));
    std::size_t t = 0;
    VehicleState v;
    if (!parse_int(cols[0], t)) throw ParseError(lineno, "bad timeslot '" + std::string(cols[0]) + "'");
    if (!parse_int(cols[1], v.id)) throw ParseError(lineno, "bad vehicle id '" + std::string(cols[1]) + "'");
    if (cols[2] == "E") {
      v.kind = VehicleKind::emergency;
    } else if (cols[2] == "R") {
      v.kind = VehicleKind::regular;
    } else {
      throw ParseError(lineno, "kind must be E or R");
    }
    const char* names[] = {"x", "y", "heading", "speed", "g"};
    double* fields[] = {&v.position.x, &v.position.y, &v.heading, &v.speed, &v.generated_gbit};
    for (int k = 0; k < 5; ++k)
      if (!parse_double(cols[static_cast<std::size_t>(3 + k)], *fields[k]))
        throw ParseError(lineno, std::string("bad ") + names[k] + " value");
    try {
      TraceSet::validate_state(v, "row");
    } catch (const Error& e) {
      throw ParseError(lineno, e.what());
    }
    if (opt.geometry && !opt.geometry->on_road(v.position)) {
      const std::string msg = "vehicle " + std::to_string(v.id) + " off road at timeslot " + std::to_string(t);
      if (opt.off_road == OffRoadPolicy::reject) throw ParseError(lineno, msg);
      if (opt.warnings) opt.warnings->push_back("line " + std::to_string(lineno) + ": " + msg);
    }
    if (t >= frames.size()) frames.resize(t + 1);
    frames[t].push_back(v);
  }
  return TraceSet(opt.slot_seconds, std::move(frames));
}

inline TraceSet load_traces(const std::filesystem::path& path, const TraceLoadOptions& opt = {}) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open trace file " + path.string());
  try {
    return read_traces(is, opt);
  } catch (const ParseError& e) {
    throw ParseError(e.line(), path.string() + ": " + std::string(e.what()));
  }
}

// Vehicles within distance `radius` of `id` at timeslot t (closed ball),
// nearest first, ties by id.
inline std::vector<VehicleId> neighbors_in_radius(const TraceSet& traces, std::size_t t, VehicleId id, double radius) {
  if (!(radius > 0.0)) throw Error("radius must be positive");
  const VehicleState* self = traces.find(t, id);
  if (!self) throw Error("vehicle " + std::to_string(id) + " not present at timeslot " + std::to_string(t));
  std::vector<std::pair<double, VehicleId>> hits;
  for (const auto& v : traces.frame(t)) {
    if (v.id == id) continue;
    const double d = distance(self->position, v.position);
    if (d <= radius) hits.emplace_back(d, v.id);
  }
  std::sort(hits.begin(), hits.end());
  std::vector<VehicleId> out;
  out.reserve(hits.size());
  for (const auto& h : hits) out.push_back(h.second);
  return out;
}

}  // namespace mmv2v
