#pragma once

#include <algorithm>
#include <span>
#include <vector>

#include "mmv2v/common.hpp"

namespace mmv2v {

// Axis-aligned rectangle, metres.
struct Rect {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;

  bool contains(Point p) const {
    return p.x >= x_min && p.x <= x_max && p.y >= y_min && p.y <= y_max;
  }
  bool contains_strictly(Point p) const {
    return p.x > x_min && p.x < x_max && p.y > y_min && p.y < y_max;
  }
  // Shared area of positive measure (touching edges do not count).
  bool overlaps(const Rect& o) const {
    return x_min < o.x_max && o.x_min < x_max && y_min < o.y_max && o.y_min < y_max;
  }

  friend bool operator==(const Rect&, const Rect&) = default;
};

enum class Axis { horizontal, vertical };

// A straight road spanning the whole grid. `centre` is the y coordinate of a
// horizontal road or the x coordinate of a vertical one.
struct Road {
  Axis axis = Axis::horizontal;
  double centre = 0.0;
  int lanes = 4;
  double lane_width = 3.2;

  double width() const { return lanes * lane_width; }
  int lanes_per_direction() const { return std::max(1, lanes / 2); }

  // Cross-axis coordinate of a lane. direction is +1 (east/north) or -1
  // (west/south); traffic keeps to the right.
  double lane_coordinate(int direction, int lane) const {
    if (lanes == 1) return centre;
    const double offset = (lane + 0.5) * lane_width;
    const bool plus_side = (axis == Axis::horizontal) ? direction < 0 : direction > 0;
    return plus_side ? centre + offset : centre - offset;
  }

  double heading(int direction) const {
    if (axis == Axis::horizontal) return direction > 0 ? 0.0 : pi;
    return direction > 0 ? pi / 2.0 : 3.0 * pi / 2.0;
  }
};

struct Building {
  Rect rect;
  bool interior = false;  // bounded by roads on all four sides
};

struct GeometryConfig {
  double width_m = 100.0;
  double height_m = 100.0;
  int horizontal_roads = 3;
  int vertical_roads = 3;
  int lanes_per_road = 4;
  double lane_width_m = 3.2;
};

class Geometry {
 public:
  Geometry(double width, double height, std::vector<Road> roads, std::vector<Building> buildings)
      : width_(width), height_(height), roads_(std::move(roads)), buildings_(std::move(buildings)) {
    if (!(width_ > 0.0) || !(height_ > 0.0)) throw Error("geometry extent must be positive");
    const Rect extent{0.0, 0.0, width_, height_};
    for (const auto& r : roads_) {
      if (!(r.lane_width > 0.0) || r.lanes < 1) throw Error("road lanes must be >= 1 with positive width");
      const Rect a = road_area(r);
      if (a.x_min < 0.0 || a.y_min < 0.0 || a.x_max > width_ || a.y_max > height_)
        throw Error("road extends outside the grid");
    }
    for (const auto& b : buildings_) {
      if (!extent.contains({b.rect.x_min, b.rect.y_min}) || !extent.contains({b.rect.x_max, b.rect.y_max}))
        throw Error("building outside the grid");
      for (const auto& r : roads_)
        if (b.rect.overlaps(road_area(r))) throw Error("building overlaps a road");
    }
  }

  double width() const { return width_; }
  double height() const { return height_; }
  const std::vector<Road>& roads() const { return roads_; }
  const std::vector<Building>& buildings() const { return buildings_; }

  std::size_t interior_block_count() const {
    return static_cast<std::size_t>(
        std::count_if(buildings_.begin(), buildings_.end(), [](const Building& b) { return b.interior; }));
  }

  Rect road_area(const Road& r) const {
    const double half = r.width() / 2.0;
    if (r.axis == Axis::horizontal) return {0.0, r.centre - half, width_, r.centre + half};
    return {r.centre - half, 0.0, r.centre + half, height_};
  }

  bool within_extent(Point p) const { return Rect{0.0, 0.0, width_, height_}.contains(p); }

  bool on_road(Point p) const {
    return std::any_of(roads_.begin(), roads_.end(), [&](const Road& r) { return road_area(r).contains(p); });
  }

 private:
  double width_;
  double height_;
  std::vector<Road> roads_;
  std::vector<Building> buildings_;
};

namespace detail {

// Centres of `count` roads spread evenly across `extent`.
inline std::vector<double> road_centres(int count, double extent) {
  std::vector<double> c;
  for (int k = 0; k < count; ++k) c.push_back(extent * (k + 1) / (count + 1));
  return c;
}

// Free intervals between roads along one axis, flagged when both ends abut a road.
struct Span {
  double lo, hi;
  bool bounded;
};

inline std::vector<Span> free_spans(const std::vector<double>& centres, double road_width, double extent) {
  std::vector<Span> out;
  double cursor = 0.0;
  bool left_road = false;
  for (double c : centres) {
    const double lo = c - road_width / 2.0;
    if (lo - cursor > 0.0) out.push_back({cursor, lo, left_road});
    cursor = c + road_width / 2.0;
    left_road = true;
  }
  if (extent - cursor > 0.0) out.push_back({cursor, extent, false});
  return out;
}

}  // namespace detail

inline Geometry build_manhattan_grid(const GeometryConfig& cfg) {
  if (!(cfg.width_m > 0.0) || !(cfg.height_m > 0.0)) throw Error("grid extent must be positive");
  if (cfg.horizontal_roads < 1 || cfg.vertical_roads < 1) throw Error("road counts must be >= 1");
  if (cfg.lanes_per_road < 1) throw Error("lanes_per_road must be >= 1");
  if (!(cfg.lane_width_m > 0.0)) throw Error("lane width must be positive");

  const double road_width = cfg.lanes_per_road * cfg.lane_width_m;
  const auto ys = detail::road_centres(cfg.horizontal_roads, cfg.height_m);
  const auto xs = detail::road_centres(cfg.vertical_roads, cfg.width_m);
  const double y_gap = cfg.height_m / (cfg.horizontal_roads + 1);
  const double x_gap = cfg.width_m / (cfg.vertical_roads + 1);
  // Roads must stay inside the extent and must not overlap one another.
  if (road_width / 2.0 > y_gap || road_width / 2.0 > x_gap ||
      (cfg.horizontal_roads > 1 && road_width > y_gap) || (cfg.vertical_roads > 1 && road_width > x_gap))
    throw Error("roads too wide for the grid extent");

  std::vector<Road> roads;
  for (double y : ys) roads.push_back({Axis::horizontal, y, cfg.lanes_per_road, cfg.lane_width_m});
  for (double x : xs) roads.push_back({Axis::vertical, x, cfg.lanes_per_road, cfg.lane_width_m});

  const auto x_spans = detail::free_spans(xs, road_width, cfg.width_m);
  const auto y_spans = detail::free_spans(ys, road_width, cfg.height_m);
  std::vector<Building> buildings;
  for (const auto& ys_ : y_spans)
    for (const auto& xs_ : x_spans)
      buildings.push_back({{xs_.lo, ys_.lo, xs_.hi, ys_.hi}, xs_.bounded && ys_.bounded});

  return Geometry(cfg.width_m, cfg.height_m, std::move(roads), std::move(buildings));
}

// True iff the open segment (a, b) passes through the open interior of r.
// Liang-Barsky clip; a chord of a convex region either lies in the interior
// (apart from its ends) or runs along one edge, so testing the chord midpoint
// settles it.
inline bool segment_enters_rect(Point a, Point b, const Rect& r) {
  double t0 = 0.0;
  double t1 = 1.0;
  const double d[2] = {b.x - a.x, b.y - a.y};
  const double p0[2] = {a.x, a.y};
  const double lo[2] = {r.x_min, r.y_min};
  const double hi[2] = {r.x_max, r.y_max};
  for (int k = 0; k < 2; ++k) {
    if (d[k] == 0.0) {
      if (p0[k] <= lo[k] || p0[k] >= hi[k]) return false;
      continue;
    }
    double ta = (lo[k] - p0[k]) / d[k];
    double tb = (hi[k] - p0[k]) / d[k];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 >= t1) return false;
  }
  const double tm = 0.5 * (t0 + t1);
  return r.contains_strictly({a.x + tm * d[0], a.y + tm * d[1]});
}

inline bool is_los(const Geometry& g, Point a, Point b) {
  for (const auto& bld : g.buildings())
    if (segment_enters_rect(a, b, bld.rect)) return false;
  return true;
}

inline double point_segment_distance(Point p, Point a, Point b) {
  const double dx = b.x - a.x;
  const double dy = b.y - a.y;
  const double len2 = dx * dx + dy * dy;
  if (len2 == 0.0) return distance(p, a);
  const double t = std::clamp(((p.x - a.x) * dx + (p.y - a.y) * dy) / len2, 0.0, 1.0);
  return distance(p, {a.x + t * dx, a.y + t * dy});
}

// Buildings plus other vehicles modelled as discs of `body_radius`. The
// caller leaves the two link endpoints out of `bodies`.
inline bool is_los(const Geometry& g, Point a, Point b, std::span<const Point> bodies, double body_radius) {
  if (!is_los(g, a, b)) return false;
  for (const auto& c : bodies)
    if (point_segment_distance(c, a, b) < body_radius) return false;
  return true;
}

}  // namespace mmv2v
