#pragma once

#include <algorithm>
#include <map>
#include <vector>

#include "mmv2v/channel.hpp"
#include "mmv2v/common.hpp"
#include "mmv2v/geometry.hpp"
#include "mmv2v/matching.hpp"
#include "mmv2v/traces.hpp"

namespace mmv2v {

struct UtilityWeights {
  double w1 = 0.5;  // distance term
  double w2 = 0.5;  // heading term
  double radius_m = 20.0;

  void validate() const {
    if (!(w1 >= 0.0) || !(w2 >= 0.0)) throw Error("utility weights must be >= 0");
    if (std::abs(w1 + w2 - 1.0) > 1e-9) throw Error("utility weights must sum to 1");
    if (!(radius_m > 0.0)) throw Error("radius must be > 0");
  }
};

inline double type_weight(VehicleKind kind) { return kind == VehicleKind::emergency ? 1.0 : 0.5; }

// Own data plus everything generated inside the radius, line of sight or not.
inline double regional_data(const TraceSet& traces, std::size_t t, VehicleId id, double radius) {
  const VehicleState* self = traces.find(t, id);
  if (!self) throw Error("vehicle " + std::to_string(id) + " not present at timeslot " + std::to_string(t));
  double q = self->generated_gbit;
  for (VehicleId j : neighbors_in_radius(traces, t, id, radius)) q += traces.find(t, j)->generated_gbit;
  return q;
}

inline std::map<VehicleId, double> normalize_regional(const std::map<VehicleId, double>& regional) {
  if (regional.empty()) throw Error("no regional data to normalise");
  double peak = 0.0;
  for (const auto& [id, q] : regional) {
    if (!(q > 0.0)) throw Error("regional data must be > 0 (vehicle " + std::to_string(id) + ")");
    peak = std::max(peak, q);
  }
  std::map<VehicleId, double> out;
  for (const auto& [id, q] : regional) out[id] = q / peak;
  return out;
}

// Absolute heading difference folded into [0, pi].
inline double heading_difference(double a, double b) {
  double d = std::fmod(std::abs(a - b), two_pi);
  return std::min(d, two_pi - d);
}

inline double direction_distance_score(double distance_m, double heading_diff, const UtilityWeights& w) {
  if (distance_m > w.radius_m) throw Error("candidate beyond radius");
  return w.w1 * (w.radius_m - distance_m) / w.radius_m + w.w2 * (pi - heading_diff) / pi;
}

// Partner value times link quality; rate ratio clamped to [0, 1].
inline double utility(double partner_type_weight, double partner_regional_norm, double score, double rate_gbps,
                      double max_rate_gbps) {
  if (!(max_rate_gbps > 0.0) || !(rate_gbps > 0.0)) return 0.0;
  const double ratio = std::clamp(rate_gbps / max_rate_gbps, 0.0, 1.0);
  return partner_type_weight * partner_regional_norm * score * ratio;
}

// What every vehicle learns from DSRC beacons in one timeslot.
struct Beacon {
  VehicleState state;
  double regional_gbit = 0.0;
  double regional_norm = 0.0;
};

struct BeaconSnapshot {
  std::size_t t = 0;
  std::vector<Beacon> beacons;  // sorted by id

  const Beacon* find(VehicleId id) const {
    auto it = std::lower_bound(beacons.begin(), beacons.end(), id,
                               [](const Beacon& b, VehicleId x) { return b.state.id < x; });
    return (it != beacons.end() && it->state.id == id) ? &*it : nullptr;
  }
};

inline BeaconSnapshot take_snapshot(const TraceSet& traces, std::size_t t, double radius) {
  BeaconSnapshot snap;
  snap.t = t;
  const auto frame = traces.frame(t);
  std::map<VehicleId, double> q;
  for (const auto& v : frame) q[v.id] = regional_data(traces, t, v.id, radius);
  if (frame.empty()) return snap;
  const auto qn = normalize_regional(q);
  for (const auto& v : frame) snap.beacons.push_back({v, q.at(v.id), qn.at(v.id)});
  return snap;
}

struct LinkOptions {
  bool vehicle_blockage = false;
  double vehicle_radius_m = 1.0;
  double min_distance_m = 1.0;  // link budget evaluated no closer than this
};

// Channel state of every pair within the radius and in line of sight for one
// timeslot. One shadowing draw per unordered pair, shared by both directions.
class LinkTable {
 public:
  const LinkSample* find(VehicleId a, VehicleId b) const {
    auto it = links_.find(Matching::key(a, b));
    return it == links_.end() ? nullptr : &it->second;
  }
  void insert(const LinkSample& s) { links_[Matching::key(s.tx, s.rx)] = s; }
  const std::map<AgentPair, LinkSample>& all() const { return links_; }
  std::size_t size() const { return links_.size(); }

 private:
  std::map<AgentPair, LinkSample> links_;
};

inline LinkSample evaluate_link(VehicleId a, VehicleId b, double distance_m, double shadow_db,
                                const LinkBudgetParams& p, const McsTable& mcs, const LinkOptions& opt = {}) {
  const double d = std::max(distance_m, opt.min_distance_m);
  const double noise = noise_power_dbm(p);
  LinkSample s;
  s.tx = std::min(a, b);
  s.rx = std::max(a, b);
  s.distance_m = distance_m;
  s.shadow_db = shadow_db;
  s.sinr_db = sinr_db(received_power_dbm(d, p, shadow_db), noise, 0.0);
  s.rate_gbps = rate_for_sinr(s.sinr_db, mcs);
  const double median = rate_for_sinr(sinr_db(received_power_dbm(d, p, 0.0), noise, 0.0), mcs);
  s.max_rate_gbps = std::max(median, s.rate_gbps);
  return s;
}

template <typename Rng>
LinkTable sample_links(const BeaconSnapshot& snap, const Geometry& g, const LinkBudgetParams& p, const McsTable& mcs,
                       double radius, Rng& rng, const LinkOptions& opt = {}) {
  LinkTable table;
  const auto& b = snap.beacons;
  std::vector<Point> bodies;
  for (std::size_t i = 0; i < b.size(); ++i) {
    for (std::size_t j = i + 1; j < b.size(); ++j) {
      const Point pi_ = b[i].state.position;
      const Point pj = b[j].state.position;
      const double d = distance(pi_, pj);
      if (d > radius) continue;
      bool los = is_los(g, pi_, pj);
      if (los && opt.vehicle_blockage) {
        bodies.clear();
        for (std::size_t k = 0; k < b.size(); ++k)
          if (k != i && k != j) bodies.push_back(b[k].state.position);
        los = is_los(g, pi_, pj, bodies, opt.vehicle_radius_m);
      }
      if (!los) continue;
      const double shadow = sample_shadowing(rng, p.shadow_sigma_db);
      table.insert(evaluate_link(b[i].state.id, b[j].state.id, d, shadow, p, mcs, opt));
    }
  }
  return table;
}

struct PreferenceEntry {
  VehicleId candidate = 0;
  double utility = 0.0;

  friend bool operator==(const PreferenceEntry&, const PreferenceEntry&) = default;
};

struct PreferenceList {
  VehicleId owner = 0;
  std::vector<PreferenceEntry> entries;  // best first
  int capacity = 1;

  std::vector<VehicleId> ids() const {
    std::vector<VehicleId> out;
    for (const auto& e : entries) out.push_back(e.candidate);
    return out;
  }

  friend bool operator==(const PreferenceList&, const PreferenceList&) = default;
};

inline void sort_preferences(std::vector<PreferenceEntry>& entries) {
  std::sort(entries.begin(), entries.end(), [](const PreferenceEntry& a, const PreferenceEntry& b) {
    if (a.utility != b.utility) return a.utility > b.utility;
    return a.candidate < b.candidate;
  });
}

inline double pair_utility(const Beacon& self, const Beacon& other, const LinkSample& link, const UtilityWeights& w) {
  const double e = direction_distance_score(link.distance_m, heading_difference(self.state.heading, other.state.heading), w);
  return utility(type_weight(other.state.kind), other.regional_norm, e, link.rate_gbps, link.max_rate_gbps);
}

// Candidates: in line of sight, within the radius, with a usable MCS.
inline PreferenceList build_preference_list(VehicleId owner, const BeaconSnapshot& snap, const LinkTable& links,
                                            const UtilityWeights& w, int capacity) {
  const Beacon* self = snap.find(owner);
  if (!self) throw Error("vehicle " + std::to_string(owner) + " missing from snapshot");
  PreferenceList pl;
  pl.owner = owner;
  pl.capacity = capacity;
  for (const auto& other : snap.beacons) {
    if (other.state.id == owner) continue;
    const LinkSample* link = links.find(owner, other.state.id);
    if (!link || !(link->rate_gbps > 0.0) || link->distance_m > w.radius_m) continue;
    pl.entries.push_back({other.state.id, pair_utility(*self, other, *link, w)});
  }
  sort_preferences(pl.entries);
  return pl;
}

}  // namespace mmv2v
