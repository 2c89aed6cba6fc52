#pragma once

#include <algorithm>
#include <map>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "mmv2v/channel.hpp"
#include "mmv2v/geometry.hpp"
#include "mmv2v/matching.hpp"
#include "mmv2v/traces.hpp"
#include "mmv2v/utility.hpp"

namespace mmv2v {

struct EngineConfig {
  LinkBudgetParams radio;
  McsTable mcs;
  UtilityWeights weights;
  int capacity = 4;
  bool interference = false;
  LinkOptions links;
  bool check_invariants = true;
  bool consistency_check = true;

  void validate() const {
    radio.validate();
    weights.validate();
    if (mcs.empty()) throw Error("MCS table is empty");
    if (capacity < 1) throw Error("capacity must be >= 1");
    if (!(links.vehicle_radius_m > 0.0)) throw Error("vehicle radius must be > 0");
  }
};

// Stable text of every engine parameter, for run fingerprints.
inline std::string describe(const EngineConfig& c) {
  std::ostringstream os;
  const auto& r = c.radio;
  os << "fc=" << format_double(r.carrier_frequency_hz) << ";B=" << format_double(r.bandwidth_hz)
     << ";n=" << format_double(r.pathloss_exponent) << ";ptx=" << format_double(r.tx_power_dbm)
     << ";hatt=" << format_double(r.attenuation_db) << ";sigma=" << format_double(r.shadow_sigma_db)
     << ";nfl=" << format_double(r.noise_floor_dbm_per_hz) << ";nfg=" << format_double(r.noise_figure_db)
     << ";theta=" << format_double(r.beamwidth_rad) << ";w1=" << format_double(c.weights.w1)
     << ";w2=" << format_double(c.weights.w2) << ";R=" << format_double(c.weights.radius_m) << ";c=" << c.capacity
     << ";intf=" << c.interference << ";vblock=" << c.links.vehicle_blockage
     << ";vrad=" << format_double(c.links.vehicle_radius_m) << ";dmin=" << format_double(c.links.min_distance_m)
     << ";mcs=";
  for (const auto& e : c.mcs.entries())
    os << e.index << '/' << format_double(e.k_mcs_db) << '/' << format_double(e.rate_gbps) << ' ';
  return os.str();
}

// Largest k <= configured such that some k candidate links, time-shared
// equally, keep the average rate (1/k) * sum r^max within the slowest chosen
// link's r^max.
inline int effective_capacity(int configured, std::span<const double> candidate_max_rates) {
  if (configured < 1) throw Error("capacity must be >= 1");
  if (candidate_max_rates.empty()) return 1;
  int best = 1;
  for (double floor : candidate_max_rates) {
    std::vector<double> rates;
    for (double r : candidate_max_rates)
      if (r >= floor) rates.push_back(r);
    std::sort(rates.begin(), rates.end());
    double sum = 0.0;
    for (std::size_t k = 0; k < rates.size(); ++k) {
      sum += rates[k];
      if (sum / static_cast<double>(k + 1) <= floor * (1.0 + 1e-12)) best = std::max(best, static_cast<int>(k + 1));
    }
  }
  return std::min(configured, best);
}

struct SlotSchedule {
  int slot_count = 1;
  std::map<AgentPair, int> assignment;
};

// Greedy edge colouring: links in descending weight (ties by pair), each
// takes the lowest slot free at both ends.
inline SlotSchedule schedule_links(const Matching& m, const std::map<AgentPair, double>& weight = {}) {
  std::vector<AgentPair> order(m.pairs().begin(), m.pairs().end());
  auto w = [&](const AgentPair& p) {
    auto it = weight.find(p);
    return it == weight.end() ? 0.0 : it->second;
  };
  std::stable_sort(order.begin(), order.end(), [&](const AgentPair& a, const AgentPair& b) { return w(a) > w(b); });
  std::map<AgentId, std::vector<char>> busy;
  SlotSchedule s;
  int used = 0;
  for (const auto& p : order) {
    auto& ba = busy[p.first];
    auto& bb = busy[p.second];
    int slot = 0;
    while ((slot < static_cast<int>(ba.size()) && ba[static_cast<std::size_t>(slot)]) ||
           (slot < static_cast<int>(bb.size()) && bb[static_cast<std::size_t>(slot)]))
      ++slot;
    for (auto* b : {&ba, &bb}) {
      if (static_cast<int>(b->size()) <= slot) b->resize(static_cast<std::size_t>(slot) + 1, 0);
      (*b)[static_cast<std::size_t>(slot)] = 1;
    }
    s.assignment[p] = slot;
    used = std::max(used, slot + 1);
  }
  s.slot_count = std::max(1, used);
  return s;
}

// Data each end moves over one link: half of the link's slot per direction,
// limited by what the sender still has to share this timeslot.
inline std::pair<double, double> exchanged_data(double rate_from_a, double rate_from_b, int slot_count,
                                                double budget_a, double budget_b, double slot_seconds) {
  if (slot_count < 1) throw Error("slot count must be >= 1");
  const double window = slot_seconds / (2.0 * slot_count);
  return {std::min(std::max(budget_a, 0.0), std::max(rate_from_a, 0.0) * window),
          std::min(std::max(budget_b, 0.0), std::max(rate_from_b, 0.0) * window)};
}

inline std::pair<double, double> exchanged_data(double rate_gbps, int slot_count, double budget_a, double budget_b,
                                                double slot_seconds) {
  return exchanged_data(rate_gbps, rate_gbps, slot_count, budget_a, budget_b, slot_seconds);
}

struct LinkReport {
  VehicleId partner = 0;
  VehicleKind partner_kind = VehicleKind::regular;
  int slot = 0;
  double utility = 0.0;       // own utility for this partner
  double rate_gbps = 0.0;     // rate used when sending
  double max_rate_gbps = 0.0;
  double sent_gbit = 0.0;
  double received_gbit = 0.0;
};

struct VehicleReport {
  VehicleId id = 0;
  VehicleKind kind = VehicleKind::regular;
  int capacity = 1;  // after the rate cap
  std::vector<LinkReport> links;
  int emergency_partners = 0;
  int regular_partners = 0;
  double avg_rate_gbps = 0.0;
  double exchanged_gbit = 0.0;
  double utilisation = 0.0;
  double regional_access_gbit = 0.0;

  int degree() const { return static_cast<int>(links.size()); }
};

struct TimeslotReport {
  std::size_t t = 0;
  std::vector<VehicleReport> vehicles;  // sorted by id
  int slot_count = 1;
  bool sf_unsolvable_fallback = false;
  std::optional<Unsolvable> unsolvable_reason;
  double objective = 0.0;  // summed own-utility over matched links
  std::size_t matched_pairs = 0;
  bool consistency_checked = false;
};

// Everything the matching game sees in one timeslot.
struct SlotGame {
  std::map<VehicleId, PreferenceList> preferences;
  SfInstance instance;
};

inline SlotGame build_slot_game(const BeaconSnapshot& snap, const LinkTable& links, const EngineConfig& cfg) {
  SlotGame game;
  for (const auto& b : snap.beacons) {
    const VehicleId id = b.state.id;
    PreferenceList pl = build_preference_list(id, snap, links, cfg.weights, cfg.capacity);
    std::vector<double> caps;
    for (const auto& e : pl.entries) caps.push_back(links.find(id, e.candidate)->max_rate_gbps);
    pl.capacity = effective_capacity(cfg.capacity, caps);
    game.instance.agents.push_back(id);
    game.instance.capacities[id] = pl.capacity;
    game.instance.preferences[id] = pl.ids();
    game.preferences.emplace(id, std::move(pl));
  }
  return game;
}

// The instance one vehicle would build on its own, working only from the
// beacon contents it received (regional data recomputed from positions).
inline SfInstance instance_from_perspective(VehicleId observer, const BeaconSnapshot& snap, const LinkTable& links,
                                            const EngineConfig& cfg) {
  if (!snap.find(observer)) throw Error("observer not in snapshot");
  const double radius = cfg.weights.radius_m;
  BeaconSnapshot local = snap;
  // Visit beacons starting from the observer, as its own receive order would.
  std::vector<std::size_t> order(snap.beacons.size());
  const std::size_t start = static_cast<std::size_t>(snap.find(observer) - snap.beacons.data());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = (start + k) % order.size();
  std::map<VehicleId, double> q;
  for (std::size_t k : order) {
    const auto& self = snap.beacons[k].state;
    double sum = self.generated_gbit;
    for (const auto& other : snap.beacons)
      if (other.state.id != self.id && distance(self.position, other.state.position) <= radius)
        sum += other.state.generated_gbit;
    q[self.id] = sum;
  }
  const auto qn = normalize_regional(q);
  for (auto& b : local.beacons) {
    b.regional_gbit = q.at(b.state.id);
    b.regional_norm = qn.at(b.state.id);
  }
  return build_slot_game(local, links, cfg).instance;
}

// Direction-specific rates once concurrent links in the same slot half are
// known. Half 0: lower id transmits; half 1: higher id transmits.
inline std::map<std::pair<VehicleId, VehicleId>, double> interference_limited_rates(
    const Matching& m, const SlotSchedule& sched, const BeaconSnapshot& snap, const LinkTable& links,
    const Geometry& g, const EngineConfig& cfg) {
  std::map<std::pair<VehicleId, VehicleId>, double> out;  // (tx, rx) -> rate
  const double noise = noise_power_dbm(cfg.radio);
  for (int half = 0; half < 2; ++half) {
    std::map<int, std::vector<std::pair<VehicleId, VehicleId>>> by_slot;  // (tx, rx)
    for (const auto& p : m.pairs()) {
      const auto link = half == 0 ? std::pair{p.first, p.second} : std::pair{p.second, p.first};
      by_slot[sched.assignment.at(p)].push_back(link);
    }
    for (const auto& [slot, active] : by_slot) {
      for (const auto& [tx, rx] : active) {
        const Point ptx = snap.find(tx)->state.position;
        const Point prx = snap.find(rx)->state.position;
        std::vector<BeamNode> others;
        for (const auto& [otx, orx] : active)
          if (otx != tx) others.push_back({snap.find(otx)->state.position, snap.find(orx)->state.position});
        const double i_mw = interference_mw({prx, ptx}, others, g, cfg.radio);
        const LinkSample* s = links.find(tx, rx);
        const double d = std::max(s->distance_m, cfg.links.min_distance_m);
        const double sinr = sinr_db(received_power_dbm(d, cfg.radio, s->shadow_db), noise, i_mw);
        out[{tx, rx}] = rate_for_sinr(sinr, cfg.mcs);
      }
    }
  }
  return out;
}

// Per-timeslot constraint audit. Returns one message per violation.
inline std::vector<std::string> check_timeslot_invariants(const TimeslotReport& rep, const BeaconSnapshot& snap,
                                                          const Geometry& g, const EngineConfig& cfg,
                                                          double slot_seconds) {
  std::vector<std::string> bad;
  const std::string at = " at t=" + std::to_string(rep.t);
  double sent = 0.0;
  double received = 0.0;
  std::map<VehicleId, const VehicleReport*> by_id;
  for (const auto& v : rep.vehicles) by_id[v.id] = &v;
  for (const auto& v : rep.vehicles) {
    const std::string who = "vehicle " + std::to_string(v.id) + at;
    if (v.degree() > cfg.capacity || v.degree() > v.capacity) bad.push_back("capacity exceeded by " + who);
    std::vector<int> slots;
    double best_max = 0.0;
    for (const auto& l : v.links) {
      const Beacon* a = snap.find(v.id);
      const Beacon* b = snap.find(l.partner);
      if (!a || !b) {
        bad.push_back("link to absent vehicle from " + who);
        continue;
      }
      const double d = distance(a->state.position, b->state.position);
      if (d > cfg.weights.radius_m + 1e-9) bad.push_back("link beyond radius from " + who);
      if (!is_los(g, a->state.position, b->state.position)) bad.push_back("non-LOS link from " + who);
      if (l.slot < 0 || l.slot >= rep.slot_count) bad.push_back("slot out of range for " + who);
      slots.push_back(l.slot);
      best_max = std::max(best_max, l.max_rate_gbps);
      sent += l.sent_gbit;
      received += l.received_gbit;
      auto it = by_id.find(l.partner);
      bool mirrored = false;
      if (it != by_id.end())
        for (const auto& back : it->second->links)
          if (back.partner == v.id) mirrored = back.slot == l.slot && back.sent_gbit == l.received_gbit;
      if (!mirrored) bad.push_back("asymmetric link record for " + who);
    }
    std::sort(slots.begin(), slots.end());
    if (std::adjacent_find(slots.begin(), slots.end()) != slots.end()) bad.push_back("half-duplex clash for " + who);
    if (!(v.utilisation >= 0.0 && v.utilisation <= 1.0 + 1e-12)) bad.push_back("utilisation outside [0,1] for " + who);
    if (v.exchanged_gbit > slot_seconds * best_max * (1.0 + 1e-12) + 1e-12)
      bad.push_back("exchanged data above link capacity for " + who);
  }
  if (std::abs(sent - received) > 1e-9 * std::max(1.0, sent)) bad.push_back("data not conserved" + at);
  return bad;
}

inline TimeslotReport run_timeslot(const TraceSet& traces, const Geometry& g, std::size_t t, const EngineConfig& cfg,
                                   std::mt19937_64& rng, std::mt19937_64* audit_rng = nullptr) {
  if (t >= traces.slot_count()) throw Error("timeslot " + std::to_string(t) + " missing from traces");
  const double slot_seconds = traces.slot_seconds();
  TimeslotReport rep;
  rep.t = t;

  const BeaconSnapshot snap = take_snapshot(traces, t, cfg.weights.radius_m);
  if (snap.beacons.empty()) return rep;
  const LinkTable links = sample_links(snap, g, cfg.radio, cfg.mcs, cfg.weights.radius_m, rng, cfg.links);
  const SlotGame game = build_slot_game(snap, links, cfg);

  if (cfg.consistency_check && audit_rng) {
    std::uniform_int_distribution<std::size_t> pick(0, snap.beacons.size() - 1);
    const VehicleId observer = snap.beacons[pick(*audit_rng)].state.id;
    if (!(instance_from_perspective(observer, snap, links, cfg) == game.instance))
      throw Error("vehicle " + std::to_string(observer) + " builds a different game at t=" + std::to_string(t));
    rep.consistency_checked = true;
  }

  auto own_utility = [&](VehicleId a, VehicleId b) {
    for (const auto& e : game.preferences.at(a).entries)
      if (e.candidate == b) return e.utility;
    return 0.0;
  };
  auto pair_weight = [&](VehicleId a, VehicleId b) { return own_utility(a, b) + own_utility(b, a); };

  const SfOutcome outcome = solve(game.instance);
  Matching matching;
  if (outcome.solved()) {
    matching = *outcome.matching;
  } else {
    matching = greedy_matching(game.instance, pair_weight);
    rep.sf_unsolvable_fallback = true;
    rep.unsolvable_reason = outcome.reason;
  }
  rep.matched_pairs = matching.size();

  std::map<AgentPair, double> weights;
  for (const auto& p : matching.pairs()) weights[p] = pair_weight(p.first, p.second);
  const SlotSchedule sched = schedule_links(matching, weights);
  rep.slot_count = sched.slot_count;

  std::map<std::pair<VehicleId, VehicleId>, double> directional;
  if (cfg.interference) directional = interference_limited_rates(matching, sched, snap, links, g, cfg);
  auto send_rate = [&](VehicleId tx, VehicleId rx) {
    if (cfg.interference) return directional.at({tx, rx});
    return links.find(tx, rx)->rate_gbps;
  };

  // Each sender spends its data budget across its links, best partner first.
  std::map<std::pair<VehicleId, VehicleId>, double> sent;  // (tx, rx) -> Gbit
  for (const auto& b : snap.beacons) {
    const VehicleId id = b.state.id;
    std::vector<std::pair<double, VehicleId>> order;
    for (VehicleId p : matching.partners(id)) order.push_back({own_utility(id, p), p});
    std::sort(order.begin(), order.end(), [](const auto& x, const auto& y) {
      return x.first != y.first ? x.first > y.first : x.second < y.second;
    });
    double budget = b.state.generated_gbit;
    for (const auto& [u, p] : order) {
      const double amount = exchanged_data(send_rate(id, p), 0.0, sched.slot_count, budget, 0.0, slot_seconds).first;
      sent[{id, p}] = amount;
      budget -= amount;
    }
  }

  for (const auto& b : snap.beacons) {
    VehicleReport v;
    v.id = b.state.id;
    v.kind = b.state.kind;
    v.capacity = game.instance.capacity(v.id);
    double best_max = 0.0;
    double rate_sum = 0.0;
    for (VehicleId p : matching.partners(v.id)) {
      const LinkSample* s = links.find(v.id, p);
      const Beacon* pb = snap.find(p);
      LinkReport l;
      l.partner = p;
      l.partner_kind = pb->state.kind;
      l.slot = sched.assignment.at(Matching::key(v.id, p));
      l.utility = own_utility(v.id, p);
      l.rate_gbps = send_rate(v.id, p);
      l.max_rate_gbps = s->max_rate_gbps;
      l.sent_gbit = sent.at({v.id, p});
      l.received_gbit = sent.at({p, v.id});
      (pb->state.kind == VehicleKind::emergency ? v.emergency_partners : v.regular_partners)++;
      best_max = std::max(best_max, l.max_rate_gbps);
      rate_sum += s->max_rate_gbps;
      v.exchanged_gbit += l.sent_gbit + l.received_gbit;
      v.regional_access_gbit += pb->regional_gbit;
      rep.objective += l.utility;
      v.links.push_back(l);
    }
    std::sort(v.links.begin(), v.links.end(), [](const auto& x, const auto& y) { return x.partner < y.partner; });
    v.avg_rate_gbps = rate_sum / sched.slot_count;
    v.utilisation = best_max > 0.0 ? v.exchanged_gbit / (slot_seconds * best_max) : 0.0;
    rep.vehicles.push_back(std::move(v));
  }

  if (cfg.check_invariants) {
    const auto bad = check_timeslot_invariants(rep, snap, g, cfg, slot_seconds);
    if (!bad.empty()) throw Error("engine invariant violated: " + bad.front());
  }
  return rep;
}

struct RunMetadata {
  std::uint64_t seed = 0;
  std::string config_hash;
  std::size_t slot_count = 0;
  std::size_t vehicle_count = 0;
  double slot_seconds = 1.0;
  std::size_t fallback_slots = 0;
  std::size_t odd_degree_slots = 0;
  std::size_t short_list_slots = 0;
};

struct SimulationResult {
  RunMetadata meta;
  std::vector<TimeslotReport> slots;
};

inline std::string run_fingerprint(const TraceSet& traces, const EngineConfig& cfg) {
  std::ostringstream os;
  write_traces(traces, os);
  std::uint64_t h = fnv1a(describe(cfg));
  h = fnv1a(os.str(), h);
  h = fnv1a(format_double(traces.slot_seconds()), h);
  return hex64(h);
}

inline SimulationResult run_scenario(const TraceSet& traces, const Geometry& g, const EngineConfig& cfg,
                                     std::uint64_t seed) {
  cfg.validate();
  for (std::size_t t = 0; t < traces.slot_count(); ++t)
    for (const auto& v : traces.frame(t))
      if (!g.within_extent(v.position))
        throw Error("traces do not match the geometry: vehicle " + std::to_string(v.id) + " outside the grid at t=" +
                    std::to_string(t));

  SimulationResult result;
  result.meta.seed = seed;
  result.meta.config_hash = run_fingerprint(traces, cfg);
  result.meta.slot_count = traces.slot_count();
  result.meta.vehicle_count = traces.vehicle_ids().size();
  result.meta.slot_seconds = traces.slot_seconds();

  std::mt19937_64 rng(derive_seed(seed, 1));
  std::mt19937_64 audit(derive_seed(seed, 2));
  for (std::size_t t = 0; t < traces.slot_count(); ++t) {
    result.slots.push_back(run_timeslot(traces, g, t, cfg, rng, &audit));
    const auto& r = result.slots.back();
    if (r.sf_unsolvable_fallback) {
      ++result.meta.fallback_slots;
      (*r.unsolvable_reason == Unsolvable::odd_degree_sum ? result.meta.odd_degree_slots
                                                          : result.meta.short_list_slots)++;
    }
  }
  return result;
}

}  // namespace mmv2v
