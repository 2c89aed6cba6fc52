#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "mmv2v/common.hpp"
#include "mmv2v/geometry.hpp"

namespace mmv2v {

// 60 GHz link-budget constants. The attenuation constant is a ratio (dB).
struct LinkBudgetParams {
  double carrier_frequency_hz = 60e9;
  double bandwidth_hz = 2.16e9;
  double pathloss_exponent = 2.66;
  double tx_power_dbm = 10.0;
  double attenuation_db = 70.0;
  double shadow_sigma_db = 5.8;
  double noise_floor_dbm_per_hz = -174.0;
  double noise_figure_db = 6.0;
  double beamwidth_rad = degrees_to_radians(15.0);

  void validate() const {
    if (!(bandwidth_hz > 0.0)) throw Error("bandwidth must be > 0");
    if (!(pathloss_exponent > 0.0)) throw Error("pathloss exponent must be > 0");
    if (!(beamwidth_rad > 0.0 && beamwidth_rad <= pi)) throw Error("beamwidth must lie in (0, pi]");
    if (!(shadow_sigma_db >= 0.0)) throw Error("shadow sigma must be >= 0");
    if (!(carrier_frequency_hz > 0.0)) throw Error("carrier frequency must be > 0");
  }
};

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double linear_to_db(double lin) { return 10.0 * std::log10(lin); }
inline double dbm_to_mw(double dbm) { return db_to_linear(dbm); }
inline double mw_to_dbm(double mw) { return linear_to_db(mw); }

// Ideal pencil-beam gain 4*pi/theta^2 in dB, zero sidelobes.
inline double antenna_gain_db(double beamwidth_rad) {
  if (!(beamwidth_rad > 0.0 && beamwidth_rad <= pi)) throw Error("beamwidth must lie in (0, pi]");
  return linear_to_db(4.0 * pi / (beamwidth_rad * beamwidth_rad));
}

// Log-distance path loss plus 40 dB/km attenuation, H_att and shadowing.
inline double path_loss_db(double distance_m, const LinkBudgetParams& p, double shadow_db) {
  if (!(distance_m > 0.0)) throw Error("link distance must be > 0");
  return 10.0 * p.pathloss_exponent * std::log10(distance_m) + (40.0 * distance_m / 1000.0 + p.attenuation_db) +
         shadow_db;
}

inline double received_power_dbm(double distance_m, const LinkBudgetParams& p, double shadow_db) {
  return p.tx_power_dbm + 2.0 * antenna_gain_db(p.beamwidth_rad) - path_loss_db(distance_m, p, shadow_db);
}

inline double noise_power_dbm(const LinkBudgetParams& p) {
  if (!(p.bandwidth_hz > 0.0)) throw Error("bandwidth must be > 0");
  return p.noise_floor_dbm_per_hz + 10.0 * std::log10(p.bandwidth_hz) + p.noise_figure_db;
}

inline double sinr_db(double received_dbm, double noise_dbm, double interference_mw) {
  return linear_to_db(dbm_to_mw(received_dbm) / (dbm_to_mw(noise_dbm) + interference_mw));
}

// Zero-mean normal draw in the dB domain.
template <typename Rng>
double sample_shadowing(Rng& rng, double sigma_db) {
  if (sigma_db == 0.0) return 0.0;
  return std::normal_distribution<double>(0.0, sigma_db)(rng);
}

class ShadowSampler {
 public:
  ShadowSampler(double sigma_db, std::uint64_t seed) : sigma_(sigma_db), rng_(seed) {}
  double operator()() { return sample_shadowing(rng_, sigma_); }

 private:
  double sigma_;
  std::mt19937_64 rng_;
};

struct McsEntry {
  int index = 0;
  double k_mcs_db = 0.0;  // SINR threshold
  double rate_gbps = 0.0;

  friend bool operator==(const McsEntry&, const McsEntry&) = default;
};

class McsTable {
 public:
  McsTable() = default;
  explicit McsTable(std::vector<McsEntry> entries) : entries_(std::move(entries)) {
    if (entries_.empty()) throw Error("MCS table is empty");
    for (std::size_t k = 1; k < entries_.size(); ++k)
      if (!(entries_[k].k_mcs_db > entries_[k - 1].k_mcs_db) || !(entries_[k].rate_gbps > entries_[k - 1].rate_gbps))
        throw Error("MCS table rows must be strictly increasing in threshold and rate (row " + std::to_string(k + 1) +
                    ")");
    if (!(entries_.front().rate_gbps > 0.0)) throw Error("MCS rates must be positive");
  }

  std::span<const McsEntry> entries() const { return entries_; }
  bool empty() const { return entries_.empty(); }
  double max_rate_gbps() const { return entries_.empty() ? 0.0 : entries_.back().rate_gbps; }

  static McsTable read_csv(std::istream& is) {
    std::string line;
    std::size_t lineno = 1;
    if (!std::getline(is, line)) throw ParseError(1, "missing MCS header");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "index,k_mcs_db,rate_gbps") throw ParseError(1, "expected header 'index,k_mcs_db,rate_gbps'");
    std::vector<McsEntry> rows;
    while (std::getline(is, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      const auto c1 = line.find(',');
      const auto c2 = c1 == std::string::npos ? c1 : line.find(',', c1 + 1);
      if (c2 == std::string::npos || line.find(',', c2 + 1) != std::string::npos)
        throw ParseError(lineno, "expected 3 columns");
      McsEntry e;
      std::string_view sv(line);
      if (!parse_int(sv.substr(0, c1), e.index) || !parse_double(sv.substr(c1 + 1, c2 - c1 - 1), e.k_mcs_db) ||
          !parse_double(sv.substr(c2 + 1), e.rate_gbps))
        throw ParseError(lineno, "malformed MCS row");
      rows.push_back(e);
    }
    try {
      return McsTable(std::move(rows));
    } catch (const ParseError&) {
      throw;
    } catch (const Error& e) {
      throw ParseError(lineno, e.what());
    }
  }

  static McsTable load(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw Error("cannot open MCS table " + path.string());
    return read_csv(is);
  }

 private:
  std::vector<McsEntry> entries_;
};

#ifndef MMV2V_DEFAULT_MCS_TABLE
#define MMV2V_DEFAULT_MCS_TABLE "data/mcs_80211ad.csv"
#endif

inline std::filesystem::path default_mcs_table_path() { return MMV2V_DEFAULT_MCS_TABLE; }

// Highest-rate entry whose threshold the SINR meets (inclusive).
inline std::optional<McsEntry> select_mcs(double sinr, const McsTable& table) {
  if (table.empty()) throw Error("MCS table is empty");
  const auto rows = table.entries();
  std::optional<McsEntry> best;
  for (const auto& e : rows) {
    if (e.k_mcs_db <= sinr) best = e;
    else break;
  }
  return best;
}

inline double rate_for_sinr(double sinr, const McsTable& table) {
  const auto e = select_mcs(sinr, table);
  return e ? e->rate_gbps : 0.0;
}

struct LinkSample {
  VehicleId tx = 0;
  VehicleId rx = 0;
  double distance_m = 0.0;
  double shadow_db = 0.0;
  double rate_gbps = 0.0;      // under this timeslot's shadowing
  double max_rate_gbps = 0.0;  // best achievable at this distance
  double sinr_db = 0.0;
};

// A radio endpoint with its main lobe steered at `aim`.
struct BeamNode {
  Point position;
  Point aim;
};

// Whether `target` falls within the beam of a node at `from` steered at `aim`.
inline bool in_beam(Point from, Point aim, Point target, double beamwidth_rad) {
  const double ax = aim.x - from.x, ay = aim.y - from.y;
  const double tx = target.x - from.x, ty = target.y - from.y;
  if ((ax == 0.0 && ay == 0.0) || (tx == 0.0 && ty == 0.0)) return false;
  const double angle = std::abs(std::atan2(ax * ty - ay * tx, ax * tx + ay * ty));
  return angle <= beamwidth_rad / 2.0 + 1e-12;
}

// Sum of power (mW) reaching the receiver from concurrent transmitters whose
// main lobes mutually overlap it with a clear line of sight. Path loss uses
// zero shadowing. The caller excludes the receiver's own partner.
inline double interference_mw(const BeamNode& receiver, std::span<const BeamNode> transmitters, const Geometry& geometry,
                              const LinkBudgetParams& p) {
  double total = 0.0;
  for (const auto& k : transmitters) {
    const double d = distance(k.position, receiver.position);
    if (!(d > 0.0)) continue;
    if (!in_beam(k.position, k.aim, receiver.position, p.beamwidth_rad)) continue;
    if (!in_beam(receiver.position, receiver.aim, k.position, p.beamwidth_rad)) continue;
    if (!is_los(geometry, k.position, receiver.position)) continue;
    total += dbm_to_mw(received_power_dbm(d, p, 0.0));
  }
  return total;
}

}  // namespace mmv2v
