#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "mmv2v/engine.hpp"

namespace mmv2v {

enum class KindFilter { all, emergency, regular };

inline constexpr KindFilter all_filters[] = {KindFilter::all, KindFilter::emergency, KindFilter::regular};

inline std::string_view to_string(KindFilter f) {
  switch (f) {
    case KindFilter::all: return "all";
    case KindFilter::emergency: return "emergency";
    case KindFilter::regular: return "regular";
  }
  return "?";
}

inline bool passes(KindFilter f, VehicleKind k) {
  return f == KindFilter::all || (f == KindFilter::emergency) == (k == VehicleKind::emergency);
}

// Empirical CDF: one point per sample, tied samples share the upper fraction.
struct CdfSeries {
  std::vector<double> values;
  std::vector<double> fractions;

  std::size_t size() const { return values.size(); }

  // Fraction of samples <= x.
  double at(double x) const {
    auto it = std::upper_bound(values.begin(), values.end(), x);
    return it == values.begin() ? 0.0 : fractions[static_cast<std::size_t>(it - values.begin()) - 1];
  }
};

inline CdfSeries empirical_cdf(std::vector<double> samples) {
  if (samples.empty()) throw Error("empty sample set");
  std::sort(samples.begin(), samples.end());
  CdfSeries cdf;
  const double n = static_cast<double>(samples.size());
  for (std::size_t k = 0; k < samples.size(); ++k) {
    const auto upto = std::upper_bound(samples.begin(), samples.end(), samples[k]) - samples.begin();
    cdf.values.push_back(samples[k]);
    cdf.fractions.push_back(static_cast<double>(upto) / n);
  }
  return cdf;
}

using VehicleMetric = std::function<double(const VehicleReport&)>;

inline std::vector<double> collect(std::span<const SimulationResult> results, KindFilter f, const VehicleMetric& m) {
  std::vector<double> out;
  for (const auto& r : results)
    for (const auto& slot : r.slots)
      for (const auto& v : slot.vehicles)
        if (passes(f, v.kind)) out.push_back(m(v));
  return out;
}

inline double mean_of(const std::vector<double>& xs) {
  if (xs.empty()) throw Error("empty sample set");
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

inline double utilisation_of(const VehicleReport& v) { return v.utilisation; }
inline double exchanged_of(const VehicleReport& v) { return v.exchanged_gbit; }
inline double access_of(const VehicleReport& v) { return v.regional_access_gbit; }

inline CdfSeries link_utilisation_cdf(std::span<const SimulationResult> results, KindFilter f) {
  return empirical_cdf(collect(results, f, utilisation_of));
}

inline double mean_utilisation(std::span<const SimulationResult> results, KindFilter f) {
  return mean_of(collect(results, f, utilisation_of));
}

inline double average_exchanged(std::span<const SimulationResult> results, KindFilter f) {
  return mean_of(collect(results, f, exchanged_of));
}

inline double average_regional_access(std::span<const SimulationResult> results, KindFilter f) {
  return mean_of(collect(results, f, access_of));
}

// Mean over seeds of each seed's own mean. Seeds with no matching samples
// are skipped; throws if none remain.
inline double seed_mean(std::span<const SimulationResult> per_seed, KindFilter f, const VehicleMetric& m) {
  std::vector<double> means;
  for (const auto& r : per_seed) {
    const auto xs = collect(std::span(&r, 1), f, m);
    if (!xs.empty()) means.push_back(mean_of(xs));
  }
  return mean_of(means);
}

struct SummaryMetric {
  std::string name;
  VehicleMetric fn;
};

inline std::vector<SummaryMetric> default_summary_metrics() {
  return {{"mean_utilisation", utilisation_of},
          {"avg_exchanged_gbit", exchanged_of},
          {"avg_regional_access_gbit", access_of}};
}

struct SummaryRow {
  KindFilter filter;
  std::string metric;
  double value = 0.0;
  std::size_t samples = 0;
};

// One row per (filter, metric) pair that has samples.
inline std::vector<SummaryRow> summarise(std::span<const SimulationResult> results,
                                         std::span<const KindFilter> filters = all_filters,
                                         const std::vector<SummaryMetric>& metrics = default_summary_metrics()) {
  std::vector<SummaryRow> rows;
  for (KindFilter f : filters)
    for (const auto& m : metrics) {
      const auto xs = collect(results, f, m.fn);
      if (!xs.empty()) rows.push_back({f, m.name, mean_of(xs), xs.size()});
    }
  return rows;
}

namespace detail {

inline std::ofstream open_output(const std::filesystem::path& p) {
  std::ofstream os(p, std::ios::binary | std::ios::trunc);
  if (!os) throw Error("cannot write " + p.string());
  return os;
}

inline void close_output(std::ofstream& os, const std::filesystem::path& p) {
  os.flush();
  if (!os) throw Error("write failed for " + p.string());
}

}  // namespace detail

inline constexpr std::string_view report_csv_header =
    "t,id,kind,degree,C_i_gbps,D_i_gbit,utilisation,regional_access_gbit,fallback_flag";

inline void write_report_csv(const SimulationResult& r, std::ostream& os) {
  os << report_csv_header << '\n';
  for (const auto& slot : r.slots)
    for (const auto& v : slot.vehicles)
      os << slot.t << ',' << v.id << ',' << kind_code(v.kind) << ',' << v.degree() << ','
         << format_double(v.avg_rate_gbps) << ',' << format_double(v.exchanged_gbit) << ','
         << format_double(v.utilisation) << ',' << format_double(v.regional_access_gbit) << ','
         << (slot.sf_unsolvable_fallback ? 1 : 0) << '\n';
}

inline void write_cdf_csv(const std::vector<double>& samples, std::ostream& os) {
  os << "utilisation,fraction\n";
  if (samples.empty()) return;
  const CdfSeries cdf = empirical_cdf(samples);
  for (std::size_t k = 0; k < cdf.size(); ++k)
    os << format_double(cdf.values[k]) << ',' << format_double(cdf.fractions[k]) << '\n';
}

inline void write_summary_csv(const std::vector<SummaryRow>& rows, std::ostream& os) {
  os << "filter,metric,value,samples\n";
  for (const auto& row : rows)
    os << to_string(row.filter) << ',' << row.metric << ',' << format_double(row.value) << ',' << row.samples << '\n';
}

inline nlohmann::ordered_json run_manifest(const SimulationResult& r, const nlohmann::ordered_json& config = {}) {
  nlohmann::ordered_json j;
  j["seed"] = r.meta.seed;
  j["config_hash"] = r.meta.config_hash;
  j["slot_seconds"] = r.meta.slot_seconds;
  j["timeslots"] = r.meta.slot_count;
  j["vehicles"] = r.meta.vehicle_count;
  j["fallback_timeslots"] = r.meta.fallback_slots;
  j["unsolvable"] = {{"odd_degree_sum", r.meta.odd_degree_slots}, {"short_list", r.meta.short_list_slots}};
  if (!config.is_null()) j["config"] = config;
  return j;
}

// report.csv, cdf_<filter>.csv, summary.csv and meta.json under `dir`.
inline std::vector<std::filesystem::path> write_outputs(const SimulationResult& r, const std::filesystem::path& dir,
                                                        const nlohmann::ordered_json& config = {}) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error("cannot create " + dir.string() + ": " + ec.message());
  std::vector<std::filesystem::path> written;
  auto emit = [&](const std::string& name, const std::function<void(std::ostream&)>& body) {
    const auto p = dir / name;
    auto os = detail::open_output(p);
    body(os);
    detail::close_output(os, p);
    written.push_back(p);
  };
  const std::span<const SimulationResult> one(&r, 1);
  emit("report.csv", [&](std::ostream& os) { write_report_csv(r, os); });
  for (KindFilter f : all_filters)
    emit("cdf_" + std::string(to_string(f)) + ".csv",
         [&](std::ostream& os) { write_cdf_csv(collect(one, f, utilisation_of), os); });
  emit("summary.csv", [&](std::ostream& os) { write_summary_csv(summarise(one), os); });
  emit("meta.json", [&](std::ostream& os) { os << run_manifest(r, config).dump(2) << '\n'; });
  return written;
}

}  // namespace mmv2v
