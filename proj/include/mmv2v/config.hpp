#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <type_traits>

#include <json.hpp>

#include "mmv2v/channel.hpp"
#include "mmv2v/engine.hpp"
#include "mmv2v/geometry.hpp"
#include "mmv2v/traces.hpp"
#include "mmv2v/utility.hpp"

namespace mmv2v {

class ConfigError : public Error {
 public:
  ConfigError(const std::string& key, const std::string& what) : Error(key + ": " + what), key_(key) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

struct RunConfig {
  GeometryConfig geometry;
  MobilityConfig mobility;
  int vehicle_count = 20;
  double ecav_probability = 0.15;
  std::size_t duration = 300;

  LinkBudgetParams radio;
  std::filesystem::path mcs_table = default_mcs_table_path();
  bool interference = false;
  bool vehicle_blockage = false;
  double vehicle_radius_m = 1.0;

  UtilityWeights weights;
  int capacity = 4;

  std::uint64_t seed = 1;
  int seeds = 1;
  std::optional<std::filesystem::path> traces;
  std::filesystem::path output_dir = "out";
  bool check_invariants = true;
};

// Command-line values that take precedence over the file.
struct ConfigOverrides {
  std::optional<int> capacity;
  std::optional<double> radius_m;
  std::optional<double> beamwidth_deg;
  std::optional<std::uint64_t> seed;
  std::optional<int> seeds;
  std::optional<std::filesystem::path> traces;
  std::optional<std::filesystem::path> output_dir;
  std::optional<bool> interference;
};

namespace detail {

using Json = nlohmann::json;

class SectionReader {
 public:
  SectionReader(const Json& root, std::string name) : name_(std::move(name)) {
    if (!root.contains(name_)) return;
    node_ = &root.at(name_);
    if (!node_->is_object()) throw ConfigError(name_, "expected an object");
  }

  void number(const std::string& key, double& out) {
    if (const Json* v = take(key)) {
      if (!v->is_number()) throw ConfigError(path(key), "expected a number");
      out = v->get<double>();
    }
  }

  template <typename Int>
  void integer(const std::string& key, Int& out) {
    if (const Json* v = take(key)) {
      if (!v->is_number_integer()) throw ConfigError(path(key), "expected an integer");
      if (v->is_number_unsigned()) {
        const auto u = v->get<std::uint64_t>();
        if (u > static_cast<std::uint64_t>(std::numeric_limits<Int>::max())) throw ConfigError(path(key), "out of range");
        out = static_cast<Int>(u);
      } else {
        const auto s = v->get<std::int64_t>();
        if (std::is_unsigned_v<Int> && s < 0) throw ConfigError(path(key), "must be >= 0");
        out = static_cast<Int>(s);
      }
    }
  }

  void boolean(const std::string& key, bool& out) {
    if (const Json* v = take(key)) {
      if (!v->is_boolean()) throw ConfigError(path(key), "expected true or false");
      out = v->get<bool>();
    }
  }

  void text(const std::string& key, std::string& out) {
    if (const Json* v = take(key)) {
      if (!v->is_string()) throw ConfigError(path(key), "expected a string");
      out = v->get<std::string>();
    }
  }

  void finish() const {
    if (!node_) return;
    for (const auto& [k, _] : node_->items())
      if (!seen_.count(k)) throw ConfigError(path(k), "unknown key");
  }

  std::string path(const std::string& key) const { return name_ + "." + key; }

 private:
  const Json* take(const std::string& key) {
    seen_.insert(key);
    if (!node_ || !node_->contains(key)) return nullptr;
    return &node_->at(key);
  }

  std::string name_;
  const Json* node_ = nullptr;
  std::set<std::string> seen_;
};

inline void require(bool ok, const std::string& key, const std::string& what) {
  if (!ok) throw ConfigError(key, what);
}

}  // namespace detail

inline void validate(const RunConfig& c) {
  using detail::require;
  try {
    build_manhattan_grid(c.geometry);
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError("geometry", e.what());
  }
  require(c.mobility.base_speed_mps >= 0.0, "mobility.base_speed_mps", "must be >= 0");
  require(c.mobility.slot_seconds > 0.0, "mobility.slot_seconds", "must be > 0");
  require(c.mobility.straight_probability >= 0.0 && c.mobility.straight_probability <= 1.0,
          "mobility.straight_probability", "must lie in [0, 1]");
  require(c.mobility.min_spawn_gap_m >= 0.0, "mobility.min_spawn_gap_m", "must be >= 0");
  require(c.vehicle_count >= 1, "mobility.vehicles", "must be >= 1");
  require(c.ecav_probability >= 0.0 && c.ecav_probability <= 1.0, "mobility.ecav_probability", "must lie in [0, 1]");
  require(c.duration >= 1, "mobility.duration_slots", "must be >= 1");

  require(c.radio.carrier_frequency_hz > 0.0, "radio.carrier_frequency_ghz", "must be > 0");
  require(c.radio.bandwidth_hz > 0.0, "radio.bandwidth_ghz", "must be > 0");
  require(c.radio.pathloss_exponent > 0.0, "radio.pathloss_exponent", "must be > 0");
  require(c.radio.shadow_sigma_db >= 0.0, "radio.shadow_sigma_db", "must be >= 0");
  require(c.radio.beamwidth_rad > 0.0 && c.radio.beamwidth_rad <= pi, "radio.beamwidth_deg", "must lie in (0, 180]");
  require(std::filesystem::is_regular_file(c.mcs_table), "radio.mcs_table",
          "file not found: " + c.mcs_table.string());
  require(c.vehicle_radius_m > 0.0, "radio.vehicle_radius_m", "must be > 0");

  require(c.weights.w1 >= 0.0 && c.weights.w2 >= 0.0, "utility.w1", "weights must be >= 0");
  require(std::abs(c.weights.w1 + c.weights.w2 - 1.0) <= 1e-9, "utility.w2", "w1 + w2 must equal 1");
  require(c.weights.radius_m > 0.0, "utility.radius_m", "must be > 0");

  require(c.capacity >= 1, "run.capacity", "must be >= 1");
  require(c.seeds >= 1, "run.seeds", "must be >= 1");
  if (c.traces) require(std::filesystem::is_regular_file(*c.traces), "run.traces", "file not found: " + c.traces->string());
}

inline void apply_overrides(RunConfig& c, const ConfigOverrides& o) {
  if (o.capacity) c.capacity = *o.capacity;
  if (o.radius_m) c.weights.radius_m = *o.radius_m;
  if (o.beamwidth_deg) c.radio.beamwidth_rad = degrees_to_radians(*o.beamwidth_deg);
  if (o.seed) c.seed = *o.seed;
  if (o.seeds) c.seeds = *o.seeds;
  if (o.traces) c.traces = *o.traces;
  if (o.output_dir) c.output_dir = *o.output_dir;
  if (o.interference) c.interference = *o.interference;
}

// Reads the nested sections; anything absent keeps its default.
inline RunConfig config_from_json(const nlohmann::json& root) {
  if (!root.is_object()) throw ConfigError("<root>", "expected an object");
  for (const auto& [k, _] : root.items())
    if (k != "geometry" && k != "mobility" && k != "radio" && k != "utility" && k != "run")
      throw ConfigError(k, "unknown key");

  RunConfig c;
  {
    detail::SectionReader r(root, "geometry");
    r.number("width_m", c.geometry.width_m);
    r.number("height_m", c.geometry.height_m);
    r.integer("horizontal_roads", c.geometry.horizontal_roads);
    r.integer("vertical_roads", c.geometry.vertical_roads);
    r.integer("lanes_per_road", c.geometry.lanes_per_road);
    r.number("lane_width_m", c.geometry.lane_width_m);
    r.finish();
  }
  {
    detail::SectionReader r(root, "mobility");
    r.integer("vehicles", c.vehicle_count);
    r.number("ecav_probability", c.ecav_probability);
    r.integer("duration_slots", c.duration);
    r.number("slot_seconds", c.mobility.slot_seconds);
    r.number("base_speed_mps", c.mobility.base_speed_mps);
    r.number("straight_probability", c.mobility.straight_probability);
    r.number("min_spawn_gap_m", c.mobility.min_spawn_gap_m);
    r.finish();
  }
  {
    detail::SectionReader r(root, "radio");
    double ghz = c.radio.carrier_frequency_hz / 1e9;
    r.number("carrier_frequency_ghz", ghz);
    c.radio.carrier_frequency_hz = ghz * 1e9;
    double bw = c.radio.bandwidth_hz / 1e9;
    r.number("bandwidth_ghz", bw);
    c.radio.bandwidth_hz = bw * 1e9;
    r.number("pathloss_exponent", c.radio.pathloss_exponent);
    r.number("tx_power_dbm", c.radio.tx_power_dbm);
    r.number("attenuation_db", c.radio.attenuation_db);
    r.number("shadow_sigma_db", c.radio.shadow_sigma_db);
    r.number("noise_floor_dbm_per_hz", c.radio.noise_floor_dbm_per_hz);
    r.number("noise_figure_db", c.radio.noise_figure_db);
    double deg = radians_to_degrees(c.radio.beamwidth_rad);
    r.number("beamwidth_deg", deg);
    c.radio.beamwidth_rad = degrees_to_radians(deg);
    std::string table = c.mcs_table.string();
    r.text("mcs_table", table);
    c.mcs_table = table;
    r.boolean("interference", c.interference);
    r.boolean("vehicle_blockage", c.vehicle_blockage);
    r.number("vehicle_radius_m", c.vehicle_radius_m);
    r.finish();
  }
  {
    detail::SectionReader r(root, "utility");
    r.number("w1", c.weights.w1);
    r.number("w2", c.weights.w2);
    r.number("radius_m", c.weights.radius_m);
    r.finish();
  }
  {
    detail::SectionReader r(root, "run");
    r.integer("capacity", c.capacity);
    r.integer("seed", c.seed);
    r.integer("seeds", c.seeds);
    std::string traces;
    r.text("traces", traces);
    if (!traces.empty()) c.traces = traces;
    std::string out = c.output_dir.string();
    r.text("output_dir", out);
    c.output_dir = out;
    r.boolean("check_invariants", c.check_invariants);
    r.finish();
  }
  return c;
}

inline nlohmann::json parse_config_text(const std::string& text, const std::string& origin) {
  if (text.find_first_not_of(" \t\r\n") == std::string::npos) return nlohmann::json::object();
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(origin + ": " + e.what());
  }
}

// `path` may be "default" for the built-in values. Relative file references
// inside a config file resolve against the file's directory.
inline RunConfig parse_config(const std::string& path, const ConfigOverrides& overrides = {}) {
  RunConfig c;
  if (path != "default" && !path.empty()) {
    std::ifstream is(path);
    if (!is) throw Error("cannot open config " + path);
    std::ostringstream ss;
    ss << is.rdbuf();
    c = config_from_json(parse_config_text(ss.str(), path));
    const auto base = std::filesystem::path(path).parent_path();
    if (c.mcs_table.is_relative() && c.mcs_table != default_mcs_table_path()) c.mcs_table = base / c.mcs_table;
    if (c.traces && c.traces->is_relative()) c.traces = base / *c.traces;
  }
  apply_overrides(c, overrides);
  validate(c);
  return c;
}

// Every parameter that shapes results; output location and seed excluded.
inline nlohmann::ordered_json to_json(const RunConfig& c) {
  nlohmann::ordered_json j;
  j["geometry"] = {{"width_m", c.geometry.width_m},
                   {"height_m", c.geometry.height_m},
                   {"horizontal_roads", c.geometry.horizontal_roads},
                   {"vertical_roads", c.geometry.vertical_roads},
                   {"lanes_per_road", c.geometry.lanes_per_road},
                   {"lane_width_m", c.geometry.lane_width_m}};
  j["mobility"] = {{"vehicles", c.vehicle_count},
                   {"ecav_probability", c.ecav_probability},
                   {"duration_slots", c.duration},
                   {"slot_seconds", c.mobility.slot_seconds},
                   {"base_speed_mps", c.mobility.base_speed_mps},
                   {"straight_probability", c.mobility.straight_probability},
                   {"min_spawn_gap_m", c.mobility.min_spawn_gap_m}};
  j["radio"] = {{"carrier_frequency_ghz", c.radio.carrier_frequency_hz / 1e9},
                {"bandwidth_ghz", c.radio.bandwidth_hz / 1e9},
                {"pathloss_exponent", c.radio.pathloss_exponent},
                {"tx_power_dbm", c.radio.tx_power_dbm},
                {"attenuation_db", c.radio.attenuation_db},
                {"shadow_sigma_db", c.radio.shadow_sigma_db},
                {"noise_floor_dbm_per_hz", c.radio.noise_floor_dbm_per_hz},
                {"noise_figure_db", c.radio.noise_figure_db},
                {"beamwidth_deg", radians_to_degrees(c.radio.beamwidth_rad)},
                {"mcs_table", c.mcs_table.filename().string()},
                {"interference", c.interference},
                {"vehicle_blockage", c.vehicle_blockage},
                {"vehicle_radius_m", c.vehicle_radius_m}};
  j["utility"] = {{"w1", c.weights.w1}, {"w2", c.weights.w2}, {"radius_m", c.weights.radius_m}};
  j["run"] = {{"capacity", c.capacity}, {"check_invariants", c.check_invariants}};
  if (c.traces) j["run"]["traces"] = c.traces->filename().string();
  return j;
}

inline std::string config_hash(const RunConfig& c) { return hex64(fnv1a(to_json(c).dump())); }

inline EngineConfig make_engine_config(const RunConfig& c) {
  EngineConfig e;
  e.radio = c.radio;
  e.mcs = McsTable::load(c.mcs_table);
  e.weights = c.weights;
  e.capacity = c.capacity;
  e.interference = c.interference;
  e.links.vehicle_blockage = c.vehicle_blockage;
  e.links.vehicle_radius_m = c.vehicle_radius_m;
  e.check_invariants = c.check_invariants;
  return e;
}

}  // namespace mmv2v
