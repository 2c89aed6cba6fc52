#pragma once

#include <atomic>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "mmv2v/config.hpp"
#include "mmv2v/engine.hpp"
#include "mmv2v/metrics.hpp"
#include "mmv2v/traces.hpp"
#include "mmv2v/verify.hpp"

namespace mmv2v {

// Traces for one seed: loaded from the configured file, or generated.
inline TraceSet traces_for(const RunConfig& rc, const Geometry& g, std::uint64_t seed,
                           std::vector<std::string>* warnings = nullptr) {
  if (rc.traces) {
    TraceLoadOptions opt;
    opt.slot_seconds = rc.mobility.slot_seconds;
    opt.geometry = &g;
    opt.warnings = warnings;
    return load_traces(*rc.traces, opt);
  }
  return generate_traces(g, rc.vehicle_count, rc.ecav_probability, rc.duration, derive_seed(seed, 0), rc.mobility);
}

inline SimulationResult run_cell(const RunConfig& rc, const TraceSet& traces, const Geometry& g, std::uint64_t seed) {
  return run_scenario(traces, g, make_engine_config(rc), seed);
}

inline nlohmann::ordered_json cell_manifest(const RunConfig& rc) {
  nlohmann::ordered_json j = to_json(rc);
  j["hash"] = config_hash(rc);
  return j;
}

struct SweepGrid {
  std::vector<int> capacities{1, 2, 3, 4};
  std::vector<double> radii_m{20.0, 30.0, 40.0};
  std::vector<double> beamwidths_deg{5.0, 15.0};
};

struct SweepCell {
  int capacity = 1;
  double radius_m = 20.0;
  double beamwidth_deg = 15.0;

  std::string name() const {
    return "c" + std::to_string(capacity) + "_R" + format_double(radius_m) + "_theta" + format_double(beamwidth_deg);
  }
};

inline std::vector<SweepCell> expand(const SweepGrid& grid) {
  std::vector<SweepCell> cells;
  for (int c : grid.capacities)
    for (double r : grid.radii_m)
      for (double b : grid.beamwidths_deg) cells.push_back({c, r, b});
  return cells;
}

inline RunConfig with_cell(RunConfig rc, const SweepCell& cell) {
  rc.capacity = cell.capacity;
  rc.weights.radius_m = cell.radius_m;
  rc.radio.beamwidth_rad = degrees_to_radians(cell.beamwidth_deg);
  validate(rc);
  return rc;
}

inline std::string seed_dir(std::uint64_t seed) { return "seed_" + std::to_string(seed); }

// Runs every (cell, seed) pair on `jobs` threads; each writes only its own
// directory. The cross-seed summary is assembled afterwards in grid order.
inline void run_sweep(const RunConfig& base, const SweepGrid& grid, const std::filesystem::path& out, int jobs,
                      std::ostream& log) {
  const Geometry g = build_manhattan_grid(base.geometry);
  const auto cells = expand(grid);
  std::vector<std::uint64_t> seeds;
  for (int k = 0; k < base.seeds; ++k) seeds.push_back(base.seed + static_cast<std::uint64_t>(k));

  std::vector<TraceSet> traces;
  for (auto s : seeds) traces.push_back(traces_for(base, g, s));

  const std::size_t total = cells.size() * seeds.size();
  std::vector<std::vector<SummaryRow>> summaries(total);
  std::atomic<std::size_t> next{0};
  std::mutex failure_lock;
  std::string failure;
  auto worker = [&] {
    for (std::size_t k = next++; k < total; k = next++) {
      try {
        const auto& cell = cells[k / seeds.size()];
        const std::size_t si = k % seeds.size();
        const RunConfig rc = with_cell(base, cell);
        const SimulationResult r = run_cell(rc, traces[si], g, seeds[si]);
        write_outputs(r, out / cell.name() / seed_dir(seeds[si]), cell_manifest(rc));
        summaries[k] = summarise(std::span(&r, 1));
      } catch (const std::exception& e) {
        std::lock_guard lock(failure_lock);
        if (failure.empty()) failure = e.what();
        next = total;
      }
    }
  };
  std::vector<std::thread> pool;
  for (int j = 1; j < std::max(1, jobs); ++j) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (!failure.empty()) throw Error(failure);

  // Mean over seeds of each per-seed summary value.
  const auto path = out / "sweep_summary.csv";
  auto os = detail::open_output(path);
  os << "capacity,radius_m,beamwidth_deg,filter,metric,seed_mean,seeds\n";
  for (std::size_t c = 0; c < cells.size(); ++c) {
    std::map<std::pair<int, std::string>, std::pair<double, std::size_t>> acc;
    std::vector<std::pair<int, std::string>> order;
    for (std::size_t s = 0; s < seeds.size(); ++s)
      for (const auto& row : summaries[c * seeds.size() + s]) {
        const auto key = std::pair{static_cast<int>(row.filter), row.metric};
        auto [it, fresh] = acc.try_emplace(key, 0.0, 0);
        if (fresh) order.push_back(key);
        it->second.first += row.value;
        ++it->second.second;
      }
    for (const auto& key : order) {
      const auto& [sum, n] = acc.at(key);
      os << cells[c].capacity << ',' << format_double(cells[c].radius_m) << ',' << format_double(cells[c].beamwidth_deg)
         << ',' << to_string(static_cast<KindFilter>(key.first)) << ',' << key.second << ','
         << format_double(sum / static_cast<double>(n)) << ',' << n << '\n';
    }
  }
  detail::close_output(os, path);
  log << "sweep: " << cells.size() << " configurations x " << seeds.size() << " seeds -> " << out.string() << '\n';
}

// Entry point for the command-line tool; returns the process exit status.
inline int dispatch(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Multipoint mmWave V2V association simulator"};
  app.require_subcommand(1);

  std::string config_path = "default";
  ConfigOverrides ov;
  std::uint64_t seed = 0;
  int seeds = 0;
  int capacity = 0;
  double radius = 0.0;
  double beamwidth = 0.0;
  std::string traces_path;
  std::string out_path;
  std::string interference;

  auto common = [&](CLI::App* sub, bool with_engine) {
    sub->add_option("--config", config_path, "JSON config file, or 'default'");
    sub->add_option("--seed", seed, "first run seed");
    sub->add_option("--out", out_path, "output path");
    if (!with_engine) return;
    sub->add_option("--seeds", seeds, "number of consecutive seeds")->check(CLI::PositiveNumber);
    sub->add_option("--capacity", capacity, "matching capacity c")->check(CLI::PositiveNumber);
    sub->add_option("--radius-m", radius, "association radius R (m)");
    sub->add_option("--beamwidth-deg", beamwidth, "antenna beamwidth (degrees)");
    sub->add_option("--traces", traces_path, "trace CSV to replay instead of generating");
    sub->add_option("--interference", interference, "co-slot interference")->check(CLI::IsMember({"on", "off"}));
  };

  auto* gen = app.add_subcommand("generate-traces", "write synthetic mobility traces as CSV");
  common(gen, false);
  auto* run = app.add_subcommand("run", "simulate one configuration");
  common(run, true);
  auto* sweep = app.add_subcommand("sweep", "simulate the capacity x radius x beamwidth grid");
  common(sweep, true);
  int jobs = 1;
  sweep->add_option("--jobs", jobs, "parallel workers")->check(CLI::PositiveNumber);
  auto* verify = app.add_subcommand("verify", "check the matching solver against the exhaustive oracle");
  std::size_t instances = 10000;
  int max_n = 6;
  int max_c = 3;
  std::uint64_t verify_seed = 1;
  verify->add_option("--instances", instances, "random instances");
  verify->add_option("--max-n", max_n, "largest agent count")->check(CLI::Range(1, static_cast<int>(oracle_max_agents)));
  verify->add_option("--max-capacity", max_c, "largest capacity")->check(CLI::PositiveNumber);
  verify->add_option("--seed", verify_seed, "generator seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return e.get_exit_code() == 0 ? 2 : e.get_exit_code();
  }

  auto overrides = [&](CLI::App* sub) {
    if (sub->count("--seed")) ov.seed = seed;
    if (sub->get_option_no_throw("--seeds") && sub->count("--seeds")) ov.seeds = seeds;
    if (sub->get_option_no_throw("--capacity") && sub->count("--capacity")) ov.capacity = capacity;
    if (sub->get_option_no_throw("--radius-m") && sub->count("--radius-m")) ov.radius_m = radius;
    if (sub->get_option_no_throw("--beamwidth-deg") && sub->count("--beamwidth-deg")) ov.beamwidth_deg = beamwidth;
    if (sub->get_option_no_throw("--traces") && sub->count("--traces")) ov.traces = traces_path;
    if (sub->get_option_no_throw("--interference") && sub->count("--interference")) ov.interference = interference == "on";
    if (sub->count("--out")) ov.output_dir = out_path;
    return parse_config(config_path, ov);
  };

  try {
    if (*gen) {
      const RunConfig rc = overrides(gen);
      const Geometry g = build_manhattan_grid(rc.geometry);
      const auto path = gen->count("--out") ? std::filesystem::path(out_path) : rc.output_dir / "traces.csv";
      if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
      save_traces(traces_for(rc, g, rc.seed), path);
      out << "traces: " << path.string() << '\n';
    } else if (*run) {
      const RunConfig rc = overrides(run);
      const Geometry g = build_manhattan_grid(rc.geometry);
      for (int k = 0; k < rc.seeds; ++k) {
        const std::uint64_t s = rc.seed + static_cast<std::uint64_t>(k);
        std::vector<std::string> warnings;
        const TraceSet traces = traces_for(rc, g, s, &warnings);
        for (const auto& w : warnings) err << "warning: " << w << '\n';
        const SimulationResult r = run_cell(rc, traces, g, s);
        const auto dir = rc.seeds == 1 ? rc.output_dir : rc.output_dir / seed_dir(s);
        write_outputs(r, dir, cell_manifest(rc));
        out << "run: seed " << s << ", " << r.meta.slot_count << " timeslots, " << r.meta.fallback_slots
            << " fallback -> " << dir.string() << '\n';
      }
    } else if (*sweep) {
      const RunConfig rc = overrides(sweep);
      SweepGrid grid;
      if (sweep->count("--capacity")) grid.capacities = {rc.capacity};
      if (sweep->count("--radius-m")) grid.radii_m = {rc.weights.radius_m};
      if (sweep->count("--beamwidth-deg")) grid.beamwidths_deg = {radians_to_degrees(rc.radio.beamwidth_rad)};
      run_sweep(rc, grid, rc.output_dir, jobs, out);
    } else if (*verify) {
      InstanceShape shape;
      shape.max_agents = max_n;
      shape.min_agents = std::min(2, max_n);
      shape.max_capacity = max_c;
      const VerifyReport rep = run_verification(instances, shape, verify_seed);
      print_report(rep, out);
      return rep.sound() ? 0 : 1;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace mmv2v
