#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "geb/grid_network.hpp"
#include "geb/hdc_coordinator.hpp"
#include "geb/optimizer_core.hpp"
#include "geb/param_ident.hpp"

namespace geb {

struct EvConfig {
  std::string id;
  std::optional<std::string> node;  // defaults to the building's node
  double r_max_kw = 7.6;
  double demand_kwh = 0.0;
};

struct PvConfig {
  std::string id;
  std::optional<std::string> node;
  double scale = 1.0;  // multiplies the shared PV profile
};

struct EssConfig {
  std::string id;
  std::optional<std::string> node;
  double p_dis_max_kw = 15.0;
  double p_chg_max_kw = 15.0;
  double e_min_kwh = 10.0;
  double e_max_kwh = 60.0;
  double e0_kwh = 20.0;
};

struct RoomConfig {
  int count = 0;  // 0: no room-level model
  RoomThermalParams params;
  ThermalState initial;
  double floor_area_m2 = 0.0;
};

struct BuildingConfig {
  std::string id;
  std::string node;
  AggregateBuildingModel model;
  RoomConfig rooms;
  std::vector<EvConfig> evs;
  std::vector<PvConfig> pvs;
  std::vector<EssConfig> esss;
};

struct TraceFiles {
  std::string weather = "weather.csv";
  std::string baseline = "baseline.csv";
  std::string pv = "pv.csv";
  std::string price;  // optional
};

// A scenario as written on disk, with its side-file traces loaded.
struct ScenarioConfig {
  std::string name;
  Eigen::Index horizon = 96;
  double dt_hours = 0.25;
  double base_kva = 100.0;

  std::string head;
  double v0_pu = 1.0;
  std::vector<LineSpec> lines;
  // Limits on the squared voltage as fractions of the squared head voltage.
  double v_lower_frac = 0.95;
  double v_upper_frac = 1.05;

  double comfort_lower = 20.0;
  double comfort_upper = 22.5;

  ObjectiveWeights weights;
  SpdsConfig solver;
  AsyncSchedule schedule;
  TraceFiles files;
  std::vector<BuildingConfig> buildings;

  // Loaded traces.
  WeatherTrace weather;
  Trace pv_profile;  // kW for scale 1
  BaselineLoad baseline;  // rows ordered as `feeder_nodes`
  std::vector<std::string> baseline_nodes;

  std::filesystem::path directory;  // where side files resolve
};

/// Parses and cross-checks a scenario; every error names the field path or
/// the file (and row) at fault.
ScenarioConfig load_scenario(const std::filesystem::path& path);

/// Writes the scenario document and its side files into `dir`.
void save_scenario(const ScenarioConfig& config, const std::filesystem::path& dir,
                   const std::string& file_name = "scenario.json");

/// Solver view of a scenario.
Problem to_problem(const ScenarioConfig& config);

/// Room-level models for closed-loop dispatch (empty fleets where absent).
std::vector<RoomFleet> room_fleets(const ScenarioConfig& config);

/// Config fragment for fitted room parameters, consumable as
/// buildings[*].rooms.params.
std::string params_fragment(const RoomThermalParams& params);
RoomThermalParams parse_params_fragment(const std::string& text);

// Result files: schedules.csv, voltages.csv, convergence.csv, dispatch.csv,
// report.json, report.txt.
void export_results(const RunResult& result, const Problem& problem,
                    const std::filesystem::path& out_dir);

/// Reads schedules.csv back into a primal state shaped like `problem`.
PrimalState read_schedules(const std::filesystem::path& file, const Problem& problem);

/// Column data for the figures: fig3a.csv .. fig3d.csv, fig4.csv.
/// `focus_building` selects the building of the temperature panel.
void export_plot_data(const RunResult& result, const Problem& problem,
                      const std::filesystem::path& out_dir, std::size_t focus_building = 5);

}  // namespace geb
