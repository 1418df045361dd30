// gebsim: scenario generation, HDC solves, identification and checks.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "geb/csv.hpp"
#include "geb/errors.hpp"
#include "geb/feasibility.hpp"
#include "geb/hdc_coordinator.hpp"
#include "geb/param_ident.hpp"
#include "geb/scenario_generator.hpp"
#include "geb/scenario_io.hpp"

namespace {

enum Exit { kOk = 0, kNotConverged = 2, kInfeasible = 3, kConfig = 4 };

std::vector<int> parse_list(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      std::size_t used = 0;
      out.push_back(std::stoi(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw geb::ConfigError("not an integer list: '" + text + "'");
    }
  }
  return out;
}

std::size_t building_index(const geb::ScenarioConfig& c, const std::string& id) {
  for (std::size_t j = 0; j < c.buildings.size(); ++j) {
    if (c.buildings[j].id == id) return j;
  }
  throw geb::ConfigError("--building: no building with id '" + id + "'");
}

struct SolveArgs {
  std::string scenario;
  std::string cadence;
  int max_iter = -1;
  double tol = -1.0;
  std::uint64_t seed = 1;
  std::string mode = "hdc";
  int K = 0;
  std::string output_dir = "results";
  std::string probe_at;
  int probe_steps = 20;
  bool plots = true;
};

int solve(const SolveArgs& a) {
  geb::ScenarioConfig c = geb::load_scenario(a.scenario);
  if (a.max_iter >= 0) c.solver.l_max = a.max_iter;
  if (a.tol >= 0.0) c.solver.eps0 = a.tol;
  if (!a.cadence.empty()) {
    c.schedule.cadence = parse_list(a.cadence);
    if (c.schedule.K < *std::max_element(c.schedule.cadence.begin(), c.schedule.cadence.end())) {
      c.schedule.K = *std::max_element(c.schedule.cadence.begin(), c.schedule.cadence.end());
    }
  }
  const geb::Problem problem = geb::to_problem(c);

  geb::RunOptions opts;
  if (!a.probe_at.empty()) opts.probe_at = parse_list(a.probe_at);
  opts.probe_steps = a.probe_steps;

  const auto start = std::chrono::steady_clock::now();
  geb::RunResult result;
  if (a.mode == "hdc") {
    c.schedule.validate(c.buildings.size());
    result = geb::run_hdc(problem, c.schedule, c.solver, a.seed, opts);
  } else if (a.mode == "inexact-dual") {
    const int K = a.K > 0 ? a.K : c.schedule.K;
    result = geb::run_inexact_dual(problem, K, c.solver, a.seed, opts);
  } else {
    throw geb::ConfigError("--mode: expected hdc or inexact-dual, got '" + a.mode + "'");
  }
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  const auto fleets = geb::room_fleets(c);
  result.dispatch = geb::finalize_dispatch(problem, result.primal, fleets);
  geb::export_results(result, problem, a.output_dir);
  if (a.plots) geb::export_plot_data(result, problem, a.output_dir);

  const auto terms = geb::objective_terms(problem, result.primal);
  std::printf("%s after %d iterations (%.1f s)\n", result.converged ? "converged" : "NOT converged",
              result.iterations, seconds);
  std::printf("loss %.6g kW, degradation %.6g kW^2\n", terms.loss_kw, terms.degradation);
  std::fputs(geb::format_report(result.feasibility).c_str(), stdout);
  std::printf("results written to %s\n", a.output_dir.c_str());

  if (!result.converged) return kNotConverged;
  if (!result.feasibility.all_ok()) return kInfeasible;
  return kOk;
}

int check(const std::string& scenario, const std::string& schedules) {
  const geb::ScenarioConfig c = geb::load_scenario(scenario);
  const geb::Problem problem = geb::to_problem(c);
  const geb::PrimalState x = geb::read_schedules(schedules, problem);
  const geb::FeasibilityReport r = geb::feasibility_check(problem, x);
  std::fputs(geb::format_report(r).c_str(), stdout);
  return r.all_ok() ? kOk : kInfeasible;
}

int export_plots(const std::string& scenario, const std::string& schedules,
                 const std::string& out_dir, const std::string& focus) {
  const geb::ScenarioConfig c = geb::load_scenario(scenario);
  const geb::Problem problem = geb::to_problem(c);
  geb::RunResult result;
  result.primal = geb::read_schedules(schedules, problem);
  result.dual = geb::DualState::zeros(problem);
  const auto fleets = geb::room_fleets(c);
  result.dispatch = geb::finalize_dispatch(problem, result.primal, fleets);
  std::size_t j = focus.empty() ? std::min<std::size_t>(5, c.buildings.size() - 1)
                                : building_index(c, focus);
  geb::export_plot_data(result, problem, out_dir, j);
  std::printf("plot data written to %s\n", out_dir.c_str());
  return kOk;
}

geb::RoomExperiment read_experiment(const std::string& weather_csv, const std::string& reference_csv,
                                    double dt, geb::Trace& reference) {
  const geb::csv::Table ref = geb::csv::read(reference_csv);
  const auto ti = ref.column("time_index"), yi = ref.column("theta_in_c"), ui = ref.column("u");
  const auto T = static_cast<Eigen::Index>(ref.rows.size());
  geb::RoomExperiment in;
  in.dt_hours = dt;
  reference.resize(T);
  in.u.assign(static_cast<std::size_t>(T), 0);
  for (std::size_t r = 0; r < ref.rows.size(); ++r) {
    const long k = geb::csv::integer(ref, r, ti);
    if (k < 0 || k >= T) throw geb::ConfigError(reference_csv + ": time_index out of range");
    reference[k] = geb::csv::number(ref, r, yi);
    in.u[static_cast<std::size_t>(k)] = static_cast<int>(geb::csv::integer(ref, r, ui));
  }
  const geb::csv::Table w = geb::csv::read(weather_csv);
  if (static_cast<Eigen::Index>(w.rows.size()) != T) {
    throw geb::ConfigError(weather_csv + ": length mismatch with " + reference_csv);
  }
  in.weather.theta_amb.resize(T);
  in.weather.theta_sol_w.resize(T);
  in.weather.q_solar.resize(T);
  const auto wt = w.column("time_index"), wa = w.column("theta_amb_c"),
             ws = w.column("theta_sol_w_c"), wq = w.column("q_solar_kw");
  for (std::size_t r = 0; r < w.rows.size(); ++r) {
    const long k = geb::csv::integer(w, r, wt);
    if (k < 0 || k >= T) throw geb::ConfigError(weather_csv + ": time_index out of range");
    in.weather.theta_amb[k] = geb::csv::number(w, r, wa);
    in.weather.theta_sol_w[k] = geb::csv::number(w, r, ws);
    in.weather.q_solar[k] = geb::csv::number(w, r, wq);
  }
  return in;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw geb::ConfigError(path + ": cannot open");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Day-ahead scheduling of grid-interactive buildings on a radial feeder"};
  app.require_subcommand(1);

  // generate-scenario
  auto* gen = app.add_subcommand("generate-scenario", "Write the synthetic IEEE 13-node scenario");
  std::string gen_dir = "scenario";
  geb::GeneratorOptions gen_opts;
  gen->add_option("--output-dir", gen_dir, "Directory for scenario.json and its CSV files");
  gen->add_option("--seed", gen_opts.seed, "Seed for EV demands, PV scales and load sizes");
  gen->add_option("--impedance", gen_opts.impedance_per_kft, "Line resistance, pu per 1000 ft");

  // solve
  auto* sol = app.add_subcommand("solve", "Run the HDC algorithm on a scenario");
  SolveArgs sa;
  sol->add_option("--scenario", sa.scenario, "Scenario file")->required();
  sol->add_option("--cadence", sa.cadence, "Per-building cadences, e.g. 1,2,1,1,1,1,1,4,1,1,1,1");
  sol->add_option("--max-iter", sa.max_iter, "Iteration cap");
  sol->add_option("--tol", sa.tol, "Stopping tolerance on every building's convergence error");
  sol->add_option("--seed", sa.seed, "Seed (random cadences, probes)");
  sol->add_option("--mode", sa.mode, "hdc or inexact-dual");
  sol->add_option("--K", sa.K, "Primal steps per dual step in inexact-dual mode");
  sol->add_option("--output-dir", sa.output_dir, "Directory for result files");
  sol->add_option("--probe-at", sa.probe_at, "Iterations at which to run contraction probes");
  sol->add_option("--probe-steps", sa.probe_steps, "Primal steps fitted by each probe");

  // check
  auto* chk = app.add_subcommand("check", "Feasibility report of a schedules.csv");
  std::string chk_scenario, chk_schedules;
  chk->add_option("--scenario", chk_scenario, "Scenario file")->required();
  chk->add_option("--schedules", chk_schedules, "schedules.csv from a solve")->required();

  // export-plots
  auto* exp = app.add_subcommand("export-plots", "Figure column data from a schedules.csv");
  std::string exp_scenario, exp_schedules, exp_dir = "plots", exp_focus;
  exp->add_option("--scenario", exp_scenario, "Scenario file")->required();
  exp->add_option("--schedules", exp_schedules, "schedules.csv from a solve")->required();
  exp->add_option("--output-dir", exp_dir, "Directory for fig*.csv");
  exp->add_option("--building", exp_focus, "Building shown in the temperature panel");

  // fit-rc
  auto* frc = app.add_subcommand("fit-rc", "Identify room RC parameters by particle swarm");
  std::string rc_weather, rc_reference, rc_estimate, rc_output;
  double rc_dt = 0.25, rc_area = 0.0;
  geb::ThermalState rc_init;
  geb::PsoConfig pso;
  bool rc_init_set = false;
  frc->add_option("--weather", rc_weather, "CSV: time_index,theta_amb_c,theta_sol_w_c,q_solar_kw")
      ->required();
  frc->add_option("--reference", rc_reference, "CSV: time_index,theta_in_c,u")->required();
  frc->add_option("--estimate", rc_estimate, "Parameter fragment with the estimated values")
      ->required();
  frc->add_option("--floor-area", rc_area, "Floor area (m^2) for the C_m range");
  frc->add_option("--dt", rc_dt, "Step length in hours");
  frc->add_option("--initial-theta", rc_init.theta_in, "Initial temperature of all three nodes")
      ->each([&](const std::string&) { rc_init_set = true; });
  frc->add_option("--swarm", pso.swarm, "Swarm size");
  frc->add_option("--generations", pso.generations, "Generations");
  frc->add_option("--seed", pso.seed, "PSO seed");
  frc->add_option("--output", rc_output, "Write the fitted fragment here instead of stdout");

  // fit-aggregate
  auto* fag = app.add_subcommand("fit-aggregate",
                                 "Fit a, b, g of one building from simulated room ensembles");
  std::string fa_scenario, fa_building;
  int fa_runs = 4;
  std::uint64_t fa_seed = 7;
  fag->add_option("--scenario", fa_scenario, "Scenario file")->required();
  fag->add_option("--building", fa_building, "Building id")->required();
  fag->add_option("--runs", fa_runs, "Ensemble runs with random On-Off traces");
  fag->add_option("--seed", fa_seed, "Seed of the On-Off traces");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (*gen) {
      const geb::ScenarioConfig c = geb::generate_ieee13(gen_opts);
      geb::save_scenario(c, gen_dir);
      std::printf("scenario written to %s/scenario.json\n", gen_dir.c_str());
      return kOk;
    }
    if (*sol) return solve(sa);
    if (*chk) return check(chk_scenario, chk_schedules);
    if (*exp) return export_plots(exp_scenario, exp_schedules, exp_dir, exp_focus);
    if (*frc) {
      geb::Trace reference;
      geb::RoomExperiment in = read_experiment(rc_weather, rc_reference, rc_dt, reference);
      const geb::RoomThermalParams est = geb::parse_params_fragment(slurp(rc_estimate));
      if (!rc_init_set) rc_init.theta_in = reference[0];
      in.initial = {rc_init.theta_in, rc_init.theta_in, rc_init.theta_in};
      pso.bounds = geb::ParamBounds::around(est, rc_area);
      const geb::FitResult fit = geb::fit_rc(reference, in, pso);
      const std::string fragment = geb::params_fragment(fit.best);
      if (rc_output.empty()) {
        std::fputs(fragment.c_str(), stdout);
      } else {
        std::ofstream(rc_output) << fragment;
      }
      std::fprintf(stderr, "rmse %.6g C after %d generations\n", fit.objective, pso.generations);
      return kOk;
    }
    if (*fag) {
      const geb::ScenarioConfig c = geb::load_scenario(fa_scenario);
      const auto j = building_index(c, fa_building);
      const auto& b = c.buildings[j];
      if (b.rooms.count == 0) throw geb::ConfigError("building " + b.id + " has no rooms");
      std::mt19937_64 rng(fa_seed);
      std::bernoulli_distribution coin(0.5);
      std::vector<geb::EnsembleRun> runs;
      const auto T = c.horizon;
      for (int r = 0; r < fa_runs; ++r) {
        geb::EnsembleRun run;
        run.theta_amb = c.weather.theta_amb;
        for (int room = 0; room < b.rooms.count; ++room) {
          geb::RoomRun rr;
          rr.u.resize(static_cast<std::size_t>(T));
          for (auto& u : rr.u) u = coin(rng) ? 1 : 0;
          const auto states =
              geb::simulate_room(b.rooms.params, b.rooms.initial, c.weather, rr.u, c.dt_hours);
          rr.theta.resize(T + 1);
          for (Eigen::Index t = 0; t <= T; ++t) rr.theta[t] = states[static_cast<std::size_t>(t)].theta_in;
          run.rooms.push_back(std::move(rr));
        }
        runs.push_back(std::move(run));
      }
      const geb::AggregateFit fit = geb::fit_aggregate(runs);
      std::printf("{\"a\": %.17g, \"b\": %.17g, \"g\": %.17g, \"residual_rmse_c\": %.6g, \"samples\": %zu}\n",
                  fit.a, fit.b, fit.g, fit.residual_rmse, fit.samples);
      return kOk;
    }
  } catch (const geb::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfig;
  } catch (const geb::TopologyError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfig;
  } catch (const geb::InfeasibleSet& e) {
    std::fprintf(stderr, "infeasible: %s\n", e.what());
    return kInfeasible;
  } catch (const geb::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return kOk;
}
