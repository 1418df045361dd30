#include "fixtures.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numbers>

namespace geb::testing {

std::filesystem::path source_dir() { return GEB_SOURCE_DIR; }

std::filesystem::path shipped_scenario() {
  return source_dir() / "scenarios" / "ieee13" / "scenario.json";
}

std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("geb_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

std::vector<LineSpec> random_tree(Rng& rng, int nodes, double r_lo, double r_hi) {
  std::vector<LineSpec> lines;
  for (int k = 1; k <= nodes; ++k) {
    const int parent = rng.integer(0, k - 1);
    const double r = rng.uniform(r_lo, r_hi);
    lines.push_back({parent == 0 ? "head" : "n" + std::to_string(parent), "n" + std::to_string(k),
                     r, 2.0 * r});
  }
  return lines;
}

namespace {

BuildingProblem wide_building(std::size_t node, Eigen::Index T, double theta_amb,
                              double comfort_upper) {
  BuildingProblem b;
  b.id = "B" + std::to_string(node + 1);
  b.node = node;
  b.model = {0.9, 0.1, -0.5, 2, 1.0, 21.0};
  b.comfort.theta_l = Trace::Constant(T, -50.0);
  b.comfort.theta_u = Trace::Constant(T, comfort_upper);
  b.theta_amb = Trace::Constant(T, theta_amb);
  return b;
}

}  // namespace

Problem toy_problem(const ToyOptions& o) {
  Problem p;
  p.horizon = o.horizon;
  p.dt_hours = o.dt_hours;
  p.base_kva = 100.0;
  std::vector<LineSpec> lines;
  for (int k = 1; k <= o.nodes; ++k) {
    lines.push_back({k == 1 ? "head" : "n" + std::to_string(k - 1), "n" + std::to_string(k), o.r,
                     2.0 * o.r});
  }
  p.feeder = build_feeder("head", lines, 1.0);
  const auto n = static_cast<Eigen::Index>(p.feeder.size());
  p.baseline.p_kw = Eigen::MatrixXd::Constant(n, o.horizon, o.baseline_kw);
  for (Eigen::Index t = 0; t < o.horizon; ++t) p.baseline.p_kw.col(t).array() += 10.0 * (t % 2);
  p.baseline.q_kvar = 0.3 * p.baseline.p_kw;
  p.limits.v_l_sq = Trace::Constant(o.horizon, 0.5);
  p.limits.v_u_sq = Trace::Constant(o.horizon, 1.5);
  p.weights.delta1 = 1.0;
  p.weights.delta2 = o.delta2;
  for (int k = 0; k < o.nodes; ++k) {
    const auto node = static_cast<std::size_t>(k);
    p.buildings.push_back(wide_building(node, o.horizon, 28.0, o.comfort_upper));
    EssSpec e;
    e.id = "ESS" + std::to_string(k + 1);
    e.p_dis_max = 10.0;
    e.p_chg_max = 8.0;
    e.e_min = 1.0;
    e.e_max = 4.0;
    e.e0 = 2.0;
    e.node = node;
    e.building = node;
    p.esss.push_back(e);
  }
  p.finalize();
  return p;
}

Problem random_problem(Rng& rng, int nodes, Eigen::Index T) {
  Problem p;
  p.horizon = T;
  p.dt_hours = 0.25;
  p.base_kva = 100.0;
  const auto lines = random_tree(rng, nodes);
  p.feeder = build_feeder("head", lines, rng.uniform(0.98, 1.03));
  const auto n = static_cast<Eigen::Index>(p.feeder.size());
  p.baseline.p_kw = Eigen::MatrixXd::NullaryExpr(n, T, [&] { return rng.uniform(0.0, 40.0); });
  p.baseline.q_kvar = Eigen::MatrixXd::NullaryExpr(n, T, [&] { return rng.uniform(0.0, 10.0); });
  p.limits.v_l_sq = Trace::Constant(T, 0.95 * p.feeder.v0_sq);
  p.limits.v_u_sq = Trace::Constant(T, 1.05 * p.feeder.v0_sq);
  p.weights.delta1 = rng.uniform(0.5, 2.0);
  p.weights.delta2 = rng.uniform(0.01, 1.0);
  if (rng.coin()) p.weights.pv_curtailment = rng.uniform(0.0, 0.1);
  if (rng.coin()) {
    p.weights.utility = rng.uniform(0.0, 0.1);
    p.weights.price = rng.vector(T, 0.05, 0.3);
  }
  const int buildings = rng.integer(1, nodes);
  for (int j = 0; j < buildings; ++j) {
    const auto node = static_cast<std::size_t>(rng.integer(0, static_cast<int>(n) - 1));
    auto b = wide_building(node, T, rng.uniform(20.0, 32.0), 80.0);
    b.id = "B" + std::to_string(j + 1);
    b.model.n_hvac = rng.integer(1, 30);
    b.model.p_rated = rng.uniform(0.5, 2.0);
    p.buildings.push_back(b);
    const auto bj = static_cast<std::size_t>(j);
    for (int k = 0, m = rng.integer(1, 2); k < m; ++k) {
      EvSpec ev;
      ev.id = b.id + "-EV" + std::to_string(k);
      ev.r_max = Trace::Constant(T, 7.6);
      ev.demand = rng.uniform(0.0, 0.5) * 7.6 * p.dt_hours * T;
      ev.node = rng.coin() ? node : static_cast<std::size_t>(rng.integer(0, static_cast<int>(n) - 1));
      ev.building = bj;
      p.evs.push_back(ev);
    }
    for (int k = 0, m = rng.integer(1, 3); k < m; ++k) {
      PvSpec pv;
      pv.id = b.id + "-PV" + std::to_string(k);
      pv.p_max = rng.vector(T, 0.0, 6.0);
      pv.node = node;
      pv.building = bj;
      p.pvs.push_back(pv);
    }
    EssSpec e;
    e.id = b.id + "-ESS";
    e.p_dis_max = rng.uniform(5.0, 15.0);
    e.p_chg_max = rng.uniform(5.0, 15.0);
    e.e_min = rng.uniform(0.0, 10.0);
    e.e_max = e.e_min + rng.uniform(5.0, 50.0);
    e.e0 = rng.uniform(e.e_min, e.e_max);
    e.node = node;
    e.building = bj;
    p.esss.push_back(e);
  }
  p.finalize();
  return p;
}

PrimalState random_state(Rng& rng, const Problem& problem) {
  const auto T = problem.horizon;
  PrimalState s;
  for (std::size_t k = 0; k < problem.evs.size(); ++k) s.ev.push_back(rng.vector(T, 0.0, 7.6));
  for (std::size_t k = 0; k < problem.pvs.size(); ++k) s.pv.push_back(rng.vector(T, 0.0, 6.0));
  for (std::size_t k = 0; k < problem.esss.size(); ++k) s.ess.push_back(rng.vector(T, -15.0, 15.0));
  for (std::size_t j = 0; j < problem.buildings.size(); ++j) s.hvac.push_back(rng.vector(T, 0.0, 1.0));
  return s;
}

DualState random_dual(Rng& rng, const Problem& problem, double scale) {
  DualState d = DualState::zeros(problem);
  d.lambda = d.lambda.unaryExpr([&](double) { return rng.uniform(0.0, scale); });
  d.mu = d.mu.unaryExpr([&](double) { return rng.uniform(0.0, scale); });
  return d;
}

SpdsConfig toy_config() {
  SpdsConfig c;
  c.tau_x = 0.99;
  c.tau_y = 0.99;
  c.alpha = {50.0, 50.0, 3.0, 100.0};
  c.beta = 100.0;
  c.schedule = StepSchedule::Constant;
  c.eps0 = 1e-11;
  c.l_max = 100000;
  return c;
}

IdentCase ident_case(std::uint64_t seed, double noise_sigma, Eigen::Index T) {
  Rng rng(seed);
  IdentCase c;
  c.truth = {8000, 2500, 15000, 8, 4, 12, 6, 0.7, 0.5, 0.6, -4.0, 0.5};
  auto& in = c.inputs;
  in.dt_hours = 0.25;
  in.initial = {25.0, 24.0, 24.0};
  in.weather.theta_amb.resize(T);
  in.weather.theta_sol_w.resize(T);
  in.weather.q_solar.resize(T);
  for (Eigen::Index t = 0; t < T; ++t) {
    const double hour = static_cast<double>(t) * in.dt_hours;
    const double sun = std::max(0.0, std::sin((hour - 6.0) * std::numbers::pi / 12.0));
    in.weather.theta_amb[t] = 27.0 + 5.0 * std::sin((hour - 9.0) * std::numbers::pi / 12.0);
    in.weather.theta_sol_w[t] = in.weather.theta_amb[t] + 10.0 * sun;
    in.weather.q_solar[t] = 1.5 * sun;
  }
  // On-Off runs of one to four steps
  in.u.resize(static_cast<std::size_t>(T));
  int state = 0;
  for (std::size_t t = 0; t < in.u.size();) {
    const int len = rng.integer(1, 4);
    for (int k = 0; k < len && t < in.u.size(); ++k, ++t) in.u[t] = state;
    state = 1 - state;
  }
  const auto traj = simulate_room(c.truth, in.initial, in.weather, in.u, in.dt_hours);
  c.reference.resize(T);
  for (Eigen::Index t = 0; t < T; ++t) {
    c.reference[t] = traj[static_cast<std::size_t>(t + 1)].theta_in + rng.normal(noise_sigma);
  }
  return c;
}

}  // namespace geb::testing
