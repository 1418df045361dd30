#include "geb/scenario_generator.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace geb {

namespace {

constexpr double kDefaultImpedancePerKft = 0.0007;

double bump(double h, double centre, double width) {
  const double z = (h - centre) / width;
  return std::exp(-0.5 * z * z);
}

}  // namespace

ScenarioConfig generate_ieee13(const GeneratorOptions& o) {
  ScenarioConfig c;
  c.name = "ieee13-geb";
  c.horizon = 96;
  c.dt_hours = 0.25;
  c.base_kva = 100.0;
  c.head = "650";
  c.v0_pu = 1.0;

  // Single-phase equivalents. Lengths in ft follow the IEEE test case; the
  // 633-634 transformer and the 671-692 switch get short equivalent lengths.
  const double k = (o.impedance_per_kft > 0.0 ? o.impedance_per_kft : kDefaultImpedancePerKft);
  const struct {
    const char* from;
    const char* to;
    double kft;
  } segments[] = {{"650", "632", 2.0}, {"632", "633", 0.5}, {"633", "634", 0.4},
                  {"632", "645", 0.5}, {"645", "646", 0.3}, {"632", "671", 2.0},
                  {"671", "684", 0.3}, {"684", "611", 0.3}, {"684", "652", 0.8},
                  {"671", "680", 1.0}, {"671", "692", 0.1}, {"692", "675", 0.5}};
  for (const auto& s : segments) {
    c.lines.push_back({s.from, s.to, k * s.kft, o.x_over_r * k * s.kft});
  }

  c.v_lower_frac = 0.95;
  c.v_upper_frac = 1.05;
  c.comfort_lower = 20.0;
  c.comfort_upper = 22.5;

  c.weights.delta1 = 1.0;
  c.weights.delta2 = 1e-3;

  c.solver.tau_x = 0.99;
  c.solver.tau_y = 0.99;
  c.solver.alpha = {1000.0, 1000.0, 150.0, 2.5};
  c.solver.beta = 1e4;
  c.solver.schedule = StepSchedule::Constant;
  c.solver.eps0 = 1e-3;
  c.solver.l_max = 20000;

  const char* nodes[] = {"632", "633", "634", "645", "646", "671",
                         "684", "611", "652", "680", "692", "675"};
  const std::size_t J = std::size(nodes);
  c.schedule = AsyncSchedule::synchronous(J);
  c.schedule.K = 4;
  c.schedule.cadence[1] = 2;
  c.schedule.cadence[7] = 4;

  const auto T = c.horizon;
  std::mt19937_64 rng(o.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  // Shared weather: 22 °C before dawn, 31 °C mid-afternoon.
  c.weather.theta_amb.resize(T);
  c.weather.theta_sol_w.resize(T);
  c.weather.q_solar = Trace::Zero(T);
  c.pv_profile.resize(T);
  for (Eigen::Index t = 0; t < T; ++t) {
    const double h = (static_cast<double>(t) + 0.5) * c.dt_hours;
    c.weather.theta_amb[t] = 26.5 - 4.5 * std::cos(2.0 * std::numbers::pi * (h - 3.0) / 24.0);
    c.weather.theta_sol_w[t] = c.weather.theta_amb[t];
    const double s = std::sin(std::numbers::pi * (h - 6.5) / 13.0);
    c.pv_profile[t] = s > 0.0 ? 6.25 * std::pow(s, 1.3) : 0.0;
  }

  // Baseline load per node: morning and evening peaks, q = 0.3 p.
  c.baseline_nodes.assign(std::begin(nodes), std::end(nodes));
  c.baseline.p_kw.resize(static_cast<Eigen::Index>(J), T);
  c.baseline.q_kvar.resize(static_cast<Eigen::Index>(J), T);
  for (std::size_t j = 0; j < J; ++j) {
    const double size = o.baseline_scale * (0.85 + 0.3 * unit(rng));
    for (Eigen::Index t = 0; t < T; ++t) {
      const double h = (static_cast<double>(t) + 0.5) * c.dt_hours;
      const double p = size * (32.0 + 14.0 * bump(h, 8.0, 1.5) + 10.0 * bump(h, 13.0, 3.0) +
                               34.0 * bump(h, 19.0, 2.0));
      c.baseline.p_kw(static_cast<Eigen::Index>(j), t) = p;
      c.baseline.q_kvar(static_cast<Eigen::Index>(j), t) = 0.3 * p;
    }
  }

  // Matched rooms: air node dominated by the window path so that each room
  // follows theta+ = 0.98 theta + 0.02 theta_amb - 0.2 u.
  RoomThermalParams room;
  room.c_in = 4500.0;
  room.r_win = 10.0;
  room.c_w = 10000.0;
  room.r_w1 = 2000.0;
  room.r_w2 = 5.0;
  room.c_m = 20000.0;
  room.r_m = 2000.0;
  room.sp1 = 1.0;
  room.sp2 = 1.0;
  room.sp3 = 1.0;
  room.q_ac = -1.0;
  room.q_ihl = 0.0;

  for (std::size_t j = 0; j < J; ++j) {
    BuildingConfig b;
    const std::string id = "B" + std::to_string(j + 1);
    b.id = id;
    b.node = nodes[j];
    b.model = {0.98, 0.02, -0.2, 20, 1.0, 21.0};
    b.rooms.count = 20;
    b.rooms.params = room;
    b.rooms.initial = {c.weather.theta_amb[0], 21.0, 21.0};
    b.rooms.floor_area_m2 = 60.0;
    b.evs.push_back({id + "-EV1", std::nullopt, 7.6, 12.0 + 4.0 * unit(rng)});
    for (int k = 0; k < 8; ++k) {
      b.pvs.push_back({id + "-PV" + std::to_string(k + 1), std::nullopt, 0.9 + 0.2 * unit(rng)});
    }
    b.esss.push_back({id + "-ESS1", std::nullopt, 15.0, 15.0, 10.0, 60.0, 20.0});
    c.buildings.push_back(std::move(b));
  }
  return c;
}

}  // namespace geb
