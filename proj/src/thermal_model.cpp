#include "geb/thermal_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "geb/errors.hpp"

namespace geb {

namespace {

constexpr double kSecondsPerHour = 3600.0;

bool finite(const ThermalState& s) {
  return std::isfinite(s.theta_w) && std::isfinite(s.theta_in) && std::isfinite(s.theta_m);
}

void require_length(const Trace& v, Eigen::Index horizon, const char* what) {
  if (v.size() != horizon) {
    throw InvalidArgument(std::string(what) + ": expected length " + std::to_string(horizon) +
                          ", got " + std::to_string(v.size()));
  }
}

}  // namespace

void RoomThermalParams::validate() const {
  for (double v : {c_w, c_in, c_m, r_w1, r_w2, r_win, r_m}) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw InvalidArgument("room thermal capacitances and resistances must be positive");
    }
  }
  for (double sp : {sp1, sp2, sp3}) {
    if (!(sp >= 0.0 && sp <= 1.0)) {
      throw InvalidArgument("convection fractions must lie in [0, 1]");
    }
  }
  if (!std::isfinite(q_ac) || !std::isfinite(q_ihl)) {
    throw InvalidArgument("room heat rates must be finite");
  }
}

StepWeather WeatherTrace::at(Eigen::Index t) const {
  return {theta_amb[t], theta_sol_w[t], q_solar[t]};
}

void WeatherTrace::validate(Eigen::Index horizon) const {
  require_length(theta_amb, horizon, "theta_amb");
  require_length(theta_sol_w, horizon, "theta_sol_w");
  require_length(q_solar, horizon, "q_solar");
}

void ComfortBand::validate(Eigen::Index horizon) const {
  require_length(theta_l, horizon, "theta_l");
  require_length(theta_u, horizon, "theta_u");
  for (Eigen::Index t = 0; t < horizon; ++t) {
    if (!(theta_l[t] < theta_u[t])) {
      throw InvalidArgument("comfort band requires theta_l < theta_u at t=" + std::to_string(t));
    }
  }
}

void AggregateBuildingModel::validate() const {
  if (n_hvac < 1) throw InvalidArgument("aggregate model needs n_hvac >= 1");
  if (!(p_rated > 0.0)) throw InvalidArgument("aggregate model needs p_rated > 0");
  if (!(a > 0.0 && a < 1.0)) throw InvalidArgument("aggregate model needs 0 < a < 1");
  if (!std::isfinite(b) || !std::isfinite(g) || !std::isfinite(theta0)) {
    throw InvalidArgument("aggregate model coefficients must be finite");
  }
}

int HvacDispatch::n_on() const {
  return static_cast<int>(std::count(on_off.begin(), on_off.end(), std::uint8_t{1}));
}

ThermalState step_room(const RoomThermalParams& p, const ThermalState& s, const StepWeather& w,
                       int u, double dt_hours) {
  if (!(dt_hours > 0.0) || !std::isfinite(dt_hours)) {
    throw InvalidArgument("step_room: dt must be positive");
  }
  if (u != 0 && u != 1) throw InvalidArgument("step_room: u must be 0 or 1");
  if (!finite(s) || !std::isfinite(w.theta_amb) || !std::isfinite(w.theta_sol_w) ||
      !std::isfinite(w.q_solar)) {
    throw InvalidArgument("step_room: non-finite input");
  }

  const double q_ac = p.q_ac * u;
  const double wall_to_air = (s.theta_w - s.theta_in) / p.r_w1;
  const double mass_to_air = (s.theta_m - s.theta_in) / p.r_m;

  // kW / (kJ/°C) = °C/s
  const double d_wall = ((w.theta_sol_w - s.theta_w) / p.r_w2 - wall_to_air) / p.c_w;
  const double d_air = (wall_to_air + (w.theta_amb - s.theta_in) / p.r_win + mass_to_air +
                        p.sp1 * q_ac + p.sp2 * p.q_ihl + p.sp3 * w.q_solar) /
                       p.c_in;
  const double d_mass = (-mass_to_air + (1.0 - p.sp1) * q_ac + (1.0 - p.sp2) * p.q_ihl +
                         (1.0 - p.sp3) * w.q_solar) /
                        p.c_m;

  const double h = dt_hours * kSecondsPerHour;
  return {s.theta_w + h * d_wall, s.theta_in + h * d_air, s.theta_m + h * d_mass};
}

std::vector<ThermalState> simulate_room(const RoomThermalParams& params,
                                        const ThermalState& initial,
                                        const WeatherTrace& weather, std::span<const int> u,
                                        double dt_hours) {
  const auto horizon = static_cast<Eigen::Index>(u.size());
  weather.validate(horizon);
  std::vector<ThermalState> out;
  out.reserve(u.size() + 1);
  out.push_back(initial);
  for (Eigen::Index t = 0; t < horizon; ++t) {
    out.push_back(step_room(params, out.back(), weather.at(t), u[t], dt_hours));
  }
  return out;
}

double step_aggregate(const AggregateBuildingModel& m, double theta, double theta_amb,
                      double u_frac) {
  if (!(u_frac >= 0.0 && u_frac <= 1.0)) {
    throw InvalidArgument("step_aggregate: u_frac must lie in [0, 1]");
  }
  return m.a * theta + m.b * theta_amb + m.g * u_frac;
}

Trace simulate_aggregate(const AggregateBuildingModel& model, const Trace& theta_amb,
                         const Trace& u_trace) {
  if (theta_amb.size() != u_trace.size()) {
    throw InvalidArgument("simulate_aggregate: ambient and u traces differ in length");
  }
  Trace out(u_trace.size());
  double theta = model.theta0;
  for (Eigen::Index t = 0; t < u_trace.size(); ++t) {
    theta = step_aggregate(model, theta, theta_amb[t], u_trace[t]);
    out[t] = theta;
  }
  return out;
}

AffineMap comfort_constraint_matrices(const AggregateBuildingModel& model,
                                      const Trace& theta_amb, Eigen::Index horizon) {
  if (!(model.a > 0.0 && model.a < 1.0)) {
    throw InvalidArgument("comfort_constraint_matrices: requires 0 < a < 1");
  }
  require_length(theta_amb, horizon, "theta_amb");
  AffineMap map{Eigen::MatrixXd::Zero(horizon, horizon), Eigen::VectorXd(horizon)};
  double free = model.theta0;
  for (Eigen::Index t = 0; t < horizon; ++t) {
    free = model.a * free + model.b * theta_amb[t];
    map.c[t] = free;
    double coeff = model.g;
    for (Eigen::Index s = t; s >= 0; --s) {
      map.M(t, s) = coeff;
      coeff *= model.a;
    }
  }
  return map;
}

bool comfort_feasible(const AggregateBuildingModel& m, const Trace& theta_amb,
                      const ComfortBand& band) {
  double lo = m.theta0;
  double hi = m.theta0;
  for (Eigen::Index t = 0; t < theta_amb.size(); ++t) {
    const double drift_lo = m.a * lo + m.b * theta_amb[t];
    const double drift_hi = m.a * hi + m.b * theta_amb[t];
    const double next_lo = drift_lo + std::min(0.0, m.g);
    const double next_hi = drift_hi + std::max(0.0, m.g);
    lo = std::max(next_lo, band.theta_l[t]);
    hi = std::min(next_hi, band.theta_u[t]);
    if (lo > hi) return false;
  }
  return true;
}

HvacDispatch dispatch_priority(const AggregateBuildingModel& model, double u_frac,
                               std::span<const double> room_temps, double set_point) {
  if (!(u_frac >= 0.0 && u_frac <= 1.0)) {
    throw InvalidArgument("dispatch_priority: u_frac must lie in [0, 1]");
  }
  if (room_temps.size() != static_cast<std::size_t>(model.n_hvac)) {
    throw InvalidArgument("dispatch_priority: room count " + std::to_string(room_temps.size()) +
                          " does not match n_hvac " + std::to_string(model.n_hvac));
  }
  const auto n_on = static_cast<std::size_t>(std::round(model.n_hvac * u_frac));

  std::vector<std::size_t> order(room_temps.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    return room_temps[i] - set_point > room_temps[j] - set_point;
  });

  HvacDispatch d;
  d.on_off.assign(room_temps.size(), 0);
  for (std::size_t k = 0; k < n_on; ++k) d.on_off[order[k]] = 1;
  d.u_frac = static_cast<double>(n_on) / model.n_hvac;
  return d;
}

}  // namespace geb
