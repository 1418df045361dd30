#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace geb {

using Trace = Eigen::VectorXd;

// 3R3C room network. Capacitances in kJ/°C and resistances in °C/kW, so an
// RC product is a time constant in seconds. q_ac is the HVAC heat rate while
// On (negative when cooling); q_ihl the internal heat load.
struct RoomThermalParams {
  double c_w = 0.0;
  double c_in = 0.0;
  double c_m = 0.0;
  double r_w1 = 0.0;
  double r_w2 = 0.0;
  double r_win = 0.0;
  double r_m = 0.0;
  double sp1 = 0.0;
  double sp2 = 0.0;
  double sp3 = 0.0;
  double q_ac = 0.0;
  double q_ihl = 0.0;

  void validate() const;
  bool operator==(const RoomThermalParams&) const = default;
};

struct ThermalState {
  double theta_w = 0.0;
  double theta_in = 0.0;
  double theta_m = 0.0;
};

// Exogenous inputs of one time step.
struct StepWeather {
  double theta_amb = 0.0;
  double theta_sol_w = 0.0;
  double q_solar = 0.0;  // kW through windows
};

struct WeatherTrace {
  Trace theta_amb;
  Trace theta_sol_w;
  Trace q_solar;

  Eigen::Index size() const { return theta_amb.size(); }
  StepWeather at(Eigen::Index t) const;
  void validate(Eigen::Index horizon) const;
};

struct ComfortBand {
  Trace theta_l;
  Trace theta_u;

  double set_point(Eigen::Index t) const { return 0.5 * (theta_l[t] + theta_u[t]); }
  void validate(Eigen::Index horizon) const;
};

// theta(t+1) = a*theta(t) + b*theta_amb(t) + g*u(t), u the On fraction of
// the building's n_hvac units, each drawing p_rated kW.
struct AggregateBuildingModel {
  double a = 0.0;
  double b = 0.0;
  double g = 0.0;
  int n_hvac = 1;
  double p_rated = 1.0;
  double theta0 = 0.0;

  void validate() const;
};

struct HvacDispatch {
  std::vector<std::uint8_t> on_off;
  double u_frac = 0.0;  // realized fraction n_on / n_hvac

  int n_on() const;
};

// Temperature trace as an affine function of the On-fraction trace:
// theta = M*u + c, entry t being the temperature after step t.
struct AffineMap {
  Eigen::MatrixXd M;
  Eigen::VectorXd c;
};

/// Forward-Euler step of the 3R3C network; dt in hours, u in {0, 1}.
ThermalState step_room(const RoomThermalParams& params, const ThermalState& state,
                       const StepWeather& weather, int u, double dt_hours);

/// Runs step_room over a whole trace. Returns T+1 states (initial included).
std::vector<ThermalState> simulate_room(const RoomThermalParams& params,
                                        const ThermalState& initial,
                                        const WeatherTrace& weather,
                                        std::span<const int> u, double dt_hours);

double step_aggregate(const AggregateBuildingModel& model, double theta,
                      double theta_amb, double u_frac);

/// Length-T trace; entry 0 is the first step from model.theta0.
Trace simulate_aggregate(const AggregateBuildingModel& model, const Trace& theta_amb,
                         const Trace& u_trace);

AffineMap comfort_constraint_matrices(const AggregateBuildingModel& model,
                                      const Trace& theta_amb, Eigen::Index horizon);

/// True when some u in [0,1]^T keeps the aggregate trace inside the band.
/// Exact: the reachable temperature set of the scalar recursion is an interval.
bool comfort_feasible(const AggregateBuildingModel& model, const Trace& theta_amb,
                      const ComfortBand& band);

/// Priority-list dispatch: the round(n*u) rooms deviating most above the set
/// point are switched On, ties going to the lower room index.
HvacDispatch dispatch_priority(const AggregateBuildingModel& model, double u_frac,
                               std::span<const double> room_temps, double set_point);

}  // namespace geb
