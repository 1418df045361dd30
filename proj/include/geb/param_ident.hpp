#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "geb/thermal_model.hpp"

namespace geb {

// Search box for the ten identified quantities (the RC constants and the
// three convection fractions); q_ac and q_ihl are taken as known.
struct ParamBounds {
  RoomThermalParams lower;
  RoomThermalParams upper;

  /// R and C within [est/3, 3 est]; C_m within [100, 450] kJ/(°C m^2) times
  /// the floor area; Sp in [0, 1].
  static ParamBounds around(const RoomThermalParams& estimate, double floor_area_m2);
  void validate() const;
  bool contains(const RoomThermalParams& p) const;
};

struct PsoConfig {
  int swarm = 50;
  double inertia = 0.72;
  double c1 = 1.49;
  double c2 = 1.49;
  int generations = 300;
  ParamBounds bounds;
  std::uint64_t seed = 1;
  // Particles placed exactly here at generation 0 (the rest are uniform).
  std::vector<RoomThermalParams> seeds;

  void validate() const;
};

// Everything but the RC constants needed to replay a room.
struct RoomExperiment {
  WeatherTrace weather;
  std::vector<int> u;  // HVAC On-Off per step
  ThermalState initial;
  double dt_hours = 0.25;
};

struct RmseResult {
  double value = 0.0;
  bool unstable = false;
};

// Penalty returned for candidates whose simulation blows up.
inline constexpr double kUnstablePenalty = 1e6;

/// sqrt(sum (theta_in - reference)^2 / (T - 1)) over the T reference samples,
/// reference[t] matching the indoor temperature after step t.
RmseResult rmse_objective(const RoomThermalParams& candidate, const Trace& reference,
                          const RoomExperiment& inputs);

struct FitResult {
  RoomThermalParams best;
  double objective = 0.0;
  std::vector<double> history;  // best objective after each generation
  std::size_t evaluations = 0;
  std::size_t out_of_bounds_evaluations = 0;  // stays 0; kept as a check
};

FitResult fit_rc(const Trace& reference, const RoomExperiment& inputs, const PsoConfig& cfg);

// One room of the ensemble used by fit_aggregate.
struct RoomRun {
  Trace theta;          // length T+1, initial included
  std::vector<int> u;   // length T
};

struct AggregateFit {
  double a = 0.0;
  double b = 0.0;
  double g = 0.0;
  double residual_rmse = 0.0;  // °C
  std::size_t samples = 0;
};

/// Least squares of mean-temperature transitions
/// theta(t+1) ~ a theta(t) + b theta_amb(t) + g u_mean(t)
/// pooled over one or more ensemble runs sharing the ambient trace of each.
struct EnsembleRun {
  std::vector<RoomRun> rooms;
  Trace theta_amb;  // length T
};
AggregateFit fit_aggregate(std::span<const EnsembleRun> runs);

}  // namespace geb
