#pragma once

#include <string>

#include <Eigen/Dense>

#include "geb/polytope_projection.hpp"
#include "geb/thermal_model.hpp"

namespace geb {

// Power traces are kW. EV and ESS are consumption-positive (ESS > 0 is
// charging); PV is generation-positive.

struct EvSpec {
  std::string id;
  Trace r_max;          // kW per step
  double demand = 0.0;  // kWh over the horizon
  std::size_t node = 0;
  std::size_t building = 0;

  void validate(double dt_hours) const;
};

struct PvSpec {
  std::string id;
  Trace p_max;  // available power forecast, kW
  std::size_t node = 0;
  std::size_t building = 0;

  void validate() const;
};

struct EssSpec {
  std::string id;
  double p_dis_max = 0.0;  // kW
  double p_chg_max = 0.0;  // kW
  double e_min = 0.0;      // kWh
  double e_max = 0.0;      // kWh
  double e0 = 0.0;         // kWh
  std::size_t node = 0;
  std::size_t building = 0;

  void validate() const;
};

/// Water-filling projection onto {0 <= p <= r_max, dt * sum(p) = demand}.
Trace project_ev(const Trace& p, const EvSpec& spec, double dt_hours);

Trace project_pv(const Trace& p, const PvSpec& spec);

/// Projection onto the ESS power box and cumulative-energy window
/// e_min - e0 <= dt * cumsum(p) <= e_max - e0.
Trace project_ess(const Trace& p, const EssSpec& spec, double dt_hours);

/// Same set as project_ess, with the constraint data prebuilt for repeated use.
// Dykstra's error runs a few times its last step, hence the tighter default.
inline constexpr DykstraOptions kPreciseDykstra{1e-12, 1e-11, 200000};

PolytopeProjector make_ess_projector(const EssSpec& spec, double dt_hours, Eigen::Index horizon,
                                     DykstraOptions options = kPreciseDykstra);

/// B with ones on the diagonal and -1 on the superdiagonal.
Eigen::MatrixXd degradation_matrix(Eigen::Index horizon);

/// weight * ||B p||^2 in kW^2.
double ess_degradation(const Trace& p, double weight);

/// 2 * weight * B^T B p, applied without forming B.
Trace ess_degradation_gradient(const Trace& p, double weight);

/// Stored energy after each step: e0 + dt * cumsum(p).
Trace ess_soc(const Trace& p, const EssSpec& spec, double dt_hours);

}  // namespace geb
