#pragma once

#include <string>
#include <vector>

#include "geb/optimizer_core.hpp"

namespace geb {

struct FeasibilityTolerances {
  double voltage = 1e-6;  // pu^2
  double comfort = 1e-6;  // °C, on top of the projection tolerance
  double projection = 1e-9;
  double soc = 1e-6;     // kWh
  double ev = 1e-6;      // kWh
  double bounds = 1e-6;  // kW or fraction
};

// Constraint residuals of one primal state, recomputed without the solver's
// projections or matrix forms.
struct FeasibilityReport {
  double max_voltage_violation = 0.0;  // pu^2
  double max_upper_voltage_violation = 0.0;
  double max_lower_voltage_violation = 0.0;
  double max_comfort_violation = 0.0;  // °C
  double max_soc_violation = 0.0;      // kWh
  double max_bound_violation = 0.0;    // device power boxes and On fractions
  std::vector<double> ev_demand_residuals;  // kWh, signed delivered - demand
  double max_ev_residual = 0.0;

  bool voltage_ok = true;
  bool comfort_ok = true;
  bool soc_ok = true;
  bool ev_ok = true;
  bool bounds_ok = true;

  bool all_ok() const { return voltage_ok && comfort_ok && soc_ok && ev_ok && bounds_ok; }
};

FeasibilityReport feasibility_check(const Problem& problem, const PrimalState& primal,
                                    const FeasibilityTolerances& tol = {});

/// Voltages from a primal state using only per-line drops and a direct
/// nodal summation (no R/X matrices, no assemble_injections).
Eigen::MatrixXd independent_voltages(const Problem& problem, const PrimalState& primal);

std::string format_report(const FeasibilityReport& report);

}  // namespace geb
