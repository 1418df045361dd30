#include "geb/feasibility.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace geb {

Eigen::MatrixXd independent_voltages(const Problem& problem, const PrimalState& primal) {
  const auto& f = problem.feeder;
  const auto n = static_cast<Eigen::Index>(f.size());
  const auto T = problem.horizon;

  // Nodal net load in kW, summed device by device.
  Eigen::MatrixXd p_kw = problem.baseline.p_kw;
  for (std::size_t k = 0; k < problem.evs.size(); ++k) {
    const auto i = static_cast<Eigen::Index>(problem.evs[k].node);
    for (Eigen::Index t = 0; t < T; ++t) p_kw(i, t) += primal.ev[k][t];
  }
  for (std::size_t k = 0; k < problem.esss.size(); ++k) {
    const auto i = static_cast<Eigen::Index>(problem.esss[k].node);
    for (Eigen::Index t = 0; t < T; ++t) p_kw(i, t) += primal.ess[k][t];
  }
  for (std::size_t k = 0; k < problem.pvs.size(); ++k) {
    const auto i = static_cast<Eigen::Index>(problem.pvs[k].node);
    for (Eigen::Index t = 0; t < T; ++t) p_kw(i, t) -= primal.pv[k][t];
  }
  for (std::size_t j = 0; j < problem.buildings.size(); ++j) {
    const auto& b = problem.buildings[j];
    const auto i = static_cast<Eigen::Index>(b.node);
    for (Eigen::Index t = 0; t < T; ++t) {
      p_kw(i, t) += b.model.n_hvac * b.model.p_rated * primal.hvac[j][t];
    }
  }

  // Flow on the line into node i: every node whose path passes through i.
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(n, T);
  Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(n, T);
  for (Eigen::Index m = 0; m < n; ++m) {
    for (auto line : f.path_sets[static_cast<std::size_t>(m)]) {
      const auto l = static_cast<Eigen::Index>(line);
      P.row(l) += p_kw.row(m) / problem.base_kva;
      Q.row(l) += problem.baseline.q_kvar.row(m) / problem.base_kva;
    }
  }
  Eigen::MatrixXd v(n, T);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index t = 0; t < T; ++t) {
      double drop = 0.0;
      for (auto line : f.path_sets[static_cast<std::size_t>(i)]) {
        const auto l = static_cast<Eigen::Index>(line);
        drop += f.r[l] * P(l, t) + f.x[l] * Q(l, t);
      }
      v(i, t) = f.v0_sq - 2.0 * drop;
    }
  }
  return v;
}

FeasibilityReport feasibility_check(const Problem& problem, const PrimalState& primal,
                                    const FeasibilityTolerances& tol) {
  FeasibilityReport r;
  const auto T = problem.horizon;
  const double dt = problem.dt_hours;

  const Eigen::MatrixXd v = independent_voltages(problem, primal);
  for (Eigen::Index i = 0; i < v.rows(); ++i) {
    for (Eigen::Index t = 0; t < T; ++t) {
      r.max_upper_voltage_violation =
          std::max(r.max_upper_voltage_violation, v(i, t) - problem.limits.v_u_sq[t]);
      r.max_lower_voltage_violation =
          std::max(r.max_lower_voltage_violation, problem.limits.v_l_sq[t] - v(i, t));
    }
  }
  r.max_voltage_violation = std::max(r.max_upper_voltage_violation, r.max_lower_voltage_violation);

  auto bound = [&](double value, double lo, double hi) {
    r.max_bound_violation = std::max({r.max_bound_violation, lo - value, value - hi});
  };

  for (std::size_t j = 0; j < problem.buildings.size(); ++j) {
    const auto& b = problem.buildings[j];
    double theta = b.model.theta0;
    for (Eigen::Index t = 0; t < T; ++t) {
      const double u = primal.hvac[j][t];
      bound(u, 0.0, 1.0);
      theta = b.model.a * theta + b.model.b * b.theta_amb[t] + b.model.g * u;
      r.max_comfort_violation = std::max(
          {r.max_comfort_violation, b.comfort.theta_l[t] - theta, theta - b.comfort.theta_u[t]});
    }
  }

  for (std::size_t k = 0; k < problem.esss.size(); ++k) {
    const auto& e = problem.esss[k];
    double energy = e.e0;
    for (Eigen::Index t = 0; t < T; ++t) {
      const double p = primal.ess[k][t];
      bound(p, -e.p_dis_max, e.p_chg_max);
      energy += dt * p;
      r.max_soc_violation = std::max({r.max_soc_violation, e.e_min - energy, energy - e.e_max});
    }
  }

  for (std::size_t k = 0; k < problem.evs.size(); ++k) {
    const auto& ev = problem.evs[k];
    double delivered = 0.0;
    for (Eigen::Index t = 0; t < T; ++t) {
      bound(primal.ev[k][t], 0.0, ev.r_max[t]);
      delivered += dt * primal.ev[k][t];
    }
    r.ev_demand_residuals.push_back(delivered - ev.demand);
    r.max_ev_residual = std::max(r.max_ev_residual, std::abs(delivered - ev.demand));
  }

  for (std::size_t k = 0; k < problem.pvs.size(); ++k) {
    for (Eigen::Index t = 0; t < T; ++t) bound(primal.pv[k][t], 0.0, problem.pvs[k].p_max[t]);
  }

  r.voltage_ok = r.max_voltage_violation <= tol.voltage;
  r.comfort_ok = r.max_comfort_violation <= tol.comfort + tol.projection;
  r.soc_ok = r.max_soc_violation <= tol.soc;
  r.ev_ok = r.max_ev_residual <= tol.ev;
  r.bounds_ok = r.max_bound_violation <= tol.bounds;
  return r;
}

std::string format_report(const FeasibilityReport& r) {
  auto verdict = [](bool ok) { return ok ? "pass" : "FAIL"; };
  std::ostringstream os;
  os.precision(6);
  os << "voltage  " << verdict(r.voltage_ok) << "  max violation " << r.max_voltage_violation
     << " pu^2 (upper " << r.max_upper_voltage_violation << ", lower "
     << r.max_lower_voltage_violation << ")\n";
  os << "comfort  " << verdict(r.comfort_ok) << "  max violation " << r.max_comfort_violation
     << " C\n";
  os << "soc      " << verdict(r.soc_ok) << "  max violation " << r.max_soc_violation << " kWh\n";
  os << "ev       " << verdict(r.ev_ok) << "  max demand residual " << r.max_ev_residual
     << " kWh\n";
  os << "bounds   " << verdict(r.bounds_ok) << "  max violation " << r.max_bound_violation << "\n";
  return os.str();
}

}  // namespace geb
