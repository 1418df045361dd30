#include "geb/der_models.hpp"

#include <algorithm>
#include <cmath>

#include "geb/errors.hpp"

namespace geb {

namespace {

double clipped_sum(const Trace& p, const Trace& cap, double shift) {
  double s = 0.0;
  for (Eigen::Index t = 0; t < p.size(); ++t) s += std::clamp(p[t] + shift, 0.0, cap[t]);
  return s;
}

}  // namespace

void EvSpec::validate(double dt_hours) const {
  if ((r_max.array() < 0.0).any()) throw InfeasibleSet("EV " + id + ": negative r_max");
  const double capacity = dt_hours * r_max.sum();
  if (demand < 0.0 || demand > capacity + 1e-12) {
    throw InfeasibleSet("EV " + id + ": demand " + std::to_string(demand) +
                        " kWh outside [0, " + std::to_string(capacity) + "]");
  }
}

void PvSpec::validate() const {
  if ((p_max.array() < 0.0).any()) throw InvalidArgument("PV " + id + ": negative p_max");
}

void EssSpec::validate() const {
  if (!(p_dis_max > 0.0) || !(p_chg_max > 0.0)) {
    throw InvalidArgument("ESS " + id + ": power limits must be positive");
  }
  if (!(e_min < e_max)) throw InvalidArgument("ESS " + id + ": e_min must be below e_max");
  if (!(e_min <= e0 && e0 <= e_max)) {
    throw InfeasibleSet("ESS " + id + ": initial energy outside [e_min, e_max]");
  }
}

Trace project_ev(const Trace& p, const EvSpec& spec, double dt_hours) {
  if (p.size() != spec.r_max.size()) throw InvalidArgument("project_ev: length mismatch");
  spec.validate(dt_hours);
  const Trace& cap = spec.r_max;
  const double target = spec.demand / dt_hours;  // required sum of kW entries

  if (p.size() == 0) return p;
  if (target <= 0.0) return Trace::Zero(p.size());
  if (target >= cap.sum()) return cap;

  double lo = -p.maxCoeff();
  double hi = cap.maxCoeff() - p.minCoeff();
  for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(hi)); ++it) {
    const double mid = 0.5 * (lo + hi);
    if (clipped_sum(p, cap, mid) < target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  double shift = 0.5 * (lo + hi);

  // Solve exactly on the free set identified by bisection.
  double fixed = 0.0;
  double free_sum = 0.0;
  int n_free = 0;
  for (Eigen::Index t = 0; t < p.size(); ++t) {
    const double v = p[t] + shift;
    if (v >= cap[t]) {
      fixed += cap[t];
    } else if (v > 0.0) {
      free_sum += p[t];
      ++n_free;
    }
  }
  if (n_free > 0) {
    const double exact = (target - fixed - free_sum) / n_free;
    bool consistent = true;
    for (Eigen::Index t = 0; t < p.size() && consistent; ++t) {
      const double before = p[t] + shift;
      const double after = p[t] + exact;
      const bool was_free = before > 0.0 && before < cap[t];
      if (was_free && (after < 0.0 || after > cap[t])) consistent = false;
    }
    if (consistent) shift = exact;
  }

  Trace out(p.size());
  for (Eigen::Index t = 0; t < p.size(); ++t) out[t] = std::clamp(p[t] + shift, 0.0, cap[t]);
  return out;
}

Trace project_pv(const Trace& p, const PvSpec& spec) {
  if (p.size() != spec.p_max.size()) throw InvalidArgument("project_pv: length mismatch");
  return p.cwiseMax(0.0).cwiseMin(spec.p_max);
}

PolytopeProjector make_ess_projector(const EssSpec& spec, double dt_hours, Eigen::Index horizon,
                                     DykstraOptions options) {
  spec.validate();
  Eigen::MatrixXd rows = Eigen::MatrixXd::Zero(horizon, horizon);
  for (Eigen::Index t = 0; t < horizon; ++t) {
    for (Eigen::Index s = 0; s <= t; ++s) rows(t, s) = dt_hours;
  }
  return PolytopeProjector(Eigen::VectorXd::Constant(horizon, -spec.p_dis_max),
                           Eigen::VectorXd::Constant(horizon, spec.p_chg_max), std::move(rows),
                           Eigen::VectorXd::Constant(horizon, spec.e_min - spec.e0),
                           Eigen::VectorXd::Constant(horizon, spec.e_max - spec.e0), options);
}

Trace project_ess(const Trace& p, const EssSpec& spec, double dt_hours) {
  return make_ess_projector(spec, dt_hours, p.size()).project(p);
}

Eigen::MatrixXd degradation_matrix(Eigen::Index horizon) {
  Eigen::MatrixXd b = Eigen::MatrixXd::Identity(horizon, horizon);
  for (Eigen::Index i = 0; i + 1 < horizon; ++i) b(i, i + 1) = -1.0;
  return b;
}

double ess_degradation(const Trace& p, double weight) {
  const auto n = p.size();
  double acc = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double row = (i + 1 < n) ? p[i] - p[i + 1] : p[i];
    acc += row * row;
  }
  return weight * acc;
}

Trace ess_degradation_gradient(const Trace& p, double weight) {
  const auto n = p.size();
  Trace bp(n);
  for (Eigen::Index i = 0; i < n; ++i) bp[i] = (i + 1 < n) ? p[i] - p[i + 1] : p[i];
  // B^T v: (B^T v)_j = v_j - v_{j-1}
  Trace out(n);
  for (Eigen::Index j = 0; j < n; ++j) out[j] = bp[j] - (j > 0 ? bp[j - 1] : 0.0);
  return 2.0 * weight * out;
}

Trace ess_soc(const Trace& p, const EssSpec& spec, double dt_hours) {
  Trace soc(p.size());
  double e = spec.e0;
  for (Eigen::Index t = 0; t < p.size(); ++t) {
    e += dt_hours * p[t];
    soc[t] = e;
  }
  return soc;
}

}  // namespace geb
