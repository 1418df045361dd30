#include "geb/optimizer_core.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "geb/errors.hpp"

namespace geb {

namespace {

double sq(double v) { return v * v; }

Eigen::VectorXd flatten(const PrimalState& x) {
  Eigen::Index n = 0;
  for (const auto* fam : {&x.ev, &x.pv, &x.ess, &x.hvac}) {
    for (const auto& t : *fam) n += t.size();
  }
  Eigen::VectorXd v(n);
  Eigen::Index k = 0;
  for (const auto* fam : {&x.ev, &x.pv, &x.ess, &x.hvac}) {
    for (const auto& t : *fam) {
      v.segment(k, t.size()) = t;
      k += t.size();
    }
  }
  return v;
}

PrimalState unflatten(const Eigen::VectorXd& v, const PrimalState& shape) {
  PrimalState x = shape;
  Eigen::Index k = 0;
  for (auto* fam : {&x.ev, &x.pv, &x.ess, &x.hvac}) {
    for (auto& t : *fam) {
      t = v.segment(k, t.size());
      k += t.size();
    }
  }
  return x;
}

}  // namespace

void ObjectiveWeights::validate(Eigen::Index horizon) const {
  if (delta1 < 0.0 || delta2 < 0.0 || pv_curtailment < 0.0 || utility < 0.0) {
    throw InvalidArgument("objective weights must be nonnegative");
  }
  if (utility > 0.0 && price.size() != horizon) {
    throw InvalidArgument("utility weight set but price trace has the wrong length");
  }
}

void Problem::finalize() {
  if (horizon < 1) throw InvalidArgument("horizon must be at least one step");
  if (!(dt_hours > 0.0)) throw InvalidArgument("dt must be positive");
  if (!(base_kva > 0.0)) throw InvalidArgument("base power must be positive");
  const auto n = static_cast<Eigen::Index>(feeder.size());
  if (baseline.p_kw.rows() != n || baseline.p_kw.cols() != horizon ||
      baseline.q_kvar.rows() != n || baseline.q_kvar.cols() != horizon) {
    throw InvalidArgument("baseline load must be n x T");
  }
  limits.validate(horizon);
  weights.validate(horizon);

  by_building.assign(buildings.size(), {});
  for (const auto& b : buildings) {
    if (b.node >= feeder.size()) throw InvalidArgument("building " + b.id + " on unknown node");
    b.model.validate();
    b.comfort.validate(horizon);
    if (b.theta_amb.size() != horizon) {
      throw InvalidArgument("building " + b.id + ": ambient trace length differs from T");
    }
  }
  auto check_owner = [&](std::size_t building, std::size_t node, const std::string& id) {
    if (building >= buildings.size()) throw InvalidArgument(id + " references unknown building");
    if (node >= feeder.size()) throw InvalidArgument(id + " references unknown node");
  };
  for (std::size_t k = 0; k < evs.size(); ++k) {
    const auto& ev = evs[k];
    check_owner(ev.building, ev.node, "EV " + ev.id);
    if (ev.r_max.size() != horizon) throw InvalidArgument("EV " + ev.id + ": trace length");
    ev.validate(dt_hours);
    by_building[ev.building].evs.push_back(k);
  }
  for (std::size_t k = 0; k < pvs.size(); ++k) {
    const auto& pv = pvs[k];
    check_owner(pv.building, pv.node, "PV " + pv.id);
    if (pv.p_max.size() != horizon) throw InvalidArgument("PV " + pv.id + ": trace length");
    pv.validate();
    by_building[pv.building].pvs.push_back(k);
  }
  for (std::size_t k = 0; k < esss.size(); ++k) {
    const auto& e = esss[k];
    check_owner(e.building, e.node, "ESS " + e.id);
    e.validate();
    by_building[e.building].esss.push_back(k);
  }
  q_flows = line_flows(feeder, baseline.q_kvar / base_kva);
}

DualState DualState::zeros(const Problem& problem) {
  const auto n = static_cast<Eigen::Index>(problem.feeder.size());
  return {Eigen::MatrixXd::Zero(n, problem.horizon), Eigen::MatrixXd::Zero(n, problem.horizon)};
}

void SpdsConfig::validate() const {
  if (!(tau_x > 0.0 && tau_x < 1.0) || !(tau_y > 0.0 && tau_y < 1.0)) {
    throw InvalidArgument("shrink parameters must lie in (0, 1)");
  }
  for (double a : {alpha.ev, alpha.pv, alpha.ess, alpha.hvac}) {
    if (!(a > 0.0)) throw InvalidArgument("primal step sizes must be positive");
  }
  if (!(beta > 0.0)) throw InvalidArgument("dual step size must be positive");
  if (!(eps0 >= 0.0)) throw InvalidArgument("tolerance must be nonnegative");
  if (l_max < 0) throw InvalidArgument("iteration cap must be nonnegative");
}

double SpdsConfig::schedule_factor(int iteration) const {
  return schedule == StepSchedule::Constant ? 1.0 : 1.0 / std::sqrt(1.0 + iteration);
}

LocalSets::LocalSets(const Problem& problem, DykstraOptions options) {
  for (const auto& e : problem.esss) {
    ess_.push_back(make_ess_projector(e, problem.dt_hours, problem.horizon, options));
  }
  for (const auto& b : problem.buildings) {
    if (!comfort_feasible(b.model, b.theta_amb, b.comfort)) {
      throw InfeasibleSet("building " + b.id + ": comfort band unreachable for any On fraction");
    }
    AffineMap map = comfort_constraint_matrices(b.model, b.theta_amb, problem.horizon);
    hvac_.emplace_back(Eigen::VectorXd::Zero(problem.horizon),
                       Eigen::VectorXd::Ones(problem.horizon), map.M, b.comfort.theta_l - map.c,
                       b.comfort.theta_u - map.c, options);
  }
}

ProjectionCache::ProjectionCache(const Problem& problem)
    : ess_inner(problem.esss.size()),
      ess_outer(problem.esss.size()),
      hvac_inner(problem.buildings.size()),
      hvac_outer(problem.buildings.size()) {}

NetworkState evaluate_network(const Problem& problem, const PrimalState& primal) {
  std::vector<NodalContribution> loads;
  std::vector<NodalContribution> gens;
  for (std::size_t k = 0; k < problem.evs.size(); ++k) {
    loads.push_back({problem.evs[k].node, &primal.ev[k], 1.0});
  }
  for (std::size_t k = 0; k < problem.esss.size(); ++k) {
    loads.push_back({problem.esss[k].node, &primal.ess[k], 1.0});
  }
  for (std::size_t j = 0; j < problem.buildings.size(); ++j) {
    const auto& m = problem.buildings[j].model;
    loads.push_back({problem.buildings[j].node, &primal.hvac[j], m.n_hvac * m.p_rated});
  }
  for (std::size_t k = 0; k < problem.pvs.size(); ++k) {
    gens.push_back({problem.pvs[k].node, &primal.pv[k], 1.0});
  }
  NetworkState net;
  net.injection =
      assemble_injections(problem.feeder, problem.baseline, loads, gens, problem.base_kva);
  net.p_flows = line_flows(problem.feeder, net.injection.p);
  net.voltages = voltages(problem.feeder, net.injection);
  return net;
}

ObjectiveTerms objective_terms(const Problem& problem, const PrimalState& primal) {
  const NetworkState net = evaluate_network(problem, primal);
  const auto& w = problem.weights;
  ObjectiveTerms out;
  out.loss_kw = problem.base_kva * power_loss(problem.feeder, net.p_flows, problem.q_flows, 1.0);
  for (const auto& p : primal.ess) out.degradation += ess_degradation(p, 1.0);
  if (w.pv_curtailment > 0.0) {
    for (std::size_t k = 0; k < problem.pvs.size(); ++k) {
      out.curtailment += (primal.pv[k] - problem.pvs[k].p_max).squaredNorm();
    }
  }
  if (w.utility > 0.0) {
    out.utility = problem.base_kva * (net.injection.p * w.price).sum();
  }
  out.total = w.delta1 * out.loss_kw + w.delta2 * out.degradation +
              w.pv_curtailment * out.curtailment + w.utility * out.utility;
  return out;
}

double lagrangian(const Problem& problem, const PrimalState& primal, const DualState& dual) {
  const NetworkState net = evaluate_network(problem, primal);
  double value = objective_terms(problem, primal).total;
  const auto& lim = problem.limits;
  for (Eigen::Index i = 0; i < net.voltages.rows(); ++i) {
    for (Eigen::Index t = 0; t < net.voltages.cols(); ++t) {
      const double v = net.voltages(i, t);
      value += dual.lambda(i, t) * (v - lim.v_u_sq[t]) - dual.mu(i, t) * (v - lim.v_l_sq[t]);
    }
  }
  return value;
}

Trace node_price(const Problem& problem, std::size_t node, const Eigen::MatrixXd& p_flows,
                 const DualState& dual) {
  const auto& f = problem.feeder;
  const auto T = problem.horizon;
  Trace price = Trace::Zero(T);
  const double loss_k = 2.0 * problem.weights.delta1 / f.v0_sq;
  for (auto l : f.path_sets[node]) {
    const auto li = static_cast<Eigen::Index>(l);
    price += (loss_k * f.r[li]) * p_flows.row(li).transpose();
  }
  const auto i = static_cast<Eigen::Index>(node);
  const double volt_k = 2.0 / problem.base_kva;
  for (Eigen::Index iota = 0; iota < dual.mu.rows(); ++iota) {
    const double r = f.R(iota, i);
    if (r != 0.0) price += (volt_k * r) * (dual.mu.row(iota) - dual.lambda.row(iota)).transpose();
  }
  if (problem.weights.utility > 0.0) price += problem.weights.utility * problem.weights.price;
  return price;
}

Trace device_gradient(const Problem& problem, VariableId var, const PrimalState& primal,
                      const Trace& price) {
  switch (var.family) {
    case Family::Ev:
      return price;
    case Family::Pv: {
      Trace g = -price;
      if (problem.weights.pv_curtailment > 0.0) {
        g += 2.0 * problem.weights.pv_curtailment *
             (primal.pv[var.index] - problem.pvs[var.index].p_max);
      }
      return g;
    }
    case Family::Ess:
      return price + ess_degradation_gradient(primal.ess[var.index], problem.weights.delta2);
    case Family::Hvac: {
      const auto& m = problem.buildings[var.index].model;
      return (m.n_hvac * m.p_rated) * price;
    }
  }
  throw InvalidArgument("unknown decision variable family");
}

namespace {

std::size_t variable_node(const Problem& problem, VariableId var) {
  switch (var.family) {
    case Family::Ev:
      if (var.index < problem.evs.size()) return problem.evs[var.index].node;
      break;
    case Family::Pv:
      if (var.index < problem.pvs.size()) return problem.pvs[var.index].node;
      break;
    case Family::Ess:
      if (var.index < problem.esss.size()) return problem.esss[var.index].node;
      break;
    case Family::Hvac:
      if (var.index < problem.buildings.size()) return problem.buildings[var.index].node;
      break;
  }
  throw InvalidArgument("unknown decision variable id");
}

}  // namespace

Trace subgrad_primal(const Problem& problem, VariableId var, const PrimalState& primal,
                     const DualState& dual) {
  const std::size_t node = variable_node(problem, var);
  const NetworkState net = evaluate_network(problem, primal);
  return device_gradient(problem, var, primal, node_price(problem, node, net.p_flows, dual));
}

Trace spds_primal_step(const Trace& x, const Trace& grad, double alpha, double tau,
                       const Projection& inner, const Projection& outer) {
  const Trace shrunk = inner(tau * x - alpha * grad);
  return outer(shrunk / tau);
}

Trace spds_primal_step(const Trace& x, const Trace& grad, double alpha, double tau,
                       const Projection& project) {
  return spds_primal_step(x, grad, alpha, tau, project, project);
}

DualState spds_dual_step(const DualState& y, const Eigen::MatrixXd& voltages,
                         const VoltageLimits& limits, double beta, double tau) {
  DualState out{Eigen::MatrixXd(y.lambda.rows(), y.lambda.cols()),
                Eigen::MatrixXd(y.mu.rows(), y.mu.cols())};
  for (Eigen::Index i = 0; i < voltages.rows(); ++i) {
    for (Eigen::Index t = 0; t < voltages.cols(); ++t) {
      const double up = voltages(i, t) - limits.v_u_sq[t];
      const double down = limits.v_l_sq[t] - voltages(i, t);
      out.lambda(i, t) = std::max(0.0, std::max(0.0, tau * y.lambda(i, t) + beta * up) / tau);
      out.mu(i, t) = std::max(0.0, std::max(0.0, tau * y.mu(i, t) + beta * down) / tau);
    }
  }
  return out;
}

Trace project_variable(const Problem& problem, const LocalSets& sets, VariableId var,
                       const Trace& z, DykstraWarmStart* warm) {
  switch (var.family) {
    case Family::Ev:
      return project_ev(z, problem.evs[var.index], problem.dt_hours);
    case Family::Pv:
      return project_pv(z, problem.pvs[var.index]);
    case Family::Ess:
      return sets.ess(var.index).project(z, warm);
    case Family::Hvac:
      return sets.hvac(var.index).project(z, warm);
  }
  throw InvalidArgument("unknown decision variable family");
}

PrimalState initial_primal(const Problem& problem, const LocalSets& sets) {
  const Trace zero = Trace::Zero(problem.horizon);
  PrimalState s;
  for (std::size_t k = 0; k < problem.evs.size(); ++k) {
    s.ev.push_back(project_variable(problem, sets, {Family::Ev, k}, zero));
  }
  for (std::size_t k = 0; k < problem.pvs.size(); ++k) {
    s.pv.push_back(project_variable(problem, sets, {Family::Pv, k}, zero));
  }
  for (std::size_t k = 0; k < problem.esss.size(); ++k) {
    s.ess.push_back(project_variable(problem, sets, {Family::Ess, k}, zero));
  }
  for (std::size_t j = 0; j < problem.buildings.size(); ++j) {
    s.hvac.push_back(project_variable(problem, sets, {Family::Hvac, j}, zero));
  }
  return s;
}

void update_building(const Problem& problem, const LocalSets& sets, ProjectionCache& cache,
                     std::size_t building, const Eigen::MatrixXd& p_flows, const DualState& dual,
                     const SpdsConfig& cfg, int iteration, PrimalState& primal) {
  const auto& b = problem.buildings[building];
  const auto& devices = problem.by_building[building];
  const Trace price = node_price(problem, b.node, p_flows, dual);
  const double factor = cfg.schedule_factor(iteration);
  const double tau = cfg.tau_x;

  // Gradients are taken at the iterate entering this update, then applied.
  std::vector<Trace> g_ev, g_pv, g_ess;
  for (auto k : devices.evs) g_ev.push_back(device_gradient(problem, {Family::Ev, k}, primal, price));
  for (auto k : devices.pvs) g_pv.push_back(device_gradient(problem, {Family::Pv, k}, primal, price));
  for (auto k : devices.esss) {
    g_ess.push_back(device_gradient(problem, {Family::Ess, k}, primal, price));
  }
  const Trace g_hvac = device_gradient(problem, {Family::Hvac, building}, primal, price);

  for (std::size_t n = 0; n < devices.evs.size(); ++n) {
    const auto k = devices.evs[n];
    Projection proj = [&](const Trace& z) { return project_ev(z, problem.evs[k], problem.dt_hours); };
    primal.ev[k] = spds_primal_step(primal.ev[k], g_ev[n], factor * cfg.alpha.ev, tau, proj);
  }
  for (std::size_t n = 0; n < devices.pvs.size(); ++n) {
    const auto k = devices.pvs[n];
    Projection proj = [&](const Trace& z) { return project_pv(z, problem.pvs[k]); };
    primal.pv[k] = spds_primal_step(primal.pv[k], g_pv[n], factor * cfg.alpha.pv, tau, proj);
  }
  for (std::size_t n = 0; n < devices.esss.size(); ++n) {
    const auto k = devices.esss[n];
    Projection inner = [&](const Trace& z) { return sets.ess(k).project(z, &cache.ess_inner[k]); };
    Projection outer = [&](const Trace& z) { return sets.ess(k).project(z, &cache.ess_outer[k]); };
    primal.ess[k] =
        spds_primal_step(primal.ess[k], g_ess[n], factor * cfg.alpha.ess, tau, inner, outer);
  }
  Projection inner = [&](const Trace& z) {
    return sets.hvac(building).project(z, &cache.hvac_inner[building]);
  };
  Projection outer = [&](const Trace& z) {
    return sets.hvac(building).project(z, &cache.hvac_outer[building]);
  };
  primal.hvac[building] =
      spds_primal_step(primal.hvac[building], g_hvac, factor * cfg.alpha.hvac, tau, inner, outer);
}

double convergence_error(const Problem& problem, const PrimalState& prev, const PrimalState& next,
                         std::size_t building) {
  if (building >= problem.buildings.size()) {
    throw InvalidArgument("convergence_error: unknown building");
  }
  const auto& d = problem.by_building[building];
  double err = 0.0;
  for (auto k : d.evs) err += (next.ev[k] - prev.ev[k]).norm();
  for (auto k : d.pvs) err += (next.pv[k] - prev.pv[k]).norm();
  for (auto k : d.esss) err += (next.ess[k] - prev.ess[k]).norm();
  err += (next.hvac[building] - prev.hvac[building]).norm();
  return err;
}

double primal_distance(const PrimalState& a, const PrimalState& b) {
  double acc = 0.0;
  auto add = [&](const std::vector<Trace>& x, const std::vector<Trace>& y) {
    for (std::size_t k = 0; k < x.size(); ++k) acc += (x[k] - y[k]).squaredNorm();
  };
  add(a.ev, b.ev);
  add(a.pv, b.pv);
  add(a.ess, b.ess);
  add(a.hvac, b.hvac);
  return std::sqrt(acc);
}

namespace {

PrimalState random_feasible(const Problem& problem, const LocalSets& sets, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto draw = [&](const Trace& lo, const Trace& hi) {
    Trace z(lo.size());
    for (Eigen::Index t = 0; t < z.size(); ++t) z[t] = lo[t] + unit(rng) * (hi[t] - lo[t]);
    return z;
  };
  const Trace zeros = Trace::Zero(problem.horizon);
  PrimalState s;
  for (std::size_t k = 0; k < problem.evs.size(); ++k) {
    s.ev.push_back(project_ev(draw(zeros, problem.evs[k].r_max), problem.evs[k], problem.dt_hours));
  }
  for (std::size_t k = 0; k < problem.pvs.size(); ++k) {
    s.pv.push_back(draw(zeros, problem.pvs[k].p_max));
  }
  for (std::size_t k = 0; k < problem.esss.size(); ++k) {
    s.ess.push_back(sets.ess(k).project(draw(sets.ess(k).lo(), sets.ess(k).hi())));
  }
  for (std::size_t j = 0; j < problem.buildings.size(); ++j) {
    s.hvac.push_back(sets.hvac(j).project(draw(sets.hvac(j).lo(), sets.hvac(j).hi())));
  }
  return s;
}

}  // namespace

ContractionReport contraction_probe(const Problem& problem, const LocalSets& sets,
                                    const DualState& dual, const SpdsConfig& cfg, int K,
                                    std::uint64_t seed, int iteration, const PrimalState* start,
                                    int max_inner_steps, double inner_tol) {
  if (K < 1) throw InvalidArgument("contraction_probe: K must be at least 1");
  PrimalState x = start ? *start : random_feasible(problem, sets, seed);
  ProjectionCache cache(problem);
  int steps = 0;
  auto step = [&](PrimalState& state) {
    if (steps >= max_inner_steps) {
      throw ConvergenceFailure("contraction_probe: frozen-dual primal loop did not reach " +
                               std::to_string(inner_tol) + " within " +
                               std::to_string(max_inner_steps) + " steps");
    }
    const Eigen::MatrixXd flows = evaluate_network(problem, state).p_flows;
    for (std::size_t j = 0; j < problem.buildings.size(); ++j) {
      update_building(problem, sets, cache, j, flows, dual, cfg, iteration, state);
    }
    ++steps;
  };

  std::vector<PrimalState> trajectory{x};
  for (int k = 0; k < K; ++k) {
    step(x);
    trajectory.push_back(x);
  }

  // The limit itself: Anderson-extrapolated fixed-point iteration of the same
  // map, accepted only once a plain step moves less than inner_tol.
  constexpr int kMemory = 8;
  std::vector<Eigen::VectorXd> dx_hist, dg_hist;
  Eigen::VectorXd xv = flatten(x), gv;
  PrimalState fx = x;
  step(fx);
  gv = flatten(fx) - xv;
  double best = gv.norm();
  while (gv.norm() >= inner_tol) {
    Eigen::VectorXd next = xv + gv;
    if (!dg_hist.empty()) {
      const auto m = static_cast<Eigen::Index>(dg_hist.size());
      Eigen::MatrixXd DG(gv.size(), m), DX(gv.size(), m);
      for (Eigen::Index c = 0; c < m; ++c) {
        DG.col(c) = dg_hist[static_cast<std::size_t>(c)];
        DX.col(c) = dx_hist[static_cast<std::size_t>(c)];
      }
      const Eigen::VectorXd gamma = DG.colPivHouseholderQr().solve(gv);
      if (gamma.allFinite()) next -= (DX + DG) * gamma;
    }
    PrimalState cand = unflatten(next, x);
    PrimalState fc = cand;
    step(fc);
    Eigen::VectorXd nv = flatten(cand);
    Eigen::VectorXd ng = flatten(fc) - nv;
    if (!(ng.norm() < 10.0 * best)) {
      // Extrapolation went astray: restart from a plain step.
      dx_hist.clear();
      dg_hist.clear();
      cand = fx;
      fc = cand;
      step(fc);
      nv = flatten(cand);
      ng = flatten(fc) - nv;
    } else {
      dx_hist.push_back(nv - xv);
      dg_hist.push_back(ng - gv);
      if (static_cast<int>(dx_hist.size()) > kMemory) {
        dx_hist.erase(dx_hist.begin());
        dg_hist.erase(dg_hist.begin());
      }
    }
    best = std::min(best, ng.norm());
    xv = std::move(nv);
    gv = std::move(ng);
    fx = std::move(fc);
  }
  x = fx;

  ContractionReport report;
  report.inner_steps_to_reference = steps;
  report.alpha_scale = cfg.schedule_factor(iteration);
  report.tau_x = cfg.tau_x;
  for (const auto& s : trajectory) report.distances.push_back(primal_distance(s, x));

  // Least-squares slope of log(d_k^2) over the informative prefix.
  const double floor = 1e-12 * std::max(1.0, report.distances.front());
  double sk = 0, sy = 0, skk = 0, sky = 0;
  int m = 0;
  for (std::size_t k = 0; k < report.distances.size(); ++k) {
    if (report.distances[k] <= floor) break;
    const double y = std::log(sq(report.distances[k]));
    sk += k;
    sy += y;
    skk += static_cast<double>(k * k);
    sky += k * y;
    ++m;
  }
  if (m >= 2) {
    const double slope = (m * sky - sk * sy) / (m * skk - sk * sk);
    report.ratio = std::exp(slope);
  } else {
    // Already at the limit (or reached it in one step).
    report.ratio = 0.0;
  }
  report.contracting = report.ratio < 1.0;
  return report;
}

}  // namespace geb
