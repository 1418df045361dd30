#include "geb/hdc_coordinator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include "geb/errors.hpp"

namespace geb {

AsyncSchedule AsyncSchedule::synchronous(std::size_t buildings) {
  AsyncSchedule s;
  s.cadence.assign(buildings, 1);
  return s;
}

AsyncSchedule AsyncSchedule::inexact_dual(std::size_t buildings, int K) {
  AsyncSchedule s;
  s.cadence.assign(buildings, 1);
  s.dual_mode = DualMode::EveryKPrimal;
  s.K = K;
  return s;
}

void AsyncSchedule::validate(std::size_t buildings) const {
  if (K < 1) throw InvalidArgument("cadence bound K must be at least 1");
  if (cadence.size() != buildings) {
    throw InvalidArgument("schedule has " + std::to_string(cadence.size()) + " cadences for " +
                          std::to_string(buildings) + " buildings");
  }
  for (std::size_t j = 0; j < cadence.size(); ++j) {
    if (cadence[j] < 1 || cadence[j] > K) {
      throw InvalidArgument("cadence of building " + std::to_string(j) + " is " +
                            std::to_string(cadence[j]) + ", outside [1, " + std::to_string(K) +
                            "]");
    }
    if (dual_mode == DualMode::EveryKPrimal && cadence[j] != 1) {
      throw InvalidArgument("inexact-dual mode requires every aggregator to step each iteration");
    }
  }
}

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

class Mailbox {
 public:
  explicit Mailbox(bool record) : record_(record) {}

  void send(Message m) { in_flight_.push_back(std::move(m)); }

  // Messages for `receiver` sent at or before `latest_tag`, in (tag, sender)
  // order. They leave the mailbox.
  std::vector<Message> collect(int receiver, int latest_tag, int now) {
    std::vector<Message> out;
    auto keep = in_flight_.begin();
    for (auto it = in_flight_.begin(); it != in_flight_.end(); ++it) {
      if (it->receiver == receiver && it->tag <= latest_tag) {
        out.push_back(std::move(*it));
      } else {
        *keep++ = std::move(*it);
      }
    }
    in_flight_.erase(keep, in_flight_.end());
    std::stable_sort(out.begin(), out.end(), [](const Message& a, const Message& b) {
      return a.tag != b.tag ? a.tag < b.tag : a.sender < b.sender;
    });
    for (const auto& m : out) {
      if (m.tag > now) throw std::logic_error("message read before it was sent");
      if (record_) log_.push_back({m.sender, m.receiver, m.tag, now});
    }
    return out;
  }

  std::vector<MessageRecord> take_log() { return std::move(log_); }

 private:
  bool record_;
  std::vector<Message> in_flight_;
  std::vector<MessageRecord> log_;
};

std::shared_ptr<const PrimalPayload> pack(const Problem& problem, const PrimalState& x,
                                          std::size_t j) {
  auto p = std::make_shared<PrimalPayload>();
  p->building = j;
  const auto& d = problem.by_building[j];
  for (auto k : d.evs) p->ev.push_back(x.ev[k]);
  for (auto k : d.pvs) p->pv.push_back(x.pv[k]);
  for (auto k : d.esss) p->ess.push_back(x.ess[k]);
  p->hvac = x.hvac[j];
  return p;
}

void unpack(const Problem& problem, const PrimalPayload& p, PrimalState& x) {
  const auto& d = problem.by_building[p.building];
  for (std::size_t n = 0; n < d.evs.size(); ++n) x.ev[d.evs[n]] = p.ev[n];
  for (std::size_t n = 0; n < d.pvs.size(); ++n) x.pv[d.pvs[n]] = p.pv[n];
  for (std::size_t n = 0; n < d.esss.size(); ++n) x.ess[d.esss[n]] = p.ess[n];
  x.hvac[p.building] = p.hvac;
}

void copy_building(const Problem& problem, const PrimalState& from, PrimalState& to,
                   std::size_t j) {
  const auto& d = problem.by_building[j];
  for (auto k : d.evs) to.ev[k] = from.ev[k];
  for (auto k : d.pvs) to.pv[k] = from.pv[k];
  for (auto k : d.esss) to.ess[k] = from.ess[k];
  to.hvac[j] = from.hvac[j];
}

IterationLog make_log(const Problem& problem, int iteration, const PrimalState& x,
                      const DualState& y, const std::vector<double>& eps,
                      const std::vector<std::uint8_t>& updated, bool dual_updated) {
  IterationLog log;
  log.iteration = iteration;
  log.eps = eps;
  log.updated = updated;
  log.dual_updated = dual_updated;
  log.lambda_norm = y.lambda.norm();
  log.mu_norm = y.mu.norm();
  log.objective = objective_terms(problem, x);
  log.lagrangian = lagrangian(problem, x, y);
  return log;
}

bool all_below(const std::vector<double>& eps, double tol) {
  return std::all_of(eps.begin(), eps.end(), [&](double e) { return e <= tol; });
}

void run_probe(const Problem& problem, const DualState& dual, const SpdsConfig& cfg,
               const RunOptions& options, std::uint64_t seed, int iteration, RunResult& result) {
  if (std::find(options.probe_at.begin(), options.probe_at.end(), iteration) ==
      options.probe_at.end()) {
    return;
  }
  // The 1e-10 reference needs projections well below the run's tolerance.
  const LocalSets tight(problem, DykstraOptions{1e-13, 1e-12, 100000});
  result.probes.push_back(contraction_probe(problem, tight, dual, cfg, options.probe_steps,
                                            seed + static_cast<std::uint64_t>(iteration),
                                            iteration));
  result.probe_iterations.push_back(iteration);
}

}  // namespace

RunResult run_hdc(const Problem& problem, const AsyncSchedule& schedule, const SpdsConfig& cfg,
                  std::uint64_t seed, const RunOptions& options) {
  cfg.validate();
  const std::size_t J = problem.buildings.size();
  schedule.validate(J);
  const bool inexact = schedule.dual_mode == DualMode::EveryKPrimal;

  const LocalSets sets(problem, options.projection);
  const PrimalState x0 = options.initial ? *options.initial : initial_primal(problem, sets);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> draw_cadence(1, schedule.K);

  // Aggregator state. Each keeps a full-size PrimalState but only ever reads
  // or writes its own building's entries.
  struct Agent {
    PrimalState local;
    PrimalState block_start;
    ProjectionCache cache;
    std::shared_ptr<const DualPayload> latest;
    int next_update = 0;
    bool updated_once = false;
  };
  std::vector<Agent> agents(J);
  Mailbox mail(options.record_messages);
  for (std::size_t j = 0; j < J; ++j) {
    agents[j].local = x0;
    agents[j].block_start = x0;
    agents[j].cache = ProjectionCache(problem);
    mail.send({static_cast<int>(j), kSystemOperator, -1, pack(problem, x0, j)});
  }

  PrimalState so_view = x0;
  DualState so_dual = DualState::zeros(problem);
  PrimalState truth = x0;  // observer copy for logging only

  RunResult result;
  std::vector<double> eps(J, kNaN);
  int l = 0;
  for (; l < cfg.l_max; ++l) {
    // System operator: one-iteration uplink latency.
    for (const auto& m : mail.collect(kSystemOperator, l - 1, l)) {
      unpack(problem, *std::get<std::shared_ptr<const PrimalPayload>>(m.payload), so_view);
    }
    const NetworkState net = evaluate_network(problem, so_view);
    const bool dual_due = !inexact || l % schedule.K == 0;
    if (dual_due) {
      so_dual = spds_dual_step(so_dual, net.voltages, problem.limits,
                               cfg.beta * cfg.schedule_factor(l), cfg.tau_y);
    }
    auto broadcast = std::make_shared<const DualPayload>(DualPayload{so_dual, net.p_flows});
    for (std::size_t j = 0; j < J; ++j) {
      mail.send({kSystemOperator, static_cast<int>(j), l, broadcast});
    }
    run_probe(problem, so_dual, cfg, options, seed, l, result);

    // Aggregators.
    std::vector<std::uint8_t> updated(J, 0);
    for (std::size_t j = 0; j < J; ++j) {
      Agent& a = agents[j];
      for (auto& m : mail.collect(static_cast<int>(j), l, l)) {
        a.latest = std::get<std::shared_ptr<const DualPayload>>(m.payload);
      }
      bool due;
      if (schedule.cadence_hook) {
        const int k = schedule.cadence_hook(j, l);
        if (k < 1 || k > schedule.K) throw InvalidArgument("cadence hook returned out-of-range k");
        due = l % k == 0;
      } else if (schedule.random_cadence) {
        due = l >= a.next_update;
      } else {
        due = l % schedule.cadence[j] == 0;
      }
      if (!due) continue;

      PrimalState prev;
      if (!inexact) prev = a.local;
      update_building(problem, sets, a.cache, j, a.latest->p_flows, a.latest->dual, cfg, l,
                      a.local);
      if (!inexact) eps[j] = convergence_error(problem, prev, a.local, j);
      a.updated_once = true;
      updated[j] = 1;
      if (schedule.random_cadence) a.next_update = l + draw_cadence(rng);
      mail.send({static_cast<int>(j), kSystemOperator, l, pack(problem, a.local, j)});
      copy_building(problem, a.local, truth, j);
    }

    // In inexact-dual mode the error of a building is its movement over a
    // whole block of K primal steps.
    const bool block_end = !inexact || (l + 1) % schedule.K == 0;
    if (inexact && block_end) {
      for (std::size_t j = 0; j < J; ++j) {
        eps[j] = convergence_error(problem, agents[j].block_start, agents[j].local, j);
        copy_building(problem, agents[j].local, agents[j].block_start, j);
      }
    }

    result.log.push_back(make_log(problem, l, truth, so_dual, eps, updated, dual_due));
    const bool all_updated =
        std::all_of(agents.begin(), agents.end(), [](const Agent& a) { return a.updated_once; });
    if (block_end && all_updated && all_below(eps, cfg.eps0)) {
      result.converged = true;
      ++l;
      break;
    }
  }

  result.iterations = l;
  result.primal = truth;
  result.dual = so_dual;
  result.messages = mail.take_log();
  result.feasibility = feasibility_check(problem, result.primal);
  return result;
}

RunResult run_inexact_dual(const Problem& problem, int K, const SpdsConfig& cfg,
                           std::uint64_t seed, const RunOptions& options) {
  if (K < 1) throw InvalidArgument("inexact-dual run needs K >= 1");
  return run_hdc(problem, AsyncSchedule::inexact_dual(problem.buildings.size(), K), cfg, seed,
                 options);
}

RunResult run_synchronous(const Problem& problem, const SpdsConfig& cfg,
                          const RunOptions& options) {
  cfg.validate();
  const std::size_t J = problem.buildings.size();
  const LocalSets sets(problem, options.projection);
  PrimalState x = options.initial ? *options.initial : initial_primal(problem, sets);
  DualState y = DualState::zeros(problem);
  ProjectionCache cache(problem);

  RunResult result;
  std::vector<double> eps(J, kNaN);
  const std::vector<std::uint8_t> all(J, 1);
  int l = 0;
  for (; l < cfg.l_max; ++l) {
    const NetworkState net = evaluate_network(problem, x);
    y = spds_dual_step(y, net.voltages, problem.limits, cfg.beta * cfg.schedule_factor(l),
                       cfg.tau_y);
    run_probe(problem, y, cfg, options, 0, l, result);
    const PrimalState prev = x;
    for (std::size_t j = 0; j < J; ++j) {
      update_building(problem, sets, cache, j, net.p_flows, y, cfg, l, x);
      eps[j] = convergence_error(problem, prev, x, j);
    }
    result.log.push_back(make_log(problem, l, x, y, eps, all, true));
    if (all_below(eps, cfg.eps0)) {
      result.converged = true;
      ++l;
      break;
    }
  }
  result.iterations = l;
  result.primal = std::move(x);
  result.dual = std::move(y);
  result.feasibility = feasibility_check(problem, result.primal);
  return result;
}

std::vector<BuildingDispatch> finalize_dispatch(const Problem& problem, const PrimalState& primal,
                                                std::span<const RoomFleet> fleets) {
  const auto T = problem.horizon;
  std::vector<BuildingDispatch> out;
  for (std::size_t j = 0; j < problem.buildings.size(); ++j) {
    const auto& b = problem.buildings[j];
    const auto& m = b.model;
    const Trace u = primal.hvac[j].cwiseMax(0.0).cwiseMin(1.0);
    BuildingDispatch d;
    d.aggregate = simulate_aggregate(m, b.theta_amb, u);
    d.realized_u.resize(T);
    d.hvac_power_kw.resize(T);

    const RoomFleet* fleet = j < fleets.size() && !fleets[j].rooms.empty() ? &fleets[j] : nullptr;
    if (fleet) {
      if (fleet->rooms.size() != static_cast<std::size_t>(m.n_hvac) ||
          fleet->initial.size() != fleet->rooms.size()) {
        throw InvalidArgument("building " + b.id + ": room fleet size differs from n_hvac");
      }
      fleet->weather.validate(T);
    }
    const auto n = static_cast<Eigen::Index>(m.n_hvac);
    d.room_temps.resize(n, T + 1);
    std::vector<ThermalState> states;
    if (fleet) {
      states = fleet->initial;
    } else {
      states.assign(static_cast<std::size_t>(n), ThermalState{m.theta0, m.theta0, m.theta0});
    }
    for (Eigen::Index r = 0; r < n; ++r) d.room_temps(r, 0) = states[r].theta_in;

    std::vector<double> temps(static_cast<std::size_t>(n));
    for (Eigen::Index t = 0; t < T; ++t) {
      for (Eigen::Index r = 0; r < n; ++r) temps[r] = d.room_temps(r, t);
      HvacDispatch step = dispatch_priority(m, u[t], temps, b.comfort.set_point(t));
      for (Eigen::Index r = 0; r < n; ++r) {
        if (fleet) {
          states[r] = step_room(fleet->rooms[r], states[r], fleet->weather.at(t), step.on_off[r],
                                problem.dt_hours);
          d.room_temps(r, t + 1) = states[r].theta_in;
        } else {
          d.room_temps(r, t + 1) = d.aggregate[t];
        }
        d.max_deviation = std::max(d.max_deviation, std::abs(d.room_temps(r, t + 1) - d.aggregate[t]));
      }
      d.realized_u[t] = step.u_frac;
      d.hvac_power_kw[t] = step.n_on() * m.p_rated;
      d.steps.push_back(std::move(step));
    }
    out.push_back(std::move(d));
  }
  return out;
}

}  // namespace geb
