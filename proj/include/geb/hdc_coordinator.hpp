#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <variant>
#include <vector>

#include "geb/feasibility.hpp"
#include "geb/optimizer_core.hpp"
#include "geb/thermal_model.hpp"

namespace geb {

enum class DualMode {
  EveryIteration,  // SO steps every iteration on the latest primals it holds
  EveryKPrimal,    // one dual step per K primal steps of every aggregator
};

struct AsyncSchedule {
  std::vector<int> cadence;  // k_j, one per building
  DualMode dual_mode = DualMode::EveryIteration;
  int K = 1;  // cadence bound; also the dual period in EveryKPrimal mode
  // Redraw k_j uniformly in [1, K] after every update of building j.
  bool random_cadence = false;
  // Optional override: (building, iteration) -> k_j.
  std::function<int(std::size_t, int)> cadence_hook;

  static AsyncSchedule synchronous(std::size_t buildings);
  static AsyncSchedule inexact_dual(std::size_t buildings, int K);
  void validate(std::size_t buildings) const;
};

inline constexpr int kSystemOperator = -1;

// Aggregator -> SO: the building's current decision traces.
struct PrimalPayload {
  std::size_t building = 0;
  std::vector<Trace> ev, pv, ess;  // in by_building order
  Trace hvac;
};

// SO -> aggregators: multipliers and the line flows they were priced with.
struct DualPayload {
  DualState dual;
  Eigen::MatrixXd p_flows;
};

struct Message {
  int sender = 0;    // building index, or kSystemOperator
  int receiver = 0;  // building index, or kSystemOperator
  int tag = 0;       // iteration at which it was sent
  std::variant<std::shared_ptr<const PrimalPayload>, std::shared_ptr<const DualPayload>> payload;
};

// Who consumed which message, and when.
struct MessageRecord {
  int sender = 0;
  int receiver = 0;
  int tag = 0;
  int read_at = 0;
};

struct IterationLog {
  int iteration = 0;
  std::vector<double> eps;  // latest epsilon_j per building (NaN before first update)
  std::vector<std::uint8_t> updated;
  bool dual_updated = false;
  double lambda_norm = 0.0;
  double mu_norm = 0.0;
  ObjectiveTerms objective;
  double lagrangian = 0.0;
};

struct BuildingDispatch {
  std::vector<HvacDispatch> steps;  // one per time step
  Eigen::MatrixXd room_temps;       // rooms x (T+1), column 0 initial
  Trace aggregate;                  // aggregate model trace under the optimized fractions
  Trace realized_u;
  Trace hvac_power_kw;              // n_on * p_rated
  double max_deviation = 0.0;       // max |room - aggregate| over t >= 1
};

struct RunResult {
  PrimalState primal;
  DualState dual;
  int iterations = 0;
  bool converged = false;
  std::vector<IterationLog> log;
  std::vector<MessageRecord> messages;  // filled when requested
  std::vector<ContractionReport> probes;
  std::vector<int> probe_iterations;
  std::vector<BuildingDispatch> dispatch;  // filled by finalize_dispatch
  FeasibilityReport feasibility;
};

struct RunOptions {
  bool record_messages = false;
  std::optional<PrimalState> initial;
  // Contraction probes with the dual frozen at these outer iterations.
  std::vector<int> probe_at;
  int probe_steps = 20;
  DykstraOptions projection;
};

/// Simulated message-passing run with per-building cadences.
RunResult run_hdc(const Problem& problem, const AsyncSchedule& schedule, const SpdsConfig& cfg,
                  std::uint64_t seed, const RunOptions& options = {});

/// K primal steps per aggregator between consecutive dual steps.
RunResult run_inexact_dual(const Problem& problem, int K, const SpdsConfig& cfg,
                           std::uint64_t seed = 0, const RunOptions& options = {});

/// Plain loop without agents: Y <- D(Y, V(X)); X <- P(X, Y, flows(X)).
RunResult run_synchronous(const Problem& problem, const SpdsConfig& cfg,
                          const RunOptions& options = {});

// Individual rooms of one building for the closed-loop dispatch.
struct RoomFleet {
  std::vector<RoomThermalParams> rooms;
  std::vector<ThermalState> initial;
  WeatherTrace weather;
};

/// Priority dispatch of each building's On fractions, stepping the rooms
/// under the states actually chosen. A building with no rooms is dispatched
/// as if every room sat at the aggregate temperature.
std::vector<BuildingDispatch> finalize_dispatch(const Problem& problem, const PrimalState& primal,
                                                std::span<const RoomFleet> fleets);

}  // namespace geb
