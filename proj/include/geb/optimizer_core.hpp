#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "geb/der_models.hpp"
#include "geb/grid_network.hpp"
#include "geb/polytope_projection.hpp"
#include "geb/thermal_model.hpp"

namespace geb {

struct ObjectiveWeights {
  double delta1 = 1.0;  // network loss (kW)
  double delta2 = 1.0;  // ESS degradation (kW^2)
  // Optional extensions, off at zero weight.
  double pv_curtailment = 0.0;  // sum_k ||p_k - p_max_k||^2
  double utility = 0.0;         // sum_i p_i^T price
  Trace price;                  // per-kWh price, length T when utility > 0

  void validate(Eigen::Index horizon) const;
};

struct BuildingProblem {
  std::string id;
  std::size_t node = 0;
  AggregateBuildingModel model;
  ComfortBand comfort;
  Trace theta_amb;
};

// Indices into Problem::evs/pvs/esss owned by one building.
struct BuildingDevices {
  std::vector<std::size_t> evs;
  std::vector<std::size_t> pvs;
  std::vector<std::size_t> esss;
};

// Everything the solver needs; immutable once validated.
struct Problem {
  Eigen::Index horizon = 0;
  double dt_hours = 0.25;
  double base_kva = 100.0;
  FeederModel feeder;
  BaselineLoad baseline;
  VoltageLimits limits;
  ObjectiveWeights weights;
  std::vector<BuildingProblem> buildings;
  std::vector<EvSpec> evs;
  std::vector<PvSpec> pvs;
  std::vector<EssSpec> esss;

  // Derived by finalize().
  std::vector<BuildingDevices> by_building;
  Eigen::MatrixXd q_flows;  // fixed reactive line flows, pu

  /// Checks invariants and fills the derived members.
  void finalize();
};

struct PrimalState {
  std::vector<Trace> ev;
  std::vector<Trace> pv;
  std::vector<Trace> ess;
  std::vector<Trace> hvac;  // On fraction per building

};

// Multipliers of the upper (lambda) and lower (mu) voltage limits, n x T.
struct DualState {
  Eigen::MatrixXd lambda;
  Eigen::MatrixXd mu;

  static DualState zeros(const Problem& problem);
};

enum class StepSchedule { Constant, Diminishing };

struct PrimalSteps {
  double ev = 1.0;
  double pv = 1.0;
  double ess = 1.0;
  double hvac = 1.0;
};

struct SpdsConfig {
  double tau_x = 0.99;
  double tau_y = 0.99;
  PrimalSteps alpha;
  double beta = 1.0;
  StepSchedule schedule = StepSchedule::Diminishing;
  double eps0 = 1e-6;
  int l_max = 5000;

  void validate() const;
  double schedule_factor(int iteration) const;
};

struct ContractionReport {
  std::vector<double> distances;  // ||X^(k) - X*||, k = 0..K
  double ratio = 0.0;             // fitted per-step ratio of squared distances
  bool contracting = false;
  int inner_steps_to_reference = 0;
  double alpha_scale = 1.0;
  double tau_x = 0.0;
};

enum class Family : std::uint8_t { Ev, Pv, Ess, Hvac };

struct VariableId {
  Family family = Family::Ev;
  std::size_t index = 0;
};

struct ObjectiveTerms {
  double loss_kw = 0.0;      // f1 (unweighted)
  double degradation = 0.0;  // sum of f2 (unweighted)
  double curtailment = 0.0;
  double utility = 0.0;
  double total = 0.0;        // weighted sum
};

// Derived network quantities of one primal state.
struct NetworkState {
  NodalInjection injection;
  Eigen::MatrixXd p_flows;
  Eigen::MatrixXd voltages;
};

// Projection data for every local feasible set.
class LocalSets {
 public:
  LocalSets() = default;
  explicit LocalSets(const Problem& problem, DykstraOptions options = {});

  const PolytopeProjector& ess(std::size_t k) const { return ess_[k]; }
  const PolytopeProjector& hvac(std::size_t j) const { return hvac_[j]; }

 private:
  std::vector<PolytopeProjector> ess_;
  std::vector<PolytopeProjector> hvac_;
};

// Dykstra warm starts, separate for the inner and outer projection of each
// SPDS step. Owned by whoever owns the iterate.
struct ProjectionCache {
  std::vector<DykstraWarmStart> ess_inner, ess_outer, hvac_inner, hvac_outer;

  ProjectionCache() = default;
  explicit ProjectionCache(const Problem& problem);
};

NetworkState evaluate_network(const Problem& problem, const PrimalState& primal);

ObjectiveTerms objective_terms(const Problem& problem, const PrimalState& primal);

double lagrangian(const Problem& problem, const PrimalState& primal, const DualState& dual);

/// d L / d p (per kW) for a load at `node`, given the line flows the SO
/// reports and the current multipliers.
Trace node_price(const Problem& problem, std::size_t node, const Eigen::MatrixXd& p_flows,
                 const DualState& dual);

Trace subgrad_primal(const Problem& problem, VariableId var, const PrimalState& primal,
                     const DualState& dual);

/// Same as subgrad_primal with the node price already known.
Trace device_gradient(const Problem& problem, VariableId var, const PrimalState& primal,
                      const Trace& price);

using Projection = std::function<Trace(const Trace&)>;

/// Pi(Pi(tau x - alpha grad) / tau); `inner` and `outer` project onto the
/// same set and may differ only in the warm start they carry.
Trace spds_primal_step(const Trace& x, const Trace& grad, double alpha, double tau,
                       const Projection& inner, const Projection& outer);
Trace spds_primal_step(const Trace& x, const Trace& grad, double alpha, double tau,
                       const Projection& project);

/// One dual step from the voltage matrix; lambda follows V - V_u and mu
/// follows V_l - V.
DualState spds_dual_step(const DualState& y, const Eigen::MatrixXd& voltages,
                         const VoltageLimits& limits, double beta, double tau);

/// Projects one decision trace onto its local set.
Trace project_variable(const Problem& problem, const LocalSets& sets, VariableId var,
                       const Trace& z, DykstraWarmStart* warm = nullptr);

/// Projected zero traces.
PrimalState initial_primal(const Problem& problem, const LocalSets& sets);

/// Updates every decision variable of building j in place.
void update_building(const Problem& problem, const LocalSets& sets, ProjectionCache& cache,
                     std::size_t building, const Eigen::MatrixXd& p_flows, const DualState& dual,
                     const SpdsConfig& cfg, int iteration, PrimalState& primal);

/// Sum of 2-norms of successive differences over building j's variables.
double convergence_error(const Problem& problem, const PrimalState& prev,
                         const PrimalState& next, std::size_t building);

/// Runs primal steps with `dual` frozen from a random feasible start (or
/// `start` when given) and fits the per-step contraction of the squared
/// distance to the trajectory's limit over the first K steps.
ContractionReport contraction_probe(const Problem& problem, const LocalSets& sets,
                                    const DualState& dual, const SpdsConfig& cfg, int K,
                                    std::uint64_t seed, int iteration = 0,
                                    const PrimalState* start = nullptr,
                                    int max_inner_steps = 50000, double inner_tol = 1e-10);

/// Distance between two primal states (all traces stacked).
double primal_distance(const PrimalState& a, const PrimalState& b);

}  // namespace geb
