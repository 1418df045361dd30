#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "geb/thermal_model.hpp"

namespace geb {

// Line impedances are per-unit on the feeder base.
struct LineSpec {
  std::string from;
  std::string to;
  double r = 0.0;
  double x = 0.0;
};

// Radial feeder. Downstream nodes are indexed 0..n-1 in breadth-first order
// from the head; line i is the line feeding node i, so lines and nodes share
// an index.
struct FeederModel {
  std::string head;
  std::vector<std::string> nodes;
  std::vector<int> parent;          // -1 when fed directly by the head
  Eigen::VectorXd r;                // line resistances (pu), by line index
  Eigen::VectorXd x;                // line reactances (pu)
  double v0_sq = 1.0;               // squared head voltage (pu^2)
  std::vector<std::vector<std::size_t>> path_sets;  // lines head -> node i
  Eigen::MatrixXd R;
  Eigen::MatrixXd X;

  std::size_t size() const { return nodes.size(); }
  std::size_t node_index(const std::string& name) const;
};

// Per-unit nodal loads, n x T, consumption positive.
struct NodalInjection {
  Eigen::MatrixXd p;
  Eigen::MatrixXd q;
};

struct VoltageLimits {
  Trace v_l_sq;
  Trace v_u_sq;

  void validate(Eigen::Index horizon) const;
};

// Baseline (non-controllable) demand by node, in kW / kvar, n x T.
struct BaselineLoad {
  Eigen::MatrixXd p_kw;
  Eigen::MatrixXd q_kvar;
};

// A device trace attached to a node; sign handled by the caller's choice of
// load or generation list.
struct NodalContribution {
  std::size_t node = 0;
  const Trace* p_kw = nullptr;
  double scale = 1.0;
};

FeederModel build_feeder(const std::string& head, std::span<const LineSpec> lines, double v0_pu);

/// Squared voltage magnitudes (pu^2), n x T, from the R/X matrices.
Eigen::MatrixXd voltages(const FeederModel& model, const NodalInjection& inj);

/// Same quantity accumulated line by line from the head: V_child = V_parent -
/// 2(r P + x Q). Used as an independent check of the matrix form.
Eigen::MatrixXd voltages_by_line_drops(const FeederModel& model, const NodalInjection& inj);

/// Lossless flow on each line: sum of downstream nodal loads (n x T, pu).
Eigen::MatrixXd line_flows(const FeederModel& model, const Eigen::MatrixXd& nodal);

/// weight * sum_l r_l (|P_l|^2 + |Q_l|^2) / |V0|^2, per-unit.
double power_loss(const FeederModel& model, const Eigen::MatrixXd& p_flows,
                  const Eigen::MatrixXd& q_flows, double weight);

/// Gradient of power_loss with respect to each nodal active load (pu/pu).
Eigen::MatrixXd power_loss_gradient(const FeederModel& model, const Eigen::MatrixXd& p_flows,
                                    double weight);

/// Net nodal injections in per-unit: baseline + loads - generation.
NodalInjection assemble_injections(const FeederModel& model, const BaselineLoad& baseline,
                                   std::span<const NodalContribution> loads,
                                   std::span<const NodalContribution> generation,
                                   double base_kva);

}  // namespace geb
