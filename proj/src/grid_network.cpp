#include "geb/grid_network.hpp"

#include <algorithm>
#include <deque>
#include <map>

#include "geb/errors.hpp"

namespace geb {

std::size_t FeederModel::node_index(const std::string& name) const {
  auto it = std::find(nodes.begin(), nodes.end(), name);
  if (it == nodes.end()) throw ConfigError("unknown feeder node '" + name + "'");
  return static_cast<std::size_t>(it - nodes.begin());
}

void VoltageLimits::validate(Eigen::Index horizon) const {
  if (v_l_sq.size() != horizon || v_u_sq.size() != horizon) {
    throw InvalidArgument("voltage limits must have length T");
  }
  for (Eigen::Index t = 0; t < horizon; ++t) {
    if (!(v_l_sq[t] > 0.0 && v_l_sq[t] < v_u_sq[t])) {
      throw InvalidArgument("voltage limits require 0 < v_l < v_u");
    }
  }
}

FeederModel build_feeder(const std::string& head, std::span<const LineSpec> lines, double v0_pu) {
  if (!(v0_pu > 0.0)) throw InvalidArgument("feeder head voltage must be positive");

  std::map<std::string, std::vector<std::size_t>> adjacency;
  adjacency[head];
  for (std::size_t k = 0; k < lines.size(); ++k) {
    const auto& l = lines[k];
    if (l.from == l.to) throw TopologyError("line " + l.from + "-" + l.to + " is a self loop");
    if (l.r < 0.0 || l.x < 0.0) {
      throw InvalidArgument("line " + l.from + "-" + l.to + " has negative impedance");
    }
    adjacency[l.from].push_back(k);
    adjacency[l.to].push_back(k);
  }
  const std::size_t n = adjacency.size() - 1;
  if (lines.size() != n) {
    throw TopologyError("feeder with " + std::to_string(n + 1) + " nodes has " +
                        std::to_string(lines.size()) + " lines; a tree needs " + std::to_string(n));
  }

  FeederModel m;
  m.head = head;
  m.v0_sq = v0_pu * v0_pu;
  m.r.resize(static_cast<Eigen::Index>(n));
  m.x.resize(static_cast<Eigen::Index>(n));

  std::map<std::string, int> index;  // head -> -1
  index[head] = -1;
  std::vector<bool> used(lines.size(), false);
  std::deque<std::string> queue{head};
  while (!queue.empty()) {
    const std::string cur = queue.front();
    queue.pop_front();
    for (std::size_t k : adjacency[cur]) {
      if (used[k]) continue;
      used[k] = true;
      const auto& l = lines[k];
      const std::string& other = (l.from == cur) ? l.to : l.from;
      if (index.count(other)) throw TopologyError("feeder contains a cycle through " + other);
      const int idx = static_cast<int>(m.nodes.size());
      index[other] = idx;
      m.nodes.push_back(other);
      m.parent.push_back(index[cur]);
      m.r[idx] = l.r;
      m.x[idx] = l.x;
      queue.push_back(other);
    }
  }
  if (m.nodes.size() != n) {
    for (const auto& [name, _] : adjacency) {
      if (!index.count(name)) throw TopologyError("node " + name + " is not connected to the head");
    }
  }

  m.path_sets.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (int k = static_cast<int>(i); k >= 0; k = m.parent[static_cast<std::size_t>(k)]) {
      m.path_sets[i].push_back(static_cast<std::size_t>(k));
    }
    std::reverse(m.path_sets[i].begin(), m.path_sets[i].end());
  }

  const auto N = static_cast<Eigen::Index>(n);
  m.R = Eigen::MatrixXd::Zero(N, N);
  m.X = Eigen::MatrixXd::Zero(N, N);
  std::vector<char> on_path(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::fill(on_path.begin(), on_path.end(), 0);
    for (auto l : m.path_sets[i]) on_path[l] = 1;
    for (std::size_t j = 0; j < n; ++j) {
      double rs = 0.0;
      double xs = 0.0;
      for (auto l : m.path_sets[j]) {
        if (on_path[l]) {
          rs += m.r[static_cast<Eigen::Index>(l)];
          xs += m.x[static_cast<Eigen::Index>(l)];
        }
      }
      m.R(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rs;
      m.X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = xs;
    }
  }
  return m;
}

namespace {

void require_shape(const FeederModel& model, const Eigen::MatrixXd& a, Eigen::Index cols,
                   const char* what) {
  if (a.rows() != static_cast<Eigen::Index>(model.size()) || a.cols() != cols) {
    throw InvalidArgument(std::string(what) + ": expected " + std::to_string(model.size()) + "x" +
                          std::to_string(cols) + " matrix");
  }
}

}  // namespace

Eigen::MatrixXd voltages(const FeederModel& model, const NodalInjection& inj) {
  const auto T = inj.p.cols();
  require_shape(model, inj.p, T, "voltages(p)");
  require_shape(model, inj.q, T, "voltages(q)");
  Eigen::MatrixXd v = Eigen::MatrixXd::Constant(inj.p.rows(), T, model.v0_sq);
  v.noalias() -= 2.0 * model.R * inj.p;
  v.noalias() -= 2.0 * model.X * inj.q;
  return v;
}

Eigen::MatrixXd voltages_by_line_drops(const FeederModel& model, const NodalInjection& inj) {
  const auto T = inj.p.cols();
  require_shape(model, inj.q, T, "voltages_by_line_drops(q)");
  const Eigen::MatrixXd P = line_flows(model, inj.p);
  const Eigen::MatrixXd Q = line_flows(model, inj.q);
  Eigen::MatrixXd v(P.rows(), T);
  // BFS order guarantees the parent row is filled first.
  for (Eigen::Index i = 0; i < v.rows(); ++i) {
    const int par = model.parent[static_cast<std::size_t>(i)];
    for (Eigen::Index t = 0; t < T; ++t) {
      const double upstream = par < 0 ? model.v0_sq : v(par, t);
      v(i, t) = upstream - 2.0 * (model.r[i] * P(i, t) + model.x[i] * Q(i, t));
    }
  }
  return v;
}

Eigen::MatrixXd line_flows(const FeederModel& model, const Eigen::MatrixXd& nodal) {
  require_shape(model, nodal, nodal.cols(), "line_flows");
  Eigen::MatrixXd flows = nodal;
  for (auto i = static_cast<Eigen::Index>(model.size()) - 1; i >= 0; --i) {
    const int par = model.parent[static_cast<std::size_t>(i)];
    if (par >= 0) flows.row(par) += flows.row(i);
  }
  return flows;
}

double power_loss(const FeederModel& model, const Eigen::MatrixXd& p_flows,
                  const Eigen::MatrixXd& q_flows, double weight) {
  require_shape(model, p_flows, p_flows.cols(), "power_loss(P)");
  require_shape(model, q_flows, p_flows.cols(), "power_loss(Q)");
  double acc = 0.0;
  for (Eigen::Index l = 0; l < p_flows.rows(); ++l) {
    acc += model.r[l] * (p_flows.row(l).squaredNorm() + q_flows.row(l).squaredNorm());
  }
  return weight * acc / model.v0_sq;
}

Eigen::MatrixXd power_loss_gradient(const FeederModel& model, const Eigen::MatrixXd& p_flows,
                                    double weight) {
  require_shape(model, p_flows, p_flows.cols(), "power_loss_gradient");
  Eigen::MatrixXd g(p_flows.rows(), p_flows.cols());
  const double k = 2.0 * weight / model.v0_sq;
  for (Eigen::Index i = 0; i < g.rows(); ++i) {
    const int par = model.parent[static_cast<std::size_t>(i)];
    g.row(i) = k * model.r[i] * p_flows.row(i);
    if (par >= 0) g.row(i) += g.row(par);
  }
  return g;
}

NodalInjection assemble_injections(const FeederModel& model, const BaselineLoad& baseline,
                                   std::span<const NodalContribution> loads,
                                   std::span<const NodalContribution> generation,
                                   double base_kva) {
  const auto n = static_cast<Eigen::Index>(model.size());
  if (baseline.p_kw.rows() != n || baseline.q_kvar.rows() != n) {
    throw ConfigError("baseline load must provide a trace for each of the " + std::to_string(n) +
                      " feeder nodes");
  }
  const auto T = baseline.p_kw.cols();
  if (baseline.q_kvar.cols() != T) throw ConfigError("baseline p and q traces differ in length");

  Eigen::MatrixXd p = baseline.p_kw;
  auto add = [&](std::span<const NodalContribution> list, double sign) {
    for (const auto& c : list) {
      if (c.node >= model.size()) throw InvalidArgument("device attached to unknown node index");
      if (c.p_kw == nullptr || c.p_kw->size() != T) {
        throw InvalidArgument("device trace length differs from the horizon");
      }
      p.row(static_cast<Eigen::Index>(c.node)) += (sign * c.scale) * c.p_kw->transpose();
    }
  };
  add(loads, 1.0);
  add(generation, -1.0);
  return {p / base_kva, baseline.q_kvar / base_kva};
}

}  // namespace geb
