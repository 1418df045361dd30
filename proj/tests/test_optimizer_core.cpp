#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "fixtures.hpp"
#include "geb/hdc_coordinator.hpp"
#include "geb/optimizer_core.hpp"
#include "oracles.hpp"

using namespace geb;
using geb::testing::Rng;

namespace {

Trace& trace_of(PrimalState& s, VariableId v) {
  switch (v.family) {
    case Family::Ev: return s.ev[v.index];
    case Family::Pv: return s.pv[v.index];
    case Family::Ess: return s.ess[v.index];
    case Family::Hvac: return s.hvac[v.index];
  }
  return s.ev[v.index];
}

std::size_t family_size(const Problem& p, Family f) {
  switch (f) {
    case Family::Ev: return p.evs.size();
    case Family::Pv: return p.pvs.size();
    case Family::Ess: return p.esss.size();
    case Family::Hvac: return p.buildings.size();
  }
  return 0;
}

const char* family_name(Family f) {
  switch (f) {
    case Family::Ev: return "ev";
    case Family::Pv: return "pv";
    case Family::Ess: return "ess";
    case Family::Hvac: return "hvac";
  }
  return "";
}

Trace clip01(const Trace& z) { return z.cwiseMax(0.0).cwiseMin(1.0); }

}  // namespace

TEST(Lagrangian, ZeroDualIsWeightedObjective) {
  Rng rng(31);
  for (int k = 0; k < 20; ++k) {
    const auto pb = geb::testing::random_problem(rng, rng.integer(1, 6), rng.integer(1, 8));
    const auto x = geb::testing::random_state(rng, pb);
    EXPECT_NEAR(lagrangian(pb, x, DualState::zeros(pb)), objective_terms(pb, x).total,
                1e-10 * std::max(1.0, std::abs(objective_terms(pb, x).total)));
  }
}

TEST(Lagrangian, AllZeroGivesZero) {
  auto pb = geb::testing::toy_problem();
  pb.baseline.p_kw.setZero();
  pb.baseline.q_kvar.setZero();
  pb.finalize();
  PrimalState x;
  x.ess = {Trace::Zero(pb.horizon)};
  x.hvac = {Trace::Zero(pb.horizon)};
  EXPECT_EQ(lagrangian(pb, x, DualState::zeros(pb)), 0.0);
}

TEST(Lagrangian, MatchesTermByTermOracle) {
  Rng rng(32);
  for (int k = 0; k < 100; ++k) {
    const auto pb = geb::testing::random_problem(rng, rng.integer(1, 8), rng.integer(1, 12));
    const auto x = geb::testing::random_state(rng, pb);
    const auto y = geb::testing::random_dual(rng, pb, 50.0);
    const double want = oracle::lagrangian(pb, x, y);
    ASSERT_NEAR(lagrangian(pb, x, y), want, 1e-9 * std::max(1.0, std::abs(want)));
    const double obj = oracle::objective(pb, x);
    ASSERT_NEAR(objective_terms(pb, x).total, obj, 1e-9 * std::max(1.0, std::abs(obj)));
  }
}

TEST(Subgradient, ZeroAtRest) {
  auto pb = geb::testing::toy_problem();
  pb.baseline.p_kw.setZero();
  pb.baseline.q_kvar.setZero();
  pb.finalize();
  PrimalState x;
  x.ess = {Trace::Zero(pb.horizon)};
  x.hvac = {Trace::Zero(pb.horizon)};
  const auto g = subgrad_primal(pb, {Family::Ess, 0}, x, DualState::zeros(pb));
  EXPECT_EQ(g.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Subgradient, EveryFamilyMatchesFiniteDifferences) {
  Rng rng(33);
  for (Family fam : {Family::Ev, Family::Pv, Family::Ess, Family::Hvac}) {
    int checked = 0;
    while (checked < 100) {
      const auto pb = geb::testing::random_problem(rng, rng.integer(1, 6), rng.integer(1, 8));
      const auto count = family_size(pb, fam);
      if (count == 0) continue;
      const VariableId var{fam, static_cast<std::size_t>(rng.integer(0, static_cast<int>(count) - 1))};
      auto x = geb::testing::random_state(rng, pb);
      const auto y = geb::testing::random_dual(rng, pb, 50.0);
      const Trace g = subgrad_primal(pb, var, x, y);
      Trace fd(g.size());
      const double h = 1e-3;
      for (Eigen::Index t = 0; t < g.size(); ++t) {
        auto up = x, dn = x;
        trace_of(up, var)[t] += h;
        trace_of(dn, var)[t] -= h;
        fd[t] = (lagrangian(pb, up, y) - lagrangian(pb, dn, y)) / (2 * h);
      }
      const double scale = std::max(1.0, g.cwiseAbs().maxCoeff());
      ASSERT_LE((g - fd).cwiseAbs().maxCoeff(), 1e-6 * scale)
          << family_name(fam) << " state " << checked;
      ++checked;
    }
  }
}

TEST(Subgradient, LowerVoltageMultiplierPushesLoadDown) {
  auto pb = geb::testing::toy_problem();
  pb.weights.delta1 = 0.0;
  pb.weights.delta2 = 0.0;
  PrimalState x;
  x.ess = {Trace::Zero(pb.horizon)};
  x.hvac = {Trace::Zero(pb.horizon)};
  auto y = DualState::zeros(pb);
  y.mu(0, 2) = 3.0;
  const Trace g = subgrad_primal(pb, {Family::Ess, 0}, x, y);
  // one entry moved: raising the load there lowers V, which the mu term charges for
  EXPECT_GT(g[2], 0.0);
  EXPECT_NEAR(g[2], 2.0 * pb.feeder.R(0, 0) * 3.0 / pb.base_kva, 1e-15);
  EXPECT_EQ(g[0], 0.0);
  // a step along -g lowers the charging power, i.e. the load
  const Trace next = spds_primal_step(x.ess[0], g, 0.1, 0.99,
                                      [](const Trace& z) { return z; });
  EXPECT_LT(next[2], 0.0);
}

TEST(PrimalStep, HandEvaluatedDoubleProjection) {
  Trace x(1), g(1);
  x << 0.5;
  g << 0.0;
  EXPECT_DOUBLE_EQ(spds_primal_step(x, g, 1.0, 0.5, clip01)[0], 0.5);
  x << 1.0;
  g << -1.0;
  EXPECT_DOUBLE_EQ(spds_primal_step(x, g, 1.0, 0.5, clip01)[0], 1.0);
}

TEST(PrimalStep, OutputAlwaysInSet) {
  Rng rng(34);
  for (int k = 0; k < 1000; ++k) {
    const Trace x = rng.vector(5, -2, 3);
    const Trace g = rng.vector(5, -10, 10);
    const Trace out = spds_primal_step(x, g, rng.uniform(0, 2), rng.uniform(0.1, 0.999), clip01);
    ASSERT_GE(out.minCoeff(), 0.0);
    ASSERT_LE(out.maxCoeff(), 1.0);
  }
}

TEST(DualStep, Examples) {
  VoltageLimits lim{Trace::Constant(1, 0.9025), Trace::Constant(1, 1.1025)};
  DualState y{Eigen::MatrixXd::Zero(1, 1), Eigen::MatrixXd::Zero(1, 1)};
  const auto inside = spds_dual_step(y, Eigen::MatrixXd::Constant(1, 1, 1.0), lim, 1.0, 0.9);
  EXPECT_EQ(inside.lambda(0, 0), 0.0);
  EXPECT_EQ(inside.mu(0, 0), 0.0);
  const auto over = spds_dual_step(y, Eigen::MatrixXd::Constant(1, 1, 1.1125), lim, 1.0, 0.9);
  EXPECT_NEAR(over.lambda(0, 0), 0.01 / 0.9, 1e-12);
  EXPECT_EQ(over.mu(0, 0), 0.0);
}

TEST(DualStep, StaysNonnegative) {
  Rng rng(35);
  for (int k = 0; k < 200; ++k) {
    const Eigen::Index n = rng.integer(1, 6), T = rng.integer(1, 10);
    VoltageLimits lim{Trace::Constant(T, 0.9025), Trace::Constant(T, 1.1025)};
    DualState y{Eigen::MatrixXd::NullaryExpr(n, T, [&] { return rng.uniform(0, 5); }),
                Eigen::MatrixXd::NullaryExpr(n, T, [&] { return rng.uniform(0, 5); })};
    const Eigen::MatrixXd v = Eigen::MatrixXd::NullaryExpr(n, T, [&] { return rng.uniform(0.8, 1.2); });
    const auto out = spds_dual_step(y, v, lim, rng.uniform(0, 1000), rng.uniform(0.1, 0.999));
    ASSERT_GE(out.lambda.minCoeff(), 0.0);
    ASSERT_GE(out.mu.minCoeff(), 0.0);
  }
}

TEST(ConvergenceError, Examples) {
  Rng rng(36);
  const auto pb = geb::testing::random_problem(rng, 4, 6);
  const auto a = geb::testing::random_state(rng, pb);
  for (std::size_t j = 0; j < pb.buildings.size(); ++j) {
    EXPECT_EQ(convergence_error(pb, a, a, j), 0.0);
  }
  const auto& evs = pb.by_building[0].evs;
  ASSERT_FALSE(evs.empty());
  auto b = a;
  b.ev[evs[0]][3] += 1.0;
  EXPECT_NEAR(convergence_error(pb, a, b, 0), 1.0, 1e-15);
}

TEST(ConvergenceError, MatchesIndependentNormSum) {
  Rng rng(37);
  for (int k = 0; k < 50; ++k) {
    const auto pb = geb::testing::random_problem(rng, rng.integer(1, 6), rng.integer(1, 10));
    const auto a = geb::testing::random_state(rng, pb);
    const auto b = geb::testing::random_state(rng, pb);
    for (std::size_t j = 0; j < pb.buildings.size(); ++j) {
      double want = (a.hvac[j] - b.hvac[j]).norm();
      for (std::size_t i = 0; i < pb.evs.size(); ++i) {
        if (pb.evs[i].building == j) want += (a.ev[i] - b.ev[i]).norm();
      }
      for (std::size_t i = 0; i < pb.pvs.size(); ++i) {
        if (pb.pvs[i].building == j) want += (a.pv[i] - b.pv[i]).norm();
      }
      for (std::size_t i = 0; i < pb.esss.size(); ++i) {
        if (pb.esss[i].building == j) want += (a.ess[i] - b.ess[i]).norm();
      }
      ASSERT_NEAR(convergence_error(pb, a, b, j), want, 1e-12 * std::max(1.0, want));
    }
  }
}

TEST(UpdateBuilding, IteratesStayLocallyFeasible) {
  Rng rng(38);
  for (int k = 0; k < 20; ++k) {
    const auto pb = geb::testing::random_problem(rng, rng.integer(1, 6), rng.integer(2, 16));
    const LocalSets sets(pb);
    ProjectionCache cache(pb);
    auto x = initial_primal(pb, sets);
    SpdsConfig cfg = geb::testing::toy_config();
    for (int it = 0; it < 30; ++it) {
      const auto y = geb::testing::random_dual(rng, pb, 100.0);
      const auto net = evaluate_network(pb, x);
      for (std::size_t j = 0; j < pb.buildings.size(); ++j) {
        update_building(pb, sets, cache, j, net.p_flows, y, cfg, it, x);
      }
      for (std::size_t i = 0; i < pb.evs.size(); ++i) {
        ASSERT_NEAR(pb.dt_hours * x.ev[i].sum(), pb.evs[i].demand, 1e-9);
        ASSERT_GE(x.ev[i].minCoeff(), 0.0);
        ASSERT_LE((x.ev[i] - pb.evs[i].r_max).maxCoeff(), 0.0);
      }
      for (std::size_t i = 0; i < pb.pvs.size(); ++i) {
        ASSERT_GE(x.pv[i].minCoeff(), 0.0);
        ASSERT_LE((x.pv[i] - pb.pvs[i].p_max).maxCoeff(), 0.0);
      }
      for (std::size_t i = 0; i < pb.esss.size(); ++i) {
        ASSERT_LE(sets.ess(i).violation(x.ess[i]), 1e-7);
      }
      for (std::size_t j = 0; j < pb.buildings.size(); ++j) {
        ASSERT_LE(sets.hvac(j).violation(x.hvac[j]), 1e-7);
      }
    }
  }
}

TEST(Spds, ToyFixedPointMatchesProjectedGradient) {
  const auto pb = geb::testing::toy_problem();
  const auto want = oracle::toy_projected_gradient(pb);
  const auto run = run_synchronous(pb, geb::testing::toy_config());
  ASSERT_TRUE(run.converged);
  EXPECT_NEAR(objective_terms(pb, run.primal).total, want.objective, 1e-5);
  EXPECT_LE((run.primal.ess[0] - want.ess).cwiseAbs().maxCoeff(), 1e-5);
}

TEST(Spds, BindingComfortToyMatchesAsShrinkVanishes) {
  geb::testing::ToyOptions o;
  o.nodes = 2;
  o.comfort_upper = 23.2;  // cooling needed late in the horizon
  const auto pb = geb::testing::toy_problem(o);
  const auto want = oracle::toy_projected_gradient(pb);
  ASSERT_GT(want.hvac.maxCoeff(), 0.1);
  auto cfg = geb::testing::toy_config();
  cfg.tau_x = cfg.tau_y = 1.0 - 1e-7;
  const auto run = run_synchronous(pb, cfg);
  ASSERT_TRUE(run.converged);
  EXPECT_NEAR(objective_terms(pb, run.primal).total, want.objective, 1e-5);
}

TEST(ContractionProbe, StartingAtLimitGivesZeroDistances) {
  const auto pb = geb::testing::toy_problem();
  const LocalSets sets(pb);
  const auto cfg = geb::testing::toy_config();
  const auto run = run_synchronous(pb, cfg);
  const auto rep = contraction_probe(pb, sets, run.dual, cfg, 10, 1, 0, &run.primal);
  ASSERT_EQ(rep.distances.size(), 11u);
  for (double d : rep.distances) EXPECT_LE(d, 1e-8);
}

TEST(ContractionProbe, SingleEssQuadraticRate) {
  // No network cost: the ESS sees only 2 delta2 B^T B, whose eigenvalues at
  // T = 2 are 2 delta2 (3 -+ sqrt 5)/2. With alpha/tau = 2/(h_min + h_max)
  // every mode contracts by (h_max - h_min)/(h_max + h_min).
  geb::testing::ToyOptions o;
  o.horizon = 2;
  o.delta2 = 0.05;
  auto pb = geb::testing::toy_problem(o);
  pb.weights.delta1 = 0.0;
  pb.finalize();
  const LocalSets sets(pb);
  auto cfg = geb::testing::toy_config();
  const double h_min = o.delta2 * (3.0 - std::sqrt(5.0));
  const double h_max = o.delta2 * (3.0 + std::sqrt(5.0));
  cfg.alpha.ess = cfg.tau_x * 2.0 / (h_min + h_max);
  const double rho = (h_max - h_min) / (h_max + h_min);

  PrimalState start;
  start.ess = {Trace(2)};
  start.ess[0] << 0.7, -0.4;  // interior, far from the energy window edges
  start.hvac = {Trace::Zero(2)};
  const auto rep = contraction_probe(pb, sets, DualState::zeros(pb), cfg, 20, 1, 0, &start);
  EXPECT_NEAR(rep.ratio, rho * rho, 0.1 * rho * rho);
  EXPECT_TRUE(rep.contracting);
}
