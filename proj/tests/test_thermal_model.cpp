#include <gtest/gtest.h>

#include <cmath>

#include "fixtures.hpp"
#include "geb/errors.hpp"
#include "geb/thermal_model.hpp"
#include "oracles.hpp"

using namespace geb;
using geb::testing::Rng;

namespace {

RoomThermalParams random_params(Rng& rng) {
  RoomThermalParams p;
  p.c_w = rng.uniform(2000, 20000);
  p.c_in = rng.uniform(500, 5000);
  p.c_m = rng.uniform(5000, 40000);
  p.r_w1 = rng.uniform(1, 20);
  p.r_w2 = rng.uniform(1, 20);
  p.r_win = rng.uniform(5, 50);
  p.r_m = rng.uniform(1, 20);
  p.sp1 = rng.uniform(0, 1);
  p.sp2 = rng.uniform(0, 1);
  p.sp3 = rng.uniform(0, 1);
  p.q_ac = rng.uniform(-8, 0);
  p.q_ihl = rng.uniform(0, 2);
  return p;
}

AggregateBuildingModel shipped_model() { return {0.98, 0.02, -0.2, 20, 1.0, 21.0}; }

}  // namespace

TEST(StepRoom, EquilibriumIsFixedPoint) {
  Rng rng(1);
  auto p = random_params(rng);
  p.q_ihl = 0.0;
  const ThermalState s{27.0, 27.0, 27.0};
  const auto n = step_room(p, s, {27.0, 27.0, 0.0}, 0, 0.25);
  EXPECT_DOUBLE_EQ(n.theta_w, 27.0);
  EXPECT_DOUBLE_EQ(n.theta_in, 27.0);
  EXPECT_DOUBLE_EQ(n.theta_m, 27.0);
}

TEST(StepRoom, MatchesHandExpansionOnRandomDraws) {
  Rng rng(2);
  for (int k = 0; k < 1000; ++k) {
    const auto p = random_params(rng);
    const ThermalState s{rng.uniform(15, 40), rng.uniform(15, 30), rng.uniform(15, 30)};
    const StepWeather w{rng.uniform(10, 40), rng.uniform(10, 60), rng.uniform(0, 3)};
    const int u = rng.integer(0, 1);
    const double dt = rng.uniform(0.01, 0.5);
    const auto got = step_room(p, s, w, u, dt);
    const auto want = oracle::room_step(p, s, w.theta_amb, w.theta_sol_w, w.q_solar, u, dt);
    ASSERT_NEAR(got.theta_w, want.theta_w, 1e-12 * std::max(1.0, std::abs(want.theta_w)));
    ASSERT_NEAR(got.theta_in, want.theta_in, 1e-12 * std::max(1.0, std::abs(want.theta_in)));
    ASSERT_NEAR(got.theta_m, want.theta_m, 1e-12 * std::max(1.0, std::abs(want.theta_m)));
  }
}

TEST(StepRoom, CoolingDifferenceIsExact) {
  Rng rng(3);
  auto p = random_params(rng);
  p.q_ac = -5.0;
  p.sp1 = 1.0;
  const ThermalState s{30.0, 24.0, 23.0};
  const StepWeather w{31.0, 35.0, 0.4};
  const double dt = 0.25;
  const auto on = step_room(p, s, w, 1, dt);
  const auto off = step_room(p, s, w, 0, dt);
  EXPECT_NEAR(on.theta_in - off.theta_in, dt * 3600.0 * p.sp1 * p.q_ac / p.c_in, 1e-12);
  EXPECT_NEAR(on.theta_m, off.theta_m, 1e-12);  // (1 - sp1) = 0
}

TEST(StepRoom, RejectsBadInputs) {
  Rng rng(4);
  const auto p = random_params(rng);
  const ThermalState s{25, 25, 25};
  EXPECT_THROW(step_room(p, s, {25, 25, 0}, 0, 0.0), InvalidArgument);
  EXPECT_THROW(step_room(p, s, {25, 25, 0}, 0, -1.0), InvalidArgument);
  EXPECT_THROW(step_room(p, s, {NAN, 25, 0}, 0, 0.25), InvalidArgument);
  EXPECT_THROW(step_room(p, {NAN, 25, 25}, {25, 25, 0}, 0, 0.25), InvalidArgument);
  EXPECT_THROW(step_room(p, s, {25, 25, 0}, 2, 0.25), InvalidArgument);
}

TEST(StepRoom, SimulateRoomChainsSteps) {
  Rng rng(5);
  const auto p = random_params(rng);
  WeatherTrace w{rng.vector(6, 20, 35), rng.vector(6, 20, 50), rng.vector(6, 0, 1)};
  const std::vector<int> u{1, 0, 1, 1, 0, 0};
  const auto traj = simulate_room(p, {26, 25, 24}, w, u, 0.25);
  ASSERT_EQ(traj.size(), 7u);
  ThermalState s{26, 25, 24};
  for (int t = 0; t < 6; ++t) {
    s = oracle::room_step(p, s, w.theta_amb[t], w.theta_sol_w[t], w.q_solar[t], u[t], 0.25);
    EXPECT_NEAR(traj[t + 1].theta_in, s.theta_in, 1e-10);
  }
}

TEST(StepAggregate, ShippedCoefficientsExample) {
  EXPECT_NEAR(step_aggregate(shipped_model(), 22.0, 30.0, 0.5), 22.06, 1e-12);
}

TEST(StepAggregate, HomogeneousDecayAndEquilibrium) {
  AggregateBuildingModel m{0.9, 0.0, -0.3, 1, 1.0, 20.0};
  EXPECT_DOUBLE_EQ(step_aggregate(m, 25.0, 40.0, 0.0), 0.9 * 25.0);
  AggregateBuildingModel e{0.7, 0.3, -1.0, 1, 1.0, 20.0};
  EXPECT_NEAR(step_aggregate(e, 24.0, 24.0, 0.0), 24.0, 1e-12);
}

TEST(StepAggregate, RejectsFractionOutsideUnitInterval) {
  EXPECT_THROW(step_aggregate(shipped_model(), 22, 30, -0.1), InvalidArgument);
  EXPECT_THROW(step_aggregate(shipped_model(), 22, 30, 1.1), InvalidArgument);
}

TEST(SimulateAggregate, SingleStep) {
  const auto m = shipped_model();
  const auto tr = simulate_aggregate(m, Trace::Constant(1, 30.0), Trace::Constant(1, 0.25));
  ASSERT_EQ(tr.size(), 1);
  EXPECT_DOUBLE_EQ(tr[0], step_aggregate(m, m.theta0, 30.0, 0.25));
}

TEST(SimulateAggregate, ConvergesToFixedPoint) {
  auto m = shipped_model();
  const Eigen::Index T = 2000;
  const auto tr = simulate_aggregate(m, Trace::Constant(T, 30.0), Trace::Ones(T));
  EXPECT_NEAR(tr[T - 1], (0.02 * 30.0 - 0.2) / 0.02, 1e-9);  // = 20
  // geometric approach: distance shrinks by a every step
  const double fp = 20.0;
  for (Eigen::Index t = 1; t < 50; ++t) {
    EXPECT_NEAR(tr[t] - fp, m.a * (tr[t - 1] - fp), 1e-12);
  }
}

TEST(SimulateAggregate, LengthMismatchThrows) {
  EXPECT_THROW(simulate_aggregate(shipped_model(), Trace::Constant(3, 30.0), Trace::Ones(4)),
               InvalidArgument);
}

TEST(ComfortMatrices, SingleStep) {
  const auto m = shipped_model();
  const auto map = comfort_constraint_matrices(m, Trace::Constant(1, 30.0), 1);
  ASSERT_EQ(map.M.rows(), 1);
  EXPECT_DOUBLE_EQ(map.M(0, 0), m.g);
  EXPECT_NEAR(map.c[0], m.a * m.theta0 + m.b * 30.0, 1e-12);
}

TEST(ComfortMatrices, AgreesWithRecursionOnRandomTraces) {
  Rng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    AggregateBuildingModel m{rng.uniform(0.5, 0.999), rng.uniform(0, 0.5), rng.uniform(-2, 0.5),
                             rng.integer(1, 30), 1.0, rng.uniform(18, 26)};
    const Eigen::Index T = rng.integer(1, 96);
    const Trace amb = rng.vector(T, 15, 40);
    const auto map = comfort_constraint_matrices(m, amb, T);
    for (Eigen::Index s = 0; s < T; ++s) {
      for (Eigen::Index t = 0; t < T; ++t) {
        if (t < s) ASSERT_EQ(map.M(t, s), 0.0);
      }
    }
    for (int k = 0; k < 10; ++k) {
      const Trace u = rng.vector(T, 0, 1);
      const Trace want = simulate_aggregate(m, amb, u);
      ASSERT_LE((map.M * u + map.c - want).cwiseAbs().maxCoeff(), 1e-10);
    }
  }
}

TEST(ComfortMatrices, ZeroGainGivesZeroMatrix) {
  AggregateBuildingModel m{0.9, 0.1, 0.0, 1, 1.0, 20};
  const auto map = comfort_constraint_matrices(m, Trace::Constant(5, 25.0), 5);
  EXPECT_EQ(map.M.cwiseAbs().maxCoeff(), 0.0);
}

TEST(ComfortFeasible, DetectsReachability) {
  const auto m = shipped_model();
  ComfortBand ok{Trace::Constant(8, 20.0), Trace::Constant(8, 22.5)};
  EXPECT_TRUE(comfort_feasible(m, Trace::Constant(8, 30.0), ok));
  // Cooling at full power cannot pull 21 °C below 20.5 in one step.
  ComfortBand cold{Trace::Constant(1, 10.0), Trace::Constant(1, 11.0)};
  EXPECT_FALSE(comfort_feasible(m, Trace::Constant(1, 30.0), cold));
}

TEST(DispatchPriority, Extremes) {
  AggregateBuildingModel m{0.98, 0.02, -0.2, 5, 1.0, 21};
  const std::vector<double> temps{21, 22, 23, 20, 24};
  const auto off = dispatch_priority(m, 0.0, temps, 21.25);
  EXPECT_EQ(off.n_on(), 0);
  const auto on = dispatch_priority(m, 1.0, temps, 21.25);
  EXPECT_EQ(on.n_on(), 5);
  EXPECT_DOUBLE_EQ(on.u_frac, 1.0);
}

TEST(DispatchPriority, HandSortedExample) {
  AggregateBuildingModel m{0.98, 0.02, -0.2, 4, 1.0, 21};
  const auto d = dispatch_priority(m, 0.5, std::vector<double>{23, 21, 22.5, 20}, 21.25);
  // One-based rooms 1 and 3 are On.
  EXPECT_EQ(d.on_off, (std::vector<std::uint8_t>{1, 0, 1, 0}));
  EXPECT_DOUBLE_EQ(d.u_frac, 0.5);
}

TEST(DispatchPriority, TiesGoToLowerIndex) {
  AggregateBuildingModel m{0.98, 0.02, -0.2, 4, 1.0, 21};
  const auto d = dispatch_priority(m, 0.5, std::vector<double>{22, 22, 22, 22}, 21.25);
  EXPECT_EQ(d.on_off, (std::vector<std::uint8_t>{1, 1, 0, 0}));
}

TEST(DispatchPriority, CountIsRoundedFractionProperty) {
  Rng rng(7);
  for (int k = 0; k < 500; ++k) {
    AggregateBuildingModel m{0.98, 0.02, -0.2, rng.integer(1, 40), rng.uniform(0.5, 3), 21};
    const double u = rng.uniform(0, 1);
    std::vector<double> temps(static_cast<std::size_t>(m.n_hvac));
    for (auto& t : temps) t = rng.uniform(18, 26);
    const auto d = dispatch_priority(m, u, temps, 21.25);
    ASSERT_EQ(d.n_on(), static_cast<int>(std::round(m.n_hvac * u)));
    ASSERT_NEAR(d.u_frac * m.n_hvac * m.p_rated, d.n_on() * m.p_rated, 1e-12);
    // every On room is at least as hot as every Off room
    double coolest_on = 1e9, hottest_off = -1e9;
    for (std::size_t r = 0; r < temps.size(); ++r) {
      if (d.on_off[r]) coolest_on = std::min(coolest_on, temps[r]);
      else hottest_off = std::max(hottest_off, temps[r]);
    }
    ASSERT_GE(coolest_on, hottest_off);
  }
}

TEST(DispatchPriority, HalfRoundsAwayFromZero) {
  AggregateBuildingModel m{0.98, 0.02, -0.2, 5, 1.0, 21};
  const auto d = dispatch_priority(m, 0.5, std::vector<double>{21, 21, 21, 21, 21}, 21);
  EXPECT_EQ(d.n_on(), 3);
}

TEST(DispatchPriority, RoomCountMismatchThrows) {
  AggregateBuildingModel m{0.98, 0.02, -0.2, 3, 1.0, 21};
  EXPECT_THROW(dispatch_priority(m, 0.5, std::vector<double>{21, 22}, 21), InvalidArgument);
}

TEST(Validation, ParamsAndModels) {
  RoomThermalParams p;
  EXPECT_THROW(p.validate(), InvalidArgument);
  AggregateBuildingModel bad{1.0, 0.0, -0.2, 1, 1.0, 20};
  EXPECT_THROW(bad.validate(), InvalidArgument);
  AggregateBuildingModel none{0.9, 0.1, -0.2, 0, 1.0, 20};
  EXPECT_THROW(none.validate(), InvalidArgument);
  ComfortBand inverted{Trace::Constant(2, 23.0), Trace::Constant(2, 22.0)};
  EXPECT_THROW(inverted.validate(2), InvalidArgument);
}
