#include "geb/param_ident.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <tuple>

#include "geb/errors.hpp"

namespace geb {

namespace {

constexpr int kDim = 10;
using Vec = std::array<double, kDim>;

// R and C are searched in log space; the convection fractions linearly.
constexpr std::array<bool, kDim> kLog = {true, true, true, true, true, true, true,
                                         false, false, false};

Vec to_vec(const RoomThermalParams& p) {
  return {p.c_w, p.c_in, p.c_m, p.r_w1, p.r_w2, p.r_win, p.r_m, p.sp1, p.sp2, p.sp3};
}

RoomThermalParams from_vec(const Vec& v, const RoomThermalParams& fixed) {
  RoomThermalParams p = fixed;
  p.c_w = v[0];
  p.c_in = v[1];
  p.c_m = v[2];
  p.r_w1 = v[3];
  p.r_w2 = v[4];
  p.r_win = v[5];
  p.r_m = v[6];
  p.sp1 = v[7];
  p.sp2 = v[8];
  p.sp3 = v[9];
  return p;
}

double encode(double x, int d) { return kLog[d] ? std::log(x) : x; }
double decode(double y, int d) { return kLog[d] ? std::exp(y) : y; }

}  // namespace

ParamBounds ParamBounds::around(const RoomThermalParams& est, double floor_area_m2) {
  ParamBounds b;
  b.lower = est;
  b.upper = est;
  for (auto [lo, hi, v] : {std::tuple{&b.lower.c_w, &b.upper.c_w, est.c_w},
                           std::tuple{&b.lower.c_in, &b.upper.c_in, est.c_in},
                           std::tuple{&b.lower.r_w1, &b.upper.r_w1, est.r_w1},
                           std::tuple{&b.lower.r_w2, &b.upper.r_w2, est.r_w2},
                           std::tuple{&b.lower.r_win, &b.upper.r_win, est.r_win},
                           std::tuple{&b.lower.r_m, &b.upper.r_m, est.r_m}}) {
    *lo = v / 3.0;
    *hi = 3.0 * v;
  }
  if (floor_area_m2 > 0.0) {
    b.lower.c_m = 100.0 * floor_area_m2;
    b.upper.c_m = 450.0 * floor_area_m2;
  } else {
    b.lower.c_m = est.c_m / 3.0;
    b.upper.c_m = 3.0 * est.c_m;
  }
  b.lower.sp1 = b.lower.sp2 = b.lower.sp3 = 0.0;
  b.upper.sp1 = b.upper.sp2 = b.upper.sp3 = 1.0;
  return b;
}

void ParamBounds::validate() const {
  const Vec lo = to_vec(lower);
  const Vec hi = to_vec(upper);
  for (int d = 0; d < kDim; ++d) {
    if (!std::isfinite(lo[d]) || !std::isfinite(hi[d]) || !(lo[d] < hi[d])) {
      throw InvalidArgument("PSO bounds must be finite with lower < upper (dimension " +
                            std::to_string(d) + ")");
    }
    if (kLog[d] && !(lo[d] > 0.0)) throw InvalidArgument("R and C bounds must be positive");
    if (!kLog[d] && (lo[d] < 0.0 || hi[d] > 1.0)) {
      throw InvalidArgument("convection fraction bounds must lie in [0, 1]");
    }
  }
}

bool ParamBounds::contains(const RoomThermalParams& p) const {
  const Vec lo = to_vec(lower);
  const Vec hi = to_vec(upper);
  const Vec v = to_vec(p);
  for (int d = 0; d < kDim; ++d) {
    if (v[d] < lo[d] || v[d] > hi[d]) return false;
  }
  return true;
}

void PsoConfig::validate() const {
  if (swarm < 10) throw InvalidArgument("PSO swarm must have at least 10 particles");
  if (generations < 0) throw InvalidArgument("PSO generations must be nonnegative");
  if (!(inertia >= 0.0) || !(c1 >= 0.0) || !(c2 >= 0.0)) {
    throw InvalidArgument("PSO coefficients must be nonnegative");
  }
  bounds.validate();
  for (const auto& s : seeds) {
    if (!bounds.contains(s)) throw InvalidArgument("PSO seed particle lies outside the bounds");
  }
}

RmseResult rmse_objective(const RoomThermalParams& candidate, const Trace& reference,
                          const RoomExperiment& in) {
  const auto T = reference.size();
  if (T < 2) throw InvalidArgument("rmse_objective: reference needs at least two samples");
  if (static_cast<Eigen::Index>(in.u.size()) != T) {
    throw InvalidArgument("rmse_objective: HVAC trace length differs from the reference");
  }
  in.weather.validate(T);

  ThermalState s = in.initial;
  double acc = 0.0;
  for (Eigen::Index t = 0; t < T; ++t) {
    s = step_room(candidate, s, in.weather.at(t), in.u[static_cast<std::size_t>(t)], in.dt_hours);
    if (!std::isfinite(s.theta_in) || std::abs(s.theta_in) > 1e4 || !std::isfinite(s.theta_w) ||
        !std::isfinite(s.theta_m)) {
      return {kUnstablePenalty, true};
    }
    const double e = s.theta_in - reference[t];
    acc += e * e;
  }
  return {std::sqrt(acc / static_cast<double>(T - 1)), false};
}

FitResult fit_rc(const Trace& reference, const RoomExperiment& inputs, const PsoConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const RoomThermalParams fixed = cfg.bounds.lower;  // supplies q_ac, q_ihl
  const Vec raw_lo = to_vec(cfg.bounds.lower);
  const Vec raw_hi = to_vec(cfg.bounds.upper);
  Vec lo = raw_lo;
  Vec hi = raw_hi;
  for (int d = 0; d < kDim; ++d) {
    lo[d] = encode(lo[d], d);
    hi[d] = encode(hi[d], d);
  }

  FitResult out;
  auto evaluate = [&](const Vec& y) {
    Vec x;
    for (int d = 0; d < kDim; ++d) x[d] = std::clamp(decode(y[d], d), raw_lo[d], raw_hi[d]);
    const RoomThermalParams p = from_vec(x, fixed);
    ++out.evaluations;
    if (!cfg.bounds.contains(p)) ++out.out_of_bounds_evaluations;
    return std::pair{rmse_objective(p, reference, inputs).value, p};
  };

  const auto n = static_cast<std::size_t>(cfg.swarm);
  std::vector<Vec> pos(n), vel(n), pbest(n);
  std::vector<double> pbest_val(n);
  std::vector<RoomThermalParams> pbest_params(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (int d = 0; d < kDim; ++d) {
      pos[i][d] = lo[d] + unit(rng) * (hi[d] - lo[d]);
      vel[i][d] = (unit(rng) - 0.5) * (hi[d] - lo[d]) * 0.2;
    }
    if (i < cfg.seeds.size()) {
      const Vec s = to_vec(cfg.seeds[i]);
      for (int d = 0; d < kDim; ++d) pos[i][d] = std::clamp(encode(s[d], d), lo[d], hi[d]);
    }
  }

  std::size_t g_idx = 0;
  for (std::size_t i = 0; i < n; ++i) {
    auto [v, p] = evaluate(pos[i]);
    pbest[i] = pos[i];
    pbest_val[i] = v;
    pbest_params[i] = p;
    if (v < pbest_val[g_idx]) g_idx = i;
  }
  Vec gbest = pbest[g_idx];
  double gbest_val = pbest_val[g_idx];
  RoomThermalParams gbest_params = pbest_params[g_idx];
  out.history.push_back(gbest_val);

  for (int gen = 0; gen < cfg.generations; ++gen) {
    for (std::size_t i = 0; i < n; ++i) {
      for (int d = 0; d < kDim; ++d) {
        const double r1 = unit(rng);
        const double r2 = unit(rng);
        vel[i][d] = cfg.inertia * vel[i][d] + cfg.c1 * r1 * (pbest[i][d] - pos[i][d]) +
                    cfg.c2 * r2 * (gbest[d] - pos[i][d]);
        pos[i][d] = std::clamp(pos[i][d] + vel[i][d], lo[d], hi[d]);
      }
    }
    // Evaluations of one generation are independent; the update above is
    // the only ordering point.
    for (std::size_t i = 0; i < n; ++i) {
      auto [v, p] = evaluate(pos[i]);
      if (v < pbest_val[i]) {
        pbest_val[i] = v;
        pbest[i] = pos[i];
        pbest_params[i] = p;
      }
      if (v < gbest_val) {
        gbest_val = v;
        gbest = pos[i];
        gbest_params = p;
      }
    }
    out.history.push_back(gbest_val);
  }
  out.best = gbest_params;
  out.objective = gbest_val;
  return out;
}

AggregateFit fit_aggregate(std::span<const EnsembleRun> runs) {
  std::size_t rows = 0;
  Eigen::Index longest = 0;
  for (const auto& run : runs) {
    const auto T = run.theta_amb.size();
    if (run.rooms.empty()) throw InvalidArgument("fit_aggregate: ensemble run without rooms");
    for (const auto& r : run.rooms) {
      if (r.theta.size() != T + 1 || static_cast<Eigen::Index>(r.u.size()) != T) {
        throw InvalidArgument("fit_aggregate: room trace lengths must be T+1 and T");
      }
    }
    rows += static_cast<std::size_t>(T);
    longest = std::max(longest, T);
  }
  if (rows < static_cast<std::size_t>(3 * longest) || rows < 3) {
    throw InvalidArgument("fit_aggregate: need at least 3T transitions, got " +
                          std::to_string(rows));
  }

  Eigen::MatrixXd A(static_cast<Eigen::Index>(rows), 3);
  Eigen::VectorXd y(static_cast<Eigen::Index>(rows));
  Eigen::Index k = 0;
  for (const auto& run : runs) {
    const double m = static_cast<double>(run.rooms.size());
    for (Eigen::Index t = 0; t < run.theta_amb.size(); ++t, ++k) {
      double now = 0.0, next = 0.0, u = 0.0;
      for (const auto& r : run.rooms) {
        now += r.theta[t];
        next += r.theta[t + 1];
        u += r.u[static_cast<std::size_t>(t)];
      }
      A(k, 0) = now / m;
      A(k, 1) = run.theta_amb[t];
      A(k, 2) = u / m;
      y[k] = next / m;
    }
  }

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
  qr.setThreshold(1e-10);
  if (qr.rank() < 3) {
    throw IdentificationError("fit_aggregate: regressors are rank deficient (rank " +
                              std::to_string(qr.rank()) + " of 3); inputs lack excitation");
  }
  const Eigen::Vector3d coef = qr.solve(y);
  AggregateFit fit;
  fit.a = coef[0];
  fit.b = coef[1];
  fit.g = coef[2];
  fit.samples = rows;
  fit.residual_rmse = std::sqrt((A * coef - y).squaredNorm() / static_cast<double>(rows));
  return fit;
}

}  // namespace geb
