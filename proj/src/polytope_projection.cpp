#include "geb/polytope_projection.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "geb/errors.hpp"

namespace geb {

PolytopeProjector::PolytopeProjector(Eigen::VectorXd lo, Eigen::VectorXd hi,
                                     Eigen::MatrixXd rows, Eigen::VectorXd row_lo,
                                     Eigen::VectorXd row_hi, DykstraOptions options)
    : lo_(std::move(lo)),
      hi_(std::move(hi)),
      rows_(std::move(rows)),
      row_lo_(std::move(row_lo)),
      row_hi_(std::move(row_hi)),
      options_(options) {
  const auto n = lo_.size();
  if (hi_.size() != n || rows_.cols() != n || row_lo_.size() != rows_.rows() ||
      row_hi_.size() != rows_.rows()) {
    throw InvalidArgument("PolytopeProjector: inconsistent dimensions");
  }
  if (((hi_ - lo_).array() < 0.0).any() || ((row_hi_ - row_lo_).array() < 0.0).any()) {
    throw InfeasibleSet("PolytopeProjector: a lower bound exceeds its upper bound");
  }
  rows_t_ = rows_.transpose();
  gram_ = rows_ * rows_.transpose();
  // Nonzero spans, so triangular or banded rows cost only their support.
  row_span_.resize(static_cast<std::size_t>(rows_.rows()));
  col_span_.resize(static_cast<std::size_t>(n));
  gram_span_.resize(static_cast<std::size_t>(rows_.rows()));
  auto span_of = [](const auto& v) {
    Eigen::Index first = 0, last = v.size();
    while (first < last && v[first] == 0.0) ++first;
    while (last > first && v[last - 1] == 0.0) --last;
    return std::pair{first, last - first};
  };
  for (Eigen::Index k = 0; k < rows_.rows(); ++k) {
    row_span_[static_cast<std::size_t>(k)] = span_of(rows_t_.col(k));
    gram_span_[static_cast<std::size_t>(k)] = span_of(gram_.col(k));
  }
  for (Eigen::Index i = 0; i < n; ++i) col_span_[static_cast<std::size_t>(i)] = span_of(rows_.col(i));
  row_norm_sq_ = gram_.diagonal();
  for (Eigen::Index k = 0; k < row_norm_sq_.size(); ++k) {
    if (!(row_norm_sq_[k] > 0.0)) throw InvalidArgument("PolytopeProjector: zero constraint row");
  }
}

double PolytopeProjector::violation(const Eigen::VectorXd& x) const {
  double v = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    v = std::max({v, lo_[i] - x[i], x[i] - hi_[i]});
  }
  const Eigen::VectorXd ax = rows_ * x;
  for (Eigen::Index k = 0; k < ax.size(); ++k) {
    v = std::max({v, row_lo_[k] - ax[k], ax[k] - row_hi_[k]});
  }
  return v;
}

Eigen::VectorXd PolytopeProjector::project(const Eigen::VectorXd& z,
                                           DykstraWarmStart* warm) const {
  const auto n = lo_.size();
  const auto m = rows_.rows();
  if (z.size() != n) throw InvalidArgument("PolytopeProjector::project: dimension mismatch");

  DykstraWarmStart local;
  DykstraWarmStart& st = warm ? *warm : local;
  if (st.box_correction.size() != n || st.row_coeff.size() != m) {
    st.box_correction = Eigen::VectorXd::Zero(n);
    st.row_coeff = Eigen::VectorXd::Zero(m);
  }

  // Invariant: x = z - box_correction - rows^T * row_coeff.
  Eigen::VectorXd x = z - st.box_correction - rows_t_ * st.row_coeff;
  Eigen::VectorXd ax = rows_ * x;
  Eigen::VectorXd sweep_start(n);

  for (int sweep = 0; sweep < options_.max_sweeps; ++sweep) {
    sweep_start = x;

    for (Eigen::Index i = 0; i < n; ++i) {
      const double y = x[i] + st.box_correction[i];
      const double clipped = std::clamp(y, lo_[i], hi_[i]);
      st.box_correction[i] = y - clipped;
      const double dx = clipped - x[i];
      if (dx != 0.0) {
        x[i] = clipped;
        const auto [b, len] = col_span_[static_cast<std::size_t>(i)];
        ax.segment(b, len).noalias() += dx * rows_.col(i).segment(b, len);
      }
    }

    for (Eigen::Index k = 0; k < m; ++k) {
      const double c_old = st.row_coeff[k];
      const double s = ax[k] + c_old * row_norm_sq_[k];
      double c_new = 0.0;
      if (s > row_hi_[k]) {
        c_new = (s - row_hi_[k]) / row_norm_sq_[k];
      } else if (s < row_lo_[k]) {
        c_new = (s - row_lo_[k]) / row_norm_sq_[k];
      }
      if (c_new != c_old) {
        const double step = c_old - c_new;
        const auto [rb, rlen] = row_span_[static_cast<std::size_t>(k)];
        x.segment(rb, rlen).noalias() += step * rows_t_.col(k).segment(rb, rlen);
        const auto [gb, glen] = gram_span_[static_cast<std::size_t>(k)];
        ax.segment(gb, glen).noalias() += step * gram_.col(k).segment(gb, glen);
        st.row_coeff[k] = c_new;
      }
    }

    const double moved = (x - sweep_start).cwiseAbs().maxCoeff();
    if (moved < options_.move_tol) {
      // Refresh A*x to shed accumulated drift before judging feasibility.
      ax.noalias() = rows_ * x;
      double viol = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) viol = std::max({viol, lo_[i] - x[i], x[i] - hi_[i]});
      for (Eigen::Index k = 0; k < m; ++k) {
        viol = std::max({viol, row_lo_[k] - ax[k], ax[k] - row_hi_[k]});
      }
      // x can leave and come back within one sweep, so a still x alone is no
      // proof. Every live correction must also sit on its own constraint.
      const double slack_tol = std::max(options_.move_tol, options_.feas_tol);
      double slack = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        const double c = st.box_correction[i];
        if (std::abs(c) > options_.move_tol) slack = std::max(slack, std::abs(x[i] - (c > 0 ? hi_[i] : lo_[i])));
      }
      for (Eigen::Index k = 0; k < m; ++k) {
        const double norm = std::sqrt(row_norm_sq_[k]);
        const double c = st.row_coeff[k];
        if (std::abs(c) * norm > options_.move_tol) {
          slack = std::max(slack, std::abs(ax[k] - (c > 0 ? row_hi_[k] : row_lo_[k])) / norm);
        }
      }
      if (viol <= options_.feas_tol && slack <= slack_tol) return x;
    }
  }
  throw ConvergenceFailure("Dykstra projection exceeded " + std::to_string(options_.max_sweeps) +
                           " sweeps");
}

}  // namespace geb
