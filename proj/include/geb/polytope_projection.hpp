#pragma once

#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace geb {

// Dykstra correction terms of one projector, reusable across calls on nearby
// points. Dykstra is block coordinate ascent on the dual of the projection
// problem, so any stored correction set is a valid starting point.
struct DykstraWarmStart {
  Eigen::VectorXd box_correction;
  Eigen::VectorXd row_coeff;  // row corrections are row_coeff[k] * a_k

  bool empty() const { return box_correction.size() == 0; }
  void clear() {
    box_correction.resize(0);
    row_coeff.resize(0);
  }
};

struct DykstraOptions {
  double move_tol = 1e-9;     // max-norm change between sweeps
  double feas_tol = 1e-9;     // max constraint violation at exit
  int max_sweeps = 10000;
};

// Euclidean projection onto {lo <= x <= hi} ∩ {row_lo <= A x <= row_hi} by
// Dykstra's alternating projections, one set per slab row plus the box.
// Keeps A*x updated incrementally through the row Gram matrix, so a sweep
// costs O(n) plus O(n) per row or box entry that actually moves.
class PolytopeProjector {
 public:
  PolytopeProjector() = default;
  PolytopeProjector(Eigen::VectorXd lo, Eigen::VectorXd hi, Eigen::MatrixXd rows,
                    Eigen::VectorXd row_lo, Eigen::VectorXd row_hi,
                    DykstraOptions options = {});

  Eigen::VectorXd project(const Eigen::VectorXd& z, DykstraWarmStart* warm = nullptr) const;

  /// Largest violation of any box or row constraint at x.
  double violation(const Eigen::VectorXd& x) const;

  Eigen::Index dim() const { return lo_.size(); }
  const Eigen::VectorXd& lo() const { return lo_; }
  const Eigen::VectorXd& hi() const { return hi_; }
  const Eigen::MatrixXd& rows() const { return rows_; }
  const Eigen::VectorXd& row_lo() const { return row_lo_; }
  const Eigen::VectorXd& row_hi() const { return row_hi_; }
  const DykstraOptions& options() const { return options_; }

 private:
  Eigen::VectorXd lo_, hi_;
  Eigen::MatrixXd rows_;
  Eigen::VectorXd row_lo_, row_hi_;
  Eigen::MatrixXd rows_t_;
  Eigen::MatrixXd gram_;
  // (first, length) of the nonzero range of each row, column and Gram column.
  std::vector<std::pair<Eigen::Index, Eigen::Index>> row_span_, col_span_, gram_span_;
  Eigen::VectorXd row_norm_sq_;
  DykstraOptions options_;
};

}  // namespace geb
