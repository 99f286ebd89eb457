#pragma once

#include <Eigen/Dense>

#include <vector>

#include "refsel/dataset.hpp"

namespace refsel {

/// Per-column centre and scale. Scale uses the 1/n convention; constant
/// columns get scale 1 and are reported in `constant`.
struct ColumnScaling {
  Eigen::VectorXd center;
  Eigen::VectorXd scale;
  std::vector<bool> constant;

  static ColumnScaling fit(const Eigen::MatrixXd& X);
  Eigen::MatrixXd apply(const Eigen::MatrixXd& X) const;
};

/// Pearson correlation of every column of X with y. Constant columns (or a
/// constant y) give 0.
Eigen::VectorXd column_correlations(const Eigen::MatrixXd& X, const Eigen::VectorXd& y);

double sample_sd(const Eigen::VectorXd& v);

/// Orthonormal basis grown one column at a time by Gram-Schmidt with
/// re-orthogonalisation. Keeps A = Q R for the accepted columns so that
/// least-squares fits on any prefix of the columns are cheap.
class NestedBasis {
 public:
  NestedBasis(Index n, bool intercept, Index capacity = 0);

  /// Appends x; returns false (and stores nothing) when x lies in the span
  /// of the current basis to relative tolerance `tol`.
  bool add(const Eigen::VectorXd& x, double tol = 1e-10);

  Index size() const { return m_; }
  Index rows() const { return n_; }
  /// First size() columns are valid.
  Eigen::Ref<const Eigen::MatrixXd> q() const { return Q_.leftCols(m_); }
  Eigen::Ref<const Eigen::MatrixXd> r() const { return R_.topLeftCorner(m_, m_); }

 private:
  void reserve(Index cols);

  Index n_;
  Index m_ = 0;
  Eigen::MatrixXd Q_;
  Eigen::MatrixXd R_;
};

double log_sum_exp(const Eigen::Ref<const Eigen::VectorXd>& v);

}  // namespace refsel
