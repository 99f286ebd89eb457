#pragma once

#include <Eigen/Dense>

#include <cstdint>

#include "refsel/dataset.hpp"
#include "refsel/refmodel.hpp"

namespace refsel {

struct LassoOptions {
  /// Converged when max_j (change in standardised b_j)^2 <= tol * var(y) over a sweep.
  double tol = 1e-7;
  int max_sweeps = 100000;
};

/// Coefficient path of (1/2n)||y - a - X b||^2 + lambda ||b||_1 on standardised
/// columns. Coefficients are reported on the original scale.
struct LassoPath {
  Eigen::VectorXd lambdas;
  Eigen::MatrixXd coef;       ///< p x L
  Eigen::VectorXd intercept;  ///< L
  Eigen::VectorXi sweeps;     ///< coordinate sweeps used per lambda
};

/// max_j |z_j' (y - mean y)| / n with z_j the standardised columns.
double lasso_lambda_max(const Eigen::MatrixXd& X, const Eigen::VectorXd& y);

Eigen::VectorXd lasso_lambda_grid(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                  int n_lambda, double min_ratio);

LassoPath lasso_path(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                     const Eigen::VectorXd& lambdas, const LassoOptions& opts = {});

struct LassoConfig {
  int folds = 10;
  int n_lambda = 100;
  double min_ratio = 0.0;  ///< 0 picks 1e-4 when n > p, else 1e-2
  bool one_se = true;
  LassoOptions solver;
  std::uint64_t seed = 1;
};

struct LassoFit {
  LassoPath path;
  Eigen::VectorXd cv_mean;  ///< mean held-out squared error per lambda
  Eigen::VectorXd cv_se;
  Index min_index = 0;
  Index chosen = 0;
  IndexList active;

  double chosen_lambda() const { return path.lambdas(chosen); }
};

LassoFit lasso_cv(const Dataset& d, const LassoConfig& cfg, const ReferenceFit* ref = nullptr);

}  // namespace refsel
