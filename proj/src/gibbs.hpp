#pragma once

#include <Eigen/Dense>

#include <vector>

#include "refsel/rng.hpp"

namespace refsel::detail {

/// Draw from N(Q^{-1} b, Q^{-1}) with Q = XtX / sigma2 + diag(prior_prec),
/// b = Xty / sigma2. Returns false if Q is not numerically positive definite.
bool draw_gaussian_coefs(const Eigen::MatrixXd& XtX, const Eigen::VectorXd& Xty, double sigma2,
                         const Eigen::VectorXd& prior_prec, Engine& eng, Eigen::VectorXd& out);

/// Same target for wide designs (columns > rows), using the data-augmentation
/// sampler of Bhattacharya, Chakraborty and Mallick; cost O(n^2 p).
bool draw_gaussian_coefs_wide(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double sigma2,
                              const Eigen::VectorXd& prior_var, Engine& eng,
                              Eigen::VectorXd& out);

/// `keep` evenly spaced indices in [0, draws).
std::vector<int> thinning_indices(int draws, int keep);

/// x ~ half-t_nu(0, A) written as x^2 | a ~ IG(nu/2, nu/a), a ~ IG(1/2, 1/A^2).
/// Updates (x2, a) given the sufficient statistic of the level below:
/// `shape_add` extra shape and `rate_add` extra rate for x2.
void update_half_t(Engine& eng, double nu, double A, double shape_add, double rate_add,
                   double& x2, double& a);

}  // namespace refsel::detail
