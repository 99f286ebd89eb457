#include "gibbs.hpp"

#include <algorithm>
#include <cmath>

namespace refsel::detail {

bool draw_gaussian_coefs(const Eigen::MatrixXd& XtX, const Eigen::VectorXd& Xty, double sigma2,
                         const Eigen::VectorXd& prior_prec, Engine& eng, Eigen::VectorXd& out) {
  const Eigen::Index q = XtX.rows();
  Eigen::MatrixXd Q = XtX / sigma2;
  Q.diagonal() += prior_prec;
  Eigen::LLT<Eigen::MatrixXd> llt(Q);
  if (llt.info() != Eigen::Success) return false;
  Eigen::VectorXd mean = llt.solve(Xty / sigma2);
  Eigen::VectorXd z(q);
  for (Eigen::Index j = 0; j < q; ++j) z(j) = sample_normal(eng);
  out = mean + llt.matrixU().solve(z);
  return out.allFinite();
}

bool draw_gaussian_coefs_wide(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double sigma2,
                              const Eigen::VectorXd& prior_var, Engine& eng,
                              Eigen::VectorXd& out) {
  const Eigen::Index n = X.rows();
  const Eigen::Index p = X.cols();
  const double s = std::sqrt(sigma2);
  const Eigen::MatrixXd Phi = X / s;
  Eigen::VectorXd u(p), delta(n);
  for (Eigen::Index j = 0; j < p; ++j) u(j) = std::sqrt(prior_var(j)) * sample_normal(eng);
  for (Eigen::Index i = 0; i < n; ++i) delta(i) = sample_normal(eng);
  const Eigen::VectorXd v = Phi * u + delta;
  Eigen::MatrixXd M = Phi * prior_var.asDiagonal() * Phi.transpose();
  M.diagonal().array() += 1.0;
  Eigen::LLT<Eigen::MatrixXd> llt(M);
  if (llt.info() != Eigen::Success) return false;
  const Eigen::VectorXd w = llt.solve(y / s - v);
  out = u + prior_var.asDiagonal() * (Phi.transpose() * w);
  return out.allFinite();
}

std::vector<int> thinning_indices(int draws, int keep) {
  keep = std::clamp(keep, 1, std::max(draws, 1));
  std::vector<int> idx(static_cast<std::size_t>(keep));
  for (int i = 0; i < keep; ++i)
    idx[static_cast<std::size_t>(i)] =
        static_cast<int>((static_cast<long long>(i) * draws) / keep);
  return idx;
}

void update_half_t(Engine& eng, double nu, double A, double shape_add, double rate_add,
                   double& x2, double& a) {
  x2 = sample_inv_gamma(eng, 0.5 * (nu + shape_add), nu / a + rate_add);
  a = sample_inv_gamma(eng, 0.5 * (nu + 1.0), nu / x2 + 1.0 / (A * A));
}

}  // namespace refsel::detail
