#include "refsel/lasso.hpp"

#include <algorithm>
#include <cmath>

#include "refsel/datagen.hpp"
#include "refsel/errors.hpp"
#include "refsel/linalg.hpp"
#include "refsel/rng.hpp"

namespace refsel {

namespace {

double soft(double z, double g) {
  if (z > g) return z - g;
  if (z < -g) return z + g;
  return 0.0;
}

}  // namespace

double lasso_lambda_max(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  const ColumnScaling sc = ColumnScaling::fit(X);
  const Eigen::MatrixXd Z = sc.apply(X);
  const Eigen::VectorXd yc = y.array() - y.mean();
  return (Z.transpose() * yc).cwiseAbs().maxCoeff() / static_cast<double>(X.rows());
}

Eigen::VectorXd lasso_lambda_grid(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                  int n_lambda, double min_ratio) {
  if (n_lambda < 1) throw ConfigError("lasso.n_lambda must be >= 1");
  if (!(min_ratio > 0.0 && min_ratio < 1.0)) throw ConfigError("lasso.min_ratio must be in (0, 1)");
  const double lmax = X.cols() > 0 ? lasso_lambda_max(X, y) : 0.0;
  Eigen::VectorXd out(n_lambda);
  if (n_lambda == 1) {
    out(0) = lmax;
    return out;
  }
  const double step = std::log(min_ratio) / static_cast<double>(n_lambda - 1);
  for (int l = 0; l < n_lambda; ++l) out(l) = lmax * std::exp(step * l);
  return out;
}

LassoPath lasso_path(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                     const Eigen::VectorXd& lambdas, const LassoOptions& opts) {
  if (X.rows() != y.size()) throw InputError("lasso: row count mismatch");
  for (Index l = 0; l < lambdas.size(); ++l) {
    if (!(lambdas(l) >= 0.0)) throw ConfigError("lasso: lambdas must be non-negative");
    if (l > 0 && lambdas(l) > lambdas(l - 1)) throw ConfigError("lasso: lambdas must be non-increasing");
  }
  const Index n = X.rows();
  const Index p = X.cols();
  const double nd = static_cast<double>(n);
  const ColumnScaling sc = ColumnScaling::fit(X);
  const Eigen::MatrixXd Z = sc.apply(X);
  const double ymean = y.mean();
  Eigen::VectorXd r = y.array() - ymean;
  const double ysd = std::max(std::sqrt(r.squaredNorm() / nd), 1e-300);
  const double tol = std::sqrt(opts.tol) * ysd;

  std::vector<bool> usable(static_cast<std::size_t>(p));
  for (Index j = 0; j < p; ++j) usable[static_cast<std::size_t>(j)] = !sc.constant[static_cast<std::size_t>(j)];

  LassoPath path;
  path.lambdas = lambdas;
  path.coef = Eigen::MatrixXd::Zero(p, lambdas.size());
  path.intercept = Eigen::VectorXd::Constant(lambdas.size(), ymean);
  path.sweeps = Eigen::VectorXi::Zero(lambdas.size());

  Eigen::VectorXd b = Eigen::VectorXd::Zero(p);
  std::vector<bool> active(static_cast<std::size_t>(p), false);

  auto update = [&](Index j, double lam) {
    const double old = b(j);
    const double g = Z.col(j).dot(r) / nd;
    const double nb = soft(old + g, lam);
    const double delta = nb - old;
    if (delta != 0.0) {
      r.noalias() -= delta * Z.col(j);
      b(j) = nb;
    }
    if (nb != 0.0) active[static_cast<std::size_t>(j)] = true;
    return std::abs(delta);
  };

  for (Index l = 0; l < lambdas.size(); ++l) {
    const double lam = lambdas(l);
    int sweeps = 0;
    while (true) {
      // Full sweep, then iterate on the active set until it settles.
      double dmax = 0.0;
      for (Index j = 0; j < p; ++j)
        if (usable[static_cast<std::size_t>(j)]) dmax = std::max(dmax, update(j, lam));
      ++sweeps;
      if (dmax <= tol) break;
      while (sweeps < opts.max_sweeps) {
        double dm = 0.0;
        for (Index j = 0; j < p; ++j)
          if (active[static_cast<std::size_t>(j)]) dm = std::max(dm, update(j, lam));
        ++sweeps;
        if (dm <= tol) break;
      }
      if (sweeps >= opts.max_sweeps)
        throw NumericalError("lasso: coordinate descent did not converge");
    }
    path.sweeps(l) = sweeps;
    double icpt = ymean;
    for (Index j = 0; j < p; ++j) {
      const double bj = b(j) / sc.scale(j);
      path.coef(j, l) = bj;
      icpt -= sc.center(j) * bj;
    }
    path.intercept(l) = icpt;
  }
  return path;
}

LassoFit lasso_cv(const Dataset& d, const LassoConfig& cfg, const ReferenceFit* ref) {
  d.validate();
  if (cfg.folds < 2) throw ConfigError("lasso.folds must be >= 2");
  const Eigen::VectorXd target = ref ? predictive_means(*ref, d.X) : d.y;
  const double min_ratio =
      cfg.min_ratio > 0.0 ? cfg.min_ratio : (d.n() > d.p() ? 1e-4 : 1e-2);
  LassoFit fit;
  const Eigen::VectorXd lambdas = lasso_lambda_grid(d.X, target, cfg.n_lambda, min_ratio);
  fit.path = lasso_path(d.X, target, lambdas, cfg.solver);

  const int K = cfg.folds;
  const std::vector<int> fold_of = make_folds(d.n(), K, derive_seed(cfg.seed, {0xf01d}));
  const Index L = lambdas.size();
  Eigen::MatrixXd fold_mse(K, L);
  for (int k = 0; k < K; ++k) {
    IndexList tr, te;
    for (Index i = 0; i < d.n(); ++i) (fold_of[static_cast<std::size_t>(i)] == k ? te : tr).push_back(i);
    const LassoPath fp = lasso_path(select_rows(d.X, tr), select_rows(target, tr), lambdas, cfg.solver);
    const Eigen::MatrixXd Xte = select_rows(d.X, te);
    const Eigen::VectorXd yte = select_rows(target, te);
    const Eigen::MatrixXd pred = (Xte * fp.coef).rowwise() + fp.intercept.transpose();
    fold_mse.row(k) = (pred.colwise() - yte).colwise().squaredNorm() / static_cast<double>(te.size());
  }
  fit.cv_mean = fold_mse.colwise().mean().transpose();
  fit.cv_se.resize(L);
  for (Index l = 0; l < L; ++l) fit.cv_se(l) = sample_sd(fold_mse.col(l)) / std::sqrt(static_cast<double>(K));

  fit.cv_mean.minCoeff(&fit.min_index);
  fit.chosen = fit.min_index;
  if (cfg.one_se) {
    const double bound = fit.cv_mean(fit.min_index) + fit.cv_se(fit.min_index);
    for (Index l = 0; l <= fit.min_index; ++l)
      if (fit.cv_mean(l) <= bound) {
        fit.chosen = l;
        break;
      }
  }
  for (Index j = 0; j < d.p(); ++j)
    if (fit.path.coef(j, fit.chosen) != 0.0) fit.active.push_back(j);
  return fit;
}

}  // namespace refsel
