#include "refsel/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "refsel/datagen.hpp"
#include "refsel/errors.hpp"
#include "refsel/linalg.hpp"
#include "refsel/rng.hpp"
#include "refsel/stats.hpp"

namespace refsel {

OlsFit ols_fit(const Eigen::MatrixXd& X_sub, const Eigen::VectorXd& y) {
  if (X_sub.rows() != y.size()) throw InputError("ols_fit: row count mismatch");
  OlsFit fit;
  fit.beta = Eigen::VectorXd::Zero(X_sub.cols());
  if (X_sub.cols() == 0) {
    fit.rss = y.squaredNorm();
    return fit;
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X_sub.rows(), X_sub.cols());
  qr.setThreshold(1e-10);
  qr.compute(X_sub);
  const Index rank = qr.rank();
  if (rank == 0) throw NumericalError("ols_fit: every column was dropped as degenerate");
  const auto& perm = qr.colsPermutation().indices();
  if (rank == X_sub.cols()) {
    fit.beta = qr.solve(y);
  } else {
    IndexList keep;
    for (Index k = 0; k < rank; ++k) keep.push_back(perm(k));
    for (Index k = rank; k < X_sub.cols(); ++k) fit.dropped.push_back(perm(k));
    std::sort(keep.begin(), keep.end());
    std::sort(fit.dropped.begin(), fit.dropped.end());
    const Eigen::VectorXd b = select_columns(X_sub, keep).householderQr().solve(y);
    for (std::size_t k = 0; k < keep.size(); ++k) fit.beta(keep[k]) = b(static_cast<Index>(k));
  }
  fit.df = rank;
  fit.rss = (y - X_sub * fit.beta).squaredNorm();
  return fit;
}

bool AicScore::operator<(const AicScore& o) const {
  if (perfect_fit && o.perfect_fit) return n_params < o.n_params;
  if (perfect_fit != o.perfect_fit) return perfect_fit;
  return value < o.value;
}

AicScore aic(double rss, Index n, Index n_params) {
  if (n <= 0) throw ConfigError("aic: n must be positive");
  if (rss < 0) throw ConfigError("aic: RSS must be non-negative");
  AicScore s;
  s.n_params = n_params;
  if (rss == 0.0) {
    s.perfect_fit = true;
    s.value = -std::numeric_limits<double>::infinity();
    return s;
  }
  const double nd = static_cast<double>(n);
  s.value = nd * std::log(rss / nd) + 2.0 * static_cast<double>(n_params);
  return s;
}

void StepConfig::validate() const {
  if (max_steps < 1) throw ConfigError("step.max_steps must be >= 1");
}

Eigen::VectorXd StepResult::predict(const Eigen::MatrixXd& X_full) const {
  Eigen::VectorXd out = Eigen::VectorXd::Constant(X_full.rows(), coef(0));
  for (std::size_t j = 0; j < selected.size(); ++j)
    out += coef(static_cast<Index>(j) + 1) * X_full.col(selected[j]);
  return out;
}

namespace {

Eigen::MatrixXd design_with_intercept(const Eigen::MatrixXd& X, const IndexList& cols) {
  Eigen::MatrixXd A(X.rows(), static_cast<Index>(cols.size()) + 1);
  A.col(0).setOnes();
  for (std::size_t j = 0; j < cols.size(); ++j) A.col(static_cast<Index>(j) + 1) = X.col(cols[j]);
  return A;
}

// Columns that stay linearly independent of each other and of the intercept,
// by pivoted QR on the centred columns. At most n - 1 survive.
IndexList independent_columns(const Eigen::MatrixXd& X, const IndexList& cols) {
  if (cols.empty()) return cols;
  Eigen::MatrixXd C = select_columns(X, cols);
  C.rowwise() -= C.colwise().mean();
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(C.rows(), C.cols());
  qr.setThreshold(1e-10);
  qr.compute(C);
  const auto& perm = qr.colsPermutation().indices();
  IndexList keep;
  for (Index k = 0; k < qr.rank(); ++k) keep.push_back(cols[static_cast<std::size_t>(perm(k))]);
  return sorted_unique(keep);
}

StepResult step_backward(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, int max_steps,
                         const std::function<AicScore(double, Index)>& score) {
  StepResult res;
  // Aliased columns leave the fit unchanged; remove them before scoring drops.
  IndexList cur = independent_columns(X, iota_indices(X.cols()));
  for (int step = 0; step <= max_steps; ++step) {
    Eigen::MatrixXd A = design_with_intercept(X, cur);
    OlsFit fit = ols_fit(A, y);
    while (!fit.dropped.empty()) {
      IndexList drop;
      for (Index c : fit.dropped)
        if (c > 0) drop.push_back(cur[static_cast<std::size_t>(c - 1)]);
      if (drop.empty()) drop.push_back(cur.back());  // only the intercept was flagged
      cur = set_difference(cur, drop);
      A = design_with_intercept(X, cur);
      fit = ols_fit(A, y);
    }
    const Index q = A.cols();
    const AicScore current = score(fit.rss, q);
    if (res.aic_trace.empty()) res.aic_trace.push_back(current);
    if (cur.empty() || step == max_steps) break;

    Eigen::HouseholderQR<Eigen::MatrixXd> qr(A);
    const Eigen::MatrixXd R = qr.matrixQR().topLeftCorner(q, q).triangularView<Eigen::Upper>();
    const Eigen::MatrixXd Rinv =
        R.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(q, q));
    const Eigen::VectorXd vdiag = Rinv.rowwise().squaredNorm();

    AicScore best;
    Index best_pos = -1;
    for (Index k = 1; k < q; ++k) {
      const double beta = fit.beta(k);
      const AicScore s = score(fit.rss + beta * beta / vdiag(k), q - 1);
      if (best_pos < 0 || s < best) {
        best = s;
        best_pos = k;
      }
    }
    if (best_pos < 0 || !(best < current)) break;
    cur.erase(cur.begin() + (best_pos - 1));
    res.aic_trace.push_back(best);
  }
  res.selected = cur;
  return res;
}

StepResult step_forward(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, int max_steps,
                        const std::function<AicScore(double, Index)>& score) {
  StepResult res;
  const Index n = X.rows();
  const Index p = X.cols();
  Eigen::VectorXd r = y.array() - y.mean();
  double rss = r.squaredNorm();
  Eigen::MatrixXd Xr = X.rowwise() - X.colwise().mean();
  const Eigen::VectorXd orig_norm2 = X.colwise().squaredNorm().transpose();
  std::vector<bool> in(static_cast<std::size_t>(p), false);
  IndexList cur;
  AicScore current = score(rss, 1);
  res.aic_trace.push_back(current);

  for (int step = 0; step < max_steps && static_cast<Index>(cur.size()) < std::min(p, n - 2);
       ++step) {
    AicScore best;
    Index best_j = -1;
    const Eigen::VectorXd g = Xr.transpose() * r;
    for (Index j = 0; j < p; ++j) {
      if (in[static_cast<std::size_t>(j)]) continue;
      const double nrm2 = Xr.col(j).squaredNorm();
      if (!(nrm2 > 1e-20 * std::max(1.0, orig_norm2(j)))) continue;
      const double rss_j = std::max(0.0, rss - g(j) * g(j) / nrm2);
      const AicScore s = score(rss_j, static_cast<Index>(cur.size()) + 2);
      if (best_j < 0 || s < best) {
        best = s;
        best_j = j;
      }
    }
    if (best_j < 0 || !(best < current)) break;
    const Eigen::VectorXd qv = Xr.col(best_j) / Xr.col(best_j).norm();
    r -= qv * qv.dot(r);
    Xr -= qv * (qv.transpose() * Xr);
    rss = r.squaredNorm();
    in[static_cast<std::size_t>(best_j)] = true;
    cur.push_back(best_j);
    current = best;
    res.aic_trace.push_back(best);
  }
  res.selected = sorted_unique(cur);
  return res;
}

}  // namespace

StepResult steplm(const Dataset& d, const StepConfig& cfg, const ReferenceFit* ref) {
  cfg.validate();
  d.validate();
  Eigen::VectorXd target = d.y;
  if (cfg.use_reference) {
    if (!ref) throw ConfigError("steplm: use_reference requires a reference fit");
    target = predictive_means(*ref, d.X);
  }
  const Index n = d.n();
  const double tss = (target.array() - target.mean()).square().sum();
  // Residual sums below this are rounding noise around an exact fit.
  const double exact_tol = 1e-10 * std::max(tss, std::numeric_limits<double>::min());
  auto score = [&](double rss, Index k) { return aic(rss <= exact_tol ? 0.0 : rss, n, k); };

  StepResult res = cfg.direction == StepDirection::Backward
                       ? step_backward(d.X, target, cfg.max_steps, score)
                       : step_forward(d.X, target, cfg.max_steps, score);
  const OlsFit fit = ols_fit(design_with_intercept(d.X, res.selected), target);
  res.coef = fit.beta;
  return res;
}

BayesPValue bayes_pvalue(const Eigen::Ref<const Eigen::VectorXd>& draws) {
  const Index S = draws.size();
  if (S < 100) throw ConfigError("bayes_pvalue needs at least 100 draws");
  const Index nonpos = (draws.array() <= 0.0).count();
  const Index m = std::min(nonpos, S - nonpos);
  BayesPValue pv;
  if (m == 0) {
    pv.value = 1.0 / static_cast<double>(S);
    pv.below_resolution = true;
  } else {
    pv.value = static_cast<double>(m) / static_cast<double>(S);
  }
  return pv;
}

Eigen::VectorXd BayesStepResult::predict(const Eigen::MatrixXd& X_full) const {
  return predictive_means(final_fit, select_columns(X_full, selected));
}

double rhs_kfold_elpd(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const IndexList& cols,
                      const std::vector<int>& fold_of, int K, const PriorConfig& prior,
                      const McmcConfig& mcmc) {
  const Eigen::MatrixXd Xs = select_columns(X, cols);
  double total = 0.0;
  for (int k = 0; k < K; ++k) {
    IndexList tr, te;
    for (Index i = 0; i < X.rows(); ++i) (fold_of[static_cast<std::size_t>(i)] == k ? te : tr).push_back(i);
    if (te.empty()) continue;
    McmcConfig m = mcmc;
    m.seed = derive_seed(mcmc.seed, {static_cast<std::uint64_t>(k)});
    const ReferenceFit fit = fit_rhs_regression(select_rows(Xs, tr), select_rows(y, tr), prior, m);
    const Eigen::MatrixXd mu = predictive_mean_draws(fit, select_rows(Xs, te));  // S x nte
    Eigen::VectorXd lp(fit.n_draws());
    for (std::size_t t = 0; t < te.size(); ++t) {
      const double yt = y(te[t]);
      for (Index s = 0; s < fit.n_draws(); ++s)
        lp(s) = log_normal_density(yt, mu(s, static_cast<Index>(t)), fit.sigma_draws(s));
      total += log_sum_exp(lp) - std::log(static_cast<double>(fit.n_draws()));
    }
  }
  return total;
}

BayesStepResult bayes_stepwise(const Dataset& d, const BayesStepConfig& cfg,
                               const ReferenceFit* ref) {
  d.validate();
  if (cfg.folds < 2) throw ConfigError("bayes_step.folds must be >= 2");
  const Eigen::VectorXd target = ref ? predictive_means(*ref, d.X) : d.y;
  const std::vector<int> folds = make_folds(d.n(), cfg.folds, derive_seed(cfg.seed, {0xf01d}));
  McmcConfig cv_mcmc = cfg.mcmc;
  cv_mcmc.seed = derive_seed(cfg.seed, {0xcf});
  McmcConfig full_mcmc = cfg.mcmc;
  full_mcmc.seed = derive_seed(cfg.seed, {0xf011});

  BayesStepResult res;
  IndexList cur = iota_indices(d.p());
  double cur_elpd = rhs_kfold_elpd(d.X, target, cur, folds, cfg.folds, cfg.prior, cv_mcmc);
  res.elpd_trace.push_back(cur_elpd);
  ReferenceFit cur_fit = fit_rhs_regression(select_columns(d.X, cur), target, cfg.prior, full_mcmc);

  for (int step = 0; step < cfg.max_steps && !cur.empty(); ++step) {
    Index worst = 0;
    double worst_p = -1.0;
    for (Index j = 0; j < static_cast<Index>(cur.size()); ++j) {
      const double pv = bayes_pvalue(cur_fit.beta_draws.col(j)).value;
      if (pv > worst_p) {
        worst_p = pv;
        worst = j;
      }
    }
    IndexList reduced = cur;
    reduced.erase(reduced.begin() + worst);
    const double elpd = rhs_kfold_elpd(d.X, target, reduced, folds, cfg.folds, cfg.prior, cv_mcmc);
    if (elpd < cur_elpd) break;
    cur = std::move(reduced);
    cur_elpd = elpd;
    res.elpd_trace.push_back(elpd);
    cur_fit = fit_rhs_regression(select_columns(d.X, cur), target, cfg.prior, full_mcmc);
  }
  res.selected = cur;
  res.final_fit = std::move(cur_fit);
  return res;
}

}  // namespace refsel
