#include "refsel/refmodel.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>

#include "gibbs.hpp"
#include "refsel/errors.hpp"
#include "refsel/linalg.hpp"
#include "refsel/rng.hpp"

namespace refsel {

Index FeatureMap::n_features() const {
  return loadings ? loadings->cols() : static_cast<Index>(columns.size());
}

Eigen::MatrixXd FeatureMap::apply(const Eigen::MatrixXd& X) const {
  if (X.cols() != n_inputs)
    throw InputError("design has " + std::to_string(X.cols()) + " columns, reference expects " +
                     std::to_string(n_inputs));
  Eigen::MatrixXd Z(X.rows(), static_cast<Index>(columns.size()));
  for (std::size_t j = 0; j < columns.size(); ++j) {
    const auto jj = static_cast<Index>(j);
    Z.col(jj) = (X.col(columns[j]).array() - center(jj)) / scale(jj);
  }
  if (loadings) return Z * *loadings;
  return Z;
}

SPCBasis screen_and_spc(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, Index n_components,
                        double threshold_ratio) {
  if (n_components < 1) throw ConfigError("n_components must be >= 1");
  if (!(threshold_ratio >= 0.0 && threshold_ratio <= 1.0))
    throw ConfigError("threshold_ratio must lie in [0, 1]");
  if (X.rows() != y.size()) throw InputError("screen_and_spc: row count mismatch");
  if (X.rows() < 2) throw InputError("screen_and_spc needs at least two rows");

  const ColumnScaling scaling = ColumnScaling::fit(X);
  const Eigen::VectorXd score = column_correlations(X, y).cwiseAbs();

  SPCBasis basis;
  double max_score = -1.0;
  for (Index j = 0; j < X.cols(); ++j) {
    if (scaling.constant[static_cast<std::size_t>(j)]) {
      basis.constant_columns.push_back(j);
      continue;
    }
    max_score = std::max(max_score, score(j));
  }
  if (max_score < 0.0) throw InputError("no screenable columns: every column is constant");

  const double cut = threshold_ratio * max_score * (1.0 - 1e-12);
  FeatureMap& map = basis.map;
  map.n_inputs = X.cols();
  for (Index j = 0; j < X.cols(); ++j)
    if (!scaling.constant[static_cast<std::size_t>(j)] && score(j) >= cut) map.columns.push_back(j);

  const auto m = static_cast<Index>(map.columns.size());
  map.center.resize(m);
  map.scale.resize(m);
  Eigen::MatrixXd Z(X.rows(), m);
  for (Index j = 0; j < m; ++j) {
    const Index src = map.columns[static_cast<std::size_t>(j)];
    map.center(j) = scaling.center(src);
    map.scale(j) = scaling.scale(src);
    Z.col(j) = (X.col(src).array() - map.center(j)) / map.scale(j);
  }

  Eigen::BDCSVD<Eigen::MatrixXd> svd(Z, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Index c = std::min({n_components, X.rows(), m});
  Eigen::MatrixXd V = svd.matrixV().leftCols(c);
  Eigen::MatrixXd scores = Z * V;
  // Orient each component to correlate non-negatively with the target.
  const Eigen::VectorXd yc = y.array() - y.mean();
  for (Index k = 0; k < c; ++k) {
    if (scores.col(k).dot(yc) < 0) {
      V.col(k) *= -1.0;
      scores.col(k) *= -1.0;
    }
  }
  map.loadings = std::move(V);
  basis.scores = std::move(scores);
  basis.s_max = sample_sd(basis.scores.col(0));
  return basis;
}

void PriorConfig::validate() const {
  if (!(tau_df >= 1.0)) throw ConfigError("prior.tau_df must be >= 1");
  if (!(sigma_df >= 1.0)) throw ConfigError("prior.sigma_df must be >= 1");
  if (!(sigma_scale > 0.0)) throw ConfigError("prior.sigma_scale must be positive");
  if (!(slab_scale > 0.0)) throw ConfigError("prior.slab_scale must be positive");
  if (tau_scale && !(*tau_scale > 0.0)) throw ConfigError("prior.tau_scale must be positive");
  if (expected_nonzero && !(*expected_nonzero > 0.0))
    throw ConfigError("prior.expected_nonzero must be positive");
  if (fixed_tau && !(*fixed_tau > 0.0)) throw ConfigError("prior.fixed_tau must be positive");
  if (fixed_sigma && !(*fixed_sigma > 0.0)) throw ConfigError("prior.fixed_sigma must be positive");
}

void McmcConfig::validate(int min_draws) const {
  if (warmup < 0) throw ConfigError("mcmc.warmup must be >= 0");
  if (draws < min_draws)
    throw ConfigError("mcmc.draws must be >= " + std::to_string(min_draws));
  if (keep < 1 || keep > draws) throw ConfigError("mcmc.keep must lie in [1, draws]");
}

ReferenceFit ReferenceFit::thinned(Index count) const {
  if (count >= n_draws()) return *this;
  const auto idx = detail::thinning_indices(static_cast<int>(n_draws()), static_cast<int>(count));
  ReferenceFit out;
  const auto S = static_cast<Index>(idx.size());
  out.intercept_draws.resize(S);
  out.beta_draws.resize(S, beta_draws.cols());
  out.sigma_draws.resize(S);
  out.mean_draws.resize(S, mean_draws.cols());
  for (Index s = 0; s < S; ++s) {
    const Index src = idx[static_cast<std::size_t>(s)];
    out.intercept_draws(s) = intercept_draws(src);
    out.beta_draws.row(s) = beta_draws.row(src);
    out.sigma_draws(s) = sigma_draws(src);
    out.mean_draws.row(s) = mean_draws.row(src);
  }
  out.yhat = out.mean_draws.colwise().mean().transpose();
  out.basis = basis;
  out.kind = kind;
  return out;
}

namespace {

void finish_fit(ReferenceFit& fit, const Eigen::MatrixXd& features) {
  fit.mean_draws = fit.beta_draws * features.transpose();
  fit.mean_draws.colwise() += fit.intercept_draws;
  fit.yhat = fit.mean_draws.colwise().mean().transpose();
}

// An exactly fitted target drives sigma to zero. Keep it above 1e-8 of the
// target's SD so held-out densities stay meaningful under round-off.
double min_sigma2(double target_var) { return std::max(1e-16 * target_var, 1e-200); }

void check_state(bool ok, const char* what, std::size_t it) {
  if (!ok) throw SamplerError(std::string("sampler diverged: non-finite ") + what, it);
}

}  // namespace

ReferenceFit fit_spc_reference(const SPCBasis& basis, const Eigen::VectorXd& y,
                               const PriorConfig& prior, const McmcConfig& mcmc) {
  prior.validate();
  mcmc.validate(100);
  const Eigen::MatrixXd& U = basis.scores;
  if (!U.allFinite()) throw InputError("SPC scores contain non-finite values");
  if (!y.allFinite()) throw InputError("target contains non-finite values");
  if (U.rows() != y.size()) throw InputError("scores and target lengths differ");

  const Index n = U.rows();
  const Index c = U.cols();
  const double nd = static_cast<double>(n);
  double tau_scale = 1.0;
  if (prior.tau_scale) {
    tau_scale = *prior.tau_scale;
  } else {
    if (!(basis.s_max > 0)) throw InputError("leading component has zero spread");
    tau_scale = prior.tau_scale_rule == TauScaleRule::InvSmaxSquared
                    ? 1.0 / (basis.s_max * basis.s_max)
                    : 1.0 / basis.s_max;
  }

  const double sigma2_floor = min_sigma2((y.array() - y.mean()).square().mean());
  Engine eng = make_stream(mcmc.seed);
  const Eigen::MatrixXd UtU = U.transpose() * U;
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(n);
  const Eigen::VectorXd Ut1 = U.transpose() * ones;

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(c);
  double alpha = y.mean();
  double sigma2 = prior.fixed_sigma ? *prior.fixed_sigma * *prior.fixed_sigma
                                    : std::max((y.array() - alpha).square().mean(), 1e-8);
  double tau2 = prior.fixed_tau ? *prior.fixed_tau * *prior.fixed_tau : tau_scale * tau_scale;
  double a_tau = 1.0, b_sigma = 1.0;

  const auto keep = detail::thinning_indices(mcmc.draws, mcmc.keep);
  ReferenceFit fit;
  fit.kind = "spc";
  fit.basis = basis.map;
  const auto S = static_cast<Index>(keep.size());
  fit.intercept_draws.resize(S);
  fit.beta_draws.resize(S, c);
  fit.sigma_draws.resize(S);

  std::size_t next_keep = 0;
  const int total = mcmc.warmup + mcmc.draws;
  Eigen::VectorXd resid(n);
  for (int it = 0; it < total; ++it) {
    const auto iter = static_cast<std::size_t>(it);
    const Eigen::VectorXd prec = Eigen::VectorXd::Constant(c, 1.0 / tau2);
    const Eigen::VectorXd Uty = U.transpose() * y - alpha * Ut1;
    check_state(detail::draw_gaussian_coefs(UtU, Uty, sigma2, prec, eng, beta), "coefficients",
                iter);

    resid = y - U * beta;
    alpha = resid.mean() + std::sqrt(sigma2 / nd) * sample_normal(eng);
    resid.array() -= alpha;

    if (!prior.fixed_sigma)
      detail::update_half_t(eng, prior.sigma_df, prior.sigma_scale, nd, 0.5 * resid.squaredNorm(),
                            sigma2, b_sigma);
    sigma2 = std::max(sigma2, sigma2_floor);
    if (!prior.fixed_tau)
      detail::update_half_t(eng, prior.tau_df, tau_scale, static_cast<double>(c),
                            0.5 * beta.squaredNorm(), tau2, a_tau);
    check_state(std::isfinite(alpha) && std::isfinite(sigma2) && sigma2 > 0 &&
                    std::isfinite(tau2) && tau2 > 0,
                "scale parameters", iter);

    const int d = it - mcmc.warmup;
    if (d >= 0 && next_keep < keep.size() && d == keep[next_keep]) {
      const auto s = static_cast<Index>(next_keep++);
      fit.intercept_draws(s) = alpha;
      fit.beta_draws.row(s) = beta.transpose();
      fit.sigma_draws(s) = std::sqrt(sigma2);
    }
  }
  finish_fit(fit, U);
  return fit;
}

ReferenceFit fit_rhs_regression(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                const PriorConfig& prior, const McmcConfig& mcmc) {
  prior.validate();
  mcmc.validate(100);
  if (X.rows() != y.size()) throw InputError("fit_rhs_regression: row count mismatch");
  if (X.rows() < 3) throw InputError("fit_rhs_regression needs at least three rows");
  if (!X.allFinite()) throw InputError("design contains non-finite values");
  if (!y.allFinite()) throw InputError("target contains non-finite values");

  const Index n = X.rows();
  const Index p = X.cols();
  const double nd = static_cast<double>(n);
  const ColumnScaling scaling = ColumnScaling::fit(X);
  const Eigen::MatrixXd Z = scaling.apply(X);
  const double y_mean = y.mean();
  double y_sd = std::sqrt((y.array() - y_mean).square().mean());
  if (!(y_sd > 0)) y_sd = 1.0;
  const Eigen::VectorXd yt = (y.array() - y_mean) / y_sd;

  const double pd = static_cast<double>(p);
  double p0 = prior.expected_nonzero.value_or(std::min(pd / 10.0, nd / 5.0));
  if (p0 >= pd) p0 = 0.5 * pd;
  const double tau0 = p > 0 ? p0 / (pd - p0) / std::sqrt(nd) : 1.0;
  const double slab2 = prior.slab_scale * prior.slab_scale;
  const bool wide = p > n;

  Engine eng = make_stream(mcmc.seed);
  const Eigen::MatrixXd ZtZ = wide ? Eigen::MatrixXd() : Eigen::MatrixXd(Z.transpose() * Z);
  const Eigen::VectorXd Zty = Z.transpose() * yt;

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd lambda2 = Eigen::VectorXd::Ones(p);
  Eigen::VectorXd nu = Eigen::VectorXd::Ones(p);
  double tau2 = prior.fixed_tau ? *prior.fixed_tau * *prior.fixed_tau : tau0 * tau0;
  double xi = 1.0;
  double sigma2 = prior.fixed_sigma ? std::pow(*prior.fixed_sigma / y_sd, 2) : 1.0;
  double b_sigma = 1.0;
  double alpha = 0.0;

  const auto keep = detail::thinning_indices(mcmc.draws, mcmc.keep);
  ReferenceFit fit;
  fit.kind = "rhs";
  fit.basis.n_inputs = p;
  fit.basis.columns = iota_indices(p);
  fit.basis.center = scaling.center;
  fit.basis.scale = scaling.scale;
  const auto S = static_cast<Index>(keep.size());
  fit.intercept_draws.resize(S);
  fit.beta_draws.resize(S, p);
  fit.sigma_draws.resize(S);

  std::size_t next_keep = 0;
  const int total = mcmc.warmup + mcmc.draws;
  Eigen::VectorXd resid(n), prec(p);
  for (int it = 0; it < total; ++it) {
    const auto iter = static_cast<std::size_t>(it);
    if (p > 0) {
      prec = (1.0 / (tau2 * lambda2.array()) + 1.0 / slab2).matrix();
      bool ok;
      if (wide) {
        const Eigen::VectorXd var = prec.cwiseInverse();
        ok = detail::draw_gaussian_coefs_wide(Z, (yt.array() - alpha).matrix(), sigma2, var, eng, beta);
      } else {
        ok = detail::draw_gaussian_coefs(ZtZ, Zty, sigma2, prec, eng, beta);
      }
      check_state(ok, "coefficients", iter);
    }
    resid = yt - Z * beta;
    alpha = resid.mean() + std::sqrt(sigma2 / nd) * sample_normal(eng);
    resid.array() -= alpha;

    if (!prior.fixed_sigma)
      detail::update_half_t(eng, prior.sigma_df, prior.sigma_scale, nd, 0.5 * resid.squaredNorm(),
                            sigma2, b_sigma);
    sigma2 = std::max(sigma2, min_sigma2(1.0));
    for (Index j = 0; j < p; ++j) {
      lambda2(j) = sample_inv_gamma(eng, 1.0, 1.0 / nu(j) + beta(j) * beta(j) / (2.0 * tau2));
      nu(j) = sample_inv_gamma(eng, 1.0, 1.0 + 1.0 / lambda2(j));
    }
    if (!prior.fixed_tau && p > 0) {
      const double ss = (beta.array().square() / lambda2.array()).sum();
      tau2 = sample_inv_gamma(eng, 0.5 * (pd + 1.0), 1.0 / xi + 0.5 * ss);
      xi = sample_inv_gamma(eng, 1.0, 1.0 / (tau0 * tau0) + 1.0 / tau2);
    }
    // Bound the scales so the prior precision stays representable.
    lambda2 = lambda2.cwiseMax(1e-100).cwiseMin(1e100);
    tau2 = std::clamp(tau2, 1e-100, 1e100);
    check_state(std::isfinite(alpha) && std::isfinite(sigma2) && sigma2 > 0 &&
                    std::isfinite(tau2) && tau2 > 0,
                "scale parameters", iter);

    const int d = it - mcmc.warmup;
    if (d >= 0 && next_keep < keep.size() && d == keep[next_keep]) {
      const auto s = static_cast<Index>(next_keep++);
      fit.intercept_draws(s) = y_mean + y_sd * alpha;
      fit.beta_draws.row(s) = (y_sd * beta).transpose();
      fit.sigma_draws(s) = y_sd * std::sqrt(sigma2);
    }
  }
  finish_fit(fit, Z);
  return fit;
}

Eigen::MatrixXd predictive_mean_draws(const ReferenceFit& fit, const Eigen::MatrixXd& X_new) {
  const Eigen::MatrixXd F = fit.basis.apply(X_new);
  Eigen::MatrixXd M = fit.beta_draws * F.transpose();
  M.colwise() += fit.intercept_draws;
  return M;
}

Eigen::VectorXd predictive_means(const ReferenceFit& fit, const Eigen::MatrixXd& X_new) {
  const Eigen::MatrixXd F = fit.basis.apply(X_new);
  const Eigen::VectorXd beta_bar = fit.beta_draws.colwise().mean().transpose();
  return (F * beta_bar).array() + fit.intercept_draws.mean();
}

void write_draws_csv(const ReferenceFit& fit, std::ostream& out) {
  out << "draw,parameter,value\n";
  out << std::setprecision(17);
  for (Index s = 0; s < fit.n_draws(); ++s) {
    out << s << ",intercept," << fit.intercept_draws(s) << '\n';
    for (Index j = 0; j < fit.beta_draws.cols(); ++j)
      out << s << ",beta[" << j << "]," << fit.beta_draws(s, j) << '\n';
    out << s << ",sigma," << fit.sigma_draws(s) << '\n';
  }
}

ReferenceBuilder make_reference_builder(const ReferenceSpec& spec) {
  return [spec](const Eigen::MatrixXd& X, const Eigen::VectorXd& y, std::uint64_t seed) {
    McmcConfig mcmc = spec.mcmc;
    mcmc.seed = seed;
    if (spec.kind == ReferenceSpec::Kind::Spc) {
      const SPCBasis basis = screen_and_spc(X, y, spec.n_components, spec.threshold_ratio);
      return fit_spc_reference(basis, y, spec.prior, mcmc);
    }
    return fit_rhs_regression(X, y, spec.prior, mcmc);
  };
}

}  // namespace refsel
