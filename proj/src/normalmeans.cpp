#include "refsel/normalmeans.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>

#include <boost/math/tools/minima.hpp>

#include "gibbs.hpp"
#include "refsel/errors.hpp"
#include "refsel/linalg.hpp"
#include "refsel/rng.hpp"
#include "refsel/stats.hpp"

namespace refsel {

void NormalMeansProblem::validate() const {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw InputError("normal means: sigma must be positive");
  if (!z.allFinite()) throw InputError("normal means: z contains non-finite values");
  if (theta_truth && theta_truth->size() != z.size())
    throw InputError("normal means: theta_truth length differs from z");
}

double fisher_z(double r, Index n) {
  if (n <= 3) throw ConfigError("fisher_z: needs n >= 4");
  if (!(std::abs(r) < 1.0)) throw NumericalError("fisher_z: |r| = 1 has no finite transform");
  return std::sqrt(static_cast<double>(n - 3)) * std::atanh(r);
}

namespace {

// Value below which `share` of the sorted absolute values fall (type-7 quantile).
double quantile_sorted(const std::vector<double>& v, double prob) {
  const double h = prob * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace

NormalMeansProblem fisher_problem(const Eigen::MatrixXd& X, const Eigen::VectorXd& target,
                                  const FisherOptions& opts) {
  if (X.rows() != target.size()) throw InputError("fisher_problem: row count mismatch");
  const Index n = X.rows();
  if (n <= 3) throw ConfigError("fisher_problem: needs n >= 4");
  NormalMeansProblem pb;
  pb.n_obs = n;
  pb.r = column_correlations(X, target);
  pb.z.resize(pb.r.size());
  for (Index j = 0; j < pb.r.size(); ++j) {
    if (!(std::abs(pb.r(j)) < 1.0))
      throw NumericalError("fisher_problem: column " + std::to_string(j) +
                           " is perfectly correlated with the target");
    pb.z(j) = fisher_z(pb.r(j), n);
  }
  if (opts.estimate_sigma && pb.z.size() >= 2) {
    std::vector<double> a(pb.z.data(), pb.z.data() + pb.z.size());
    for (double& v : a) v = std::abs(v);
    std::sort(a.begin(), a.end());
    const double cut = quantile_sorted(a, 0.9);
    std::vector<double> central;
    for (Index j = 0; j < pb.z.size(); ++j)
      if (std::abs(pb.z(j)) < cut) central.push_back(pb.z(j));
    if (central.size() >= 2) {
      const Eigen::Map<const Eigen::VectorXd> c(central.data(), static_cast<Index>(central.size()));
      const double sd = sample_sd(c);
      if (sd > 0.0) pb.sigma = sd;
    }
  }
  return pb;
}

NormalMeansProblem filter_problem(const NormalMeansProblem& raw, const ReferenceFit& ref,
                                  const Eigen::MatrixXd& X, const FisherOptions& opts) {
  if (X.cols() != raw.p()) throw InputError("filter_problem: column count differs from the problem");
  if (ref.basis.n_inputs != X.cols()) throw InputError("filter_problem: reference was fit on other columns");
  NormalMeansProblem pb = fisher_problem(X, predictive_means(ref, X), opts);
  pb.theta_truth = raw.theta_truth;
  pb.source = NormalMeansProblem::Source::ReferenceFiltered;
  return pb;
}

NaturalSplineBasis::NaturalSplineBasis(std::vector<double> knots) : knots_(std::move(knots)) {
  if (knots_.size() < 2) throw ConfigError("natural spline needs at least two knots");
  std::sort(knots_.begin(), knots_.end());
  center_ = 0.5 * (knots_.front() + knots_.back());
  scale_ = 0.5 * (knots_.back() - knots_.front());
  if (!(scale_ > 0.0)) throw ConfigError("natural spline knots must span a positive range");
  for (double& k : knots_) k = (k - center_) / scale_;
}

double NaturalSplineBasis::d(Index k, double x) const {
  const double xk = knots_[static_cast<std::size_t>(k)];
  const double xK = knots_.back();
  const double a = std::max(0.0, x - xk);
  const double b = std::max(0.0, x - xK);
  return (a * a * a - b * b * b) / (xK - xk);
}

Eigen::RowVectorXd NaturalSplineBasis::eval(double x) const {
  const Index K = size();
  const double u = (x - center_) / scale_;
  Eigen::RowVectorXd row(K);
  row(0) = 1.0;
  row(1) = u;
  const double last = d(K - 2, u);
  for (Index k = 0; k + 2 < K; ++k) row(k + 2) = d(k, u) - last;
  return row;
}

Eigen::MatrixXd NaturalSplineBasis::eval(const Eigen::VectorXd& x) const {
  Eigen::MatrixXd B(x.size(), size());
  for (Index i = 0; i < x.size(); ++i) B.row(i) = eval(x(i));
  return B;
}

void LocfdrConfig::validate() const {
  if (df < 2) throw ConfigError("locfdr.df must be >= 2");
  if (bins < df + 2) throw ConfigError("locfdr.bins must exceed df + 1");
  if (!(threshold > 0.0 && threshold <= 1.0)) throw ConfigError("locfdr.threshold must lie in (0, 1]");
  if (pi0 && !(*pi0 > 0.0 && *pi0 <= 1.0)) throw ConfigError("locfdr.pi0 must lie in (0, 1]");
}

double LocfdrModel::marginal_density(double z) const {
  return std::exp(basis->eval(z).dot(coef)) / (counts.sum() * bin_width);
}

LocfdrModel locfdr_fit(const NormalMeansProblem& problem, const LocfdrConfig& cfg) {
  cfg.validate();
  problem.validate();
  if (problem.p() < 50) throw ConfigError("locfdr needs at least 50 coordinates");
  const Eigen::VectorXd x = problem.standardized();
  const double lo = x.minCoeff() - 0.1;
  const double hi = x.maxCoeff() + 0.1;

  LocfdrModel m;
  m.bin_width = (hi - lo) / cfg.bins;
  m.centers.resize(cfg.bins);
  m.counts = Eigen::VectorXd::Zero(cfg.bins);
  for (int b = 0; b < cfg.bins; ++b) m.centers(b) = lo + (b + 0.5) * m.bin_width;
  for (Index j = 0; j < x.size(); ++j) {
    const auto b = static_cast<int>(std::floor((x(j) - lo) / m.bin_width));
    m.counts(std::clamp(b, 0, cfg.bins - 1)) += 1.0;
  }

  std::vector<double> knots;
  const double c0 = m.centers(0);
  const double c1 = m.centers(cfg.bins - 1);
  for (int k = 0; k <= cfg.df; ++k) knots.push_back(c0 + (c1 - c0) * k / cfg.df);
  m.basis.emplace(knots);
  const Eigen::MatrixXd B = m.basis->eval(m.centers);

  // Poisson regression of the counts by iteratively reweighted least squares.
  const Eigen::VectorXd& y = m.counts;
  Eigen::VectorXd mu = y.array() + 0.1;
  Eigen::VectorXd eta = mu.array().log();
  auto deviance = [&](const Eigen::VectorXd& mu_) {
    double dev = 0.0;
    for (Index i = 0; i < y.size(); ++i)
      dev += 2.0 * ((y(i) > 0 ? y(i) * std::log(y(i) / mu_(i)) : 0.0) - (y(i) - mu_(i)));
    return dev;
  };
  double dev = deviance(mu);
  bool converged = false;
  for (int it = 1; it <= 100; ++it) {
    const Eigen::VectorXd sw = mu.array().sqrt();
    const Eigen::VectorXd work = eta.array() + (y - mu).array() / mu.array();
    const Eigen::MatrixXd Bw = sw.asDiagonal() * B;
    m.coef = Bw.colPivHouseholderQr().solve((sw.array() * work.array()).matrix());
    eta = B * m.coef;
    mu = eta.array().exp();
    if (!mu.allFinite()) break;
    const double dev_new = deviance(mu);
    m.irls_iterations = it;
    if (std::abs(dev_new - dev) / (std::abs(dev_new) + 0.1) < 1e-10) {
      converged = true;
      break;
    }
    dev = dev_new;
  }
  if (!converged) throw NumericalError("locfdr: Poisson spline fit did not converge");

  const double total = static_cast<double>(x.size());
  m.density = mu / (total * m.bin_width);

  if (cfg.pi0) {
    m.pi0 = *cfg.pi0;
  } else {
    std::vector<Index> win;
    for (Index b = 0; b < m.centers.size(); ++b)
      if (std::abs(m.centers(b)) <= 1.0) win.push_back(b);
    if (win.size() < 3) throw NumericalError("locfdr: too few bins in the central window");
    Eigen::MatrixXd Q(static_cast<Index>(win.size()), 3);
    Eigen::VectorXd ly(static_cast<Index>(win.size()));
    for (std::size_t i = 0; i < win.size(); ++i) {
      const double c = m.centers(win[i]);
      Q.row(static_cast<Index>(i)) << 1.0, c, c * c;
      ly(static_cast<Index>(i)) = std::log(m.density(win[i]));
    }
    const Eigen::Vector3d qc = Q.colPivHouseholderQr().solve(ly);
    const double est = std::exp(qc(0)) / normal_pdf(0.0);
    m.pi0_clipped = est > 1.0;
    m.pi0 = std::min(1.0, est);
  }

  m.fdr.resize(x.size());
  for (Index j = 0; j < x.size(); ++j) {
    const double f = m.marginal_density(x(j));
    m.fdr(j) = std::clamp(m.pi0 * normal_pdf(x(j)) / f, 0.0, 1.0);
  }
  return m;
}

IndexList locfdr_select(const NormalMeansProblem& problem, const LocfdrConfig& cfg) {
  const LocfdrModel m = locfdr_fit(problem, cfg);
  IndexList out;
  for (Index j = 0; j < m.fdr.size(); ++j)
    if (m.fdr(j) < cfg.threshold) out.push_back(j);
  return out;
}

namespace {

// log of (1 - Phi(v)) / phi(v) for any real v.
double log_mills(double v) {
  if (v >= 0.0) return std::log(mills_ratio(v));
  return log_normal_cdf(-v) - log_normal_pdf(v);
}

double log_add_exp(double a, double b) {
  const double m = std::max(a, b);
  if (m == -std::numeric_limits<double>::infinity()) return m;
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

// log[(1 - w) + w g/phi]
double log_mixture_ratio(double log_g, double w) {
  return log_add_exp(std::log1p(-w), std::log(w) + log_g);
}

constexpr double kWMin = 1e-4;
constexpr double kWMax = 1.0 - 1e-4;
constexpr double kAMin = 0.01;
constexpr double kAMax = 10.0;

}  // namespace

double eb_log_marginal_ratio(double x, double a) {
  return std::log(0.5 * a) + log_add_exp(log_mills(a - x), log_mills(x + a));
}

double eb_loglik(const Eigen::VectorXd& x, double w, double a) {
  double s = 0.0;
  for (Index j = 0; j < x.size(); ++j) s += log_mixture_ratio(eb_log_marginal_ratio(x(j), a), w);
  return s;
}

double eb_posterior_median(double x, double w, double a) {
  if (!(w >= 0.0 && w <= 1.0) || !(a > 0.0)) throw ConfigError("eb_posterior_median: need w in [0,1], a > 0");
  if (x == 0.0 || w == 0.0) return 0.0;
  const double ax = std::abs(x);
  const double log_g = eb_log_marginal_ratio(ax, a);
  // Phi(ax - a - m) equals q at the median of the positive part.
  const double log_q = log_normal_pdf(ax - a) + log_mixture_ratio(log_g, w) - std::log(a * w);
  if (log_q >= log_normal_cdf(ax - a)) return 0.0;
  const double m = ax - a - normal_quantile(std::exp(log_q));
  const double med = std::max(0.0, m);
  return x > 0 ? med : -med;
}

double eb_threshold(double w, double a) {
  if (w == 0.0) return std::numeric_limits<double>::infinity();
  double lo = 0.0;
  double hi = 1.0;
  while (eb_posterior_median(hi, w, a) == 0.0) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e6) return std::numeric_limits<double>::infinity();
  }
  for (int it = 0; it < 200 && hi - lo > 1e-13 * std::max(1.0, hi); ++it) {
    const double mid = 0.5 * (lo + hi);
    (eb_posterior_median(mid, w, a) == 0.0 ? lo : hi) = mid;
  }
  return lo;
}

EbLaplaceFit eb_laplace_mml(const Eigen::VectorXd& x) {
  if (x.size() < 10) throw ConfigError("empirical Bayes median needs at least 10 coordinates");
  const int nw = 60;
  const int na = 50;
  EbLaplaceFit best;
  best.loglik = -std::numeric_limits<double>::infinity();
  std::vector<double> lg(static_cast<std::size_t>(x.size()));
  for (int ia = 0; ia < na; ++ia) {
    const double a = kAMin * std::pow(kAMax / kAMin, static_cast<double>(ia) / (na - 1));
    for (Index j = 0; j < x.size(); ++j) lg[static_cast<std::size_t>(j)] = eb_log_marginal_ratio(x(j), a);
    for (int iw = 0; iw < nw; ++iw) {
      const double w = kWMin * std::pow(kWMax / kWMin, static_cast<double>(iw) / (nw - 1));
      double s = 0.0;
      for (double v : lg) s += log_mixture_ratio(v, w);
      if (s > best.loglik) {
        best.loglik = s;
        best.w = w;
        best.a = a;
      }
    }
  }
  // Coordinate refinement on log w and log a.
  const int bits = 40;
  for (int round = 0; round < 6; ++round) {
    const double prev = best.loglik;
    auto fw = [&](double lw) { return -eb_loglik(x, std::exp(lw), best.a); };
    const auto rw = boost::math::tools::brent_find_minima(fw, std::log(kWMin), std::log(kWMax), bits);
    if (-rw.second >= best.loglik) {
      best.w = std::exp(rw.first);
      best.loglik = -rw.second;
    }
    auto fa = [&](double la) { return -eb_loglik(x, best.w, std::exp(la)); };
    const auto ra = boost::math::tools::brent_find_minima(fa, std::log(kAMin), std::log(kAMax), bits);
    if (-ra.second >= best.loglik) {
      best.a = std::exp(ra.first);
      best.loglik = -ra.second;
    }
    if (best.loglik - prev < 1e-10 * (1.0 + std::abs(prev))) break;
  }
  best.boundary = best.w <= kWMin * 1.01 || best.w >= kWMax - 1e-6;
  best.threshold = eb_threshold(best.w, best.a);
  return best;
}

EbSelection ebayes_median(const NormalMeansProblem& problem) {
  problem.validate();
  const Eigen::VectorXd x = problem.standardized();
  EbSelection out;
  out.fit = eb_laplace_mml(x);
  out.medians.resize(x.size());
  for (Index j = 0; j < x.size(); ++j) {
    out.medians(j) = eb_posterior_median(x(j), out.fit.w, out.fit.a) * problem.sigma;
    if (out.medians(j) != 0.0) out.selected.push_back(j);
  }
  return out;
}

IndexList ebayes_median_select(const NormalMeansProblem& problem) {
  return ebayes_median(problem).selected;
}

void Ci90Config::validate() const {
  mcmc.validate(1);
  if (!(slab_scale > 0.0)) throw ConfigError("ci90.slab_scale must be positive");
  if (!(p0_fraction > 0.0 && p0_fraction < 1.0)) throw ConfigError("ci90.p0_fraction must lie in (0, 1)");
  if (!(lower >= 0.0 && lower < upper && upper <= 1.0)) throw ConfigError("ci90 interval bounds are invalid");
}

Ci90Fit ci90_fit(const NormalMeansProblem& problem, const Ci90Config& cfg) {
  cfg.validate();
  problem.validate();
  const Index p = problem.p();
  if (p < 1) throw ConfigError("ci90 needs at least one coordinate");
  const Eigen::VectorXd& z = problem.z;
  const double s2 = problem.sigma * problem.sigma;
  const double p0 = cfg.p0_fraction * static_cast<double>(p);
  const double tau0 = p0 / (static_cast<double>(p) - p0) * problem.sigma;
  const double inv_c2 = 1.0 / (cfg.slab_scale * cfg.slab_scale);

  Engine eng = make_stream(cfg.mcmc.seed, {0xc190});
  Eigen::VectorXd theta = z;
  Eigen::VectorXd lambda2 = Eigen::VectorXd::Ones(p);
  Eigen::VectorXd a_lambda = Eigen::VectorXd::Ones(p);
  double tau2 = tau0 * tau0;
  double a_tau = 1.0;

  const std::vector<int> keep = detail::thinning_indices(cfg.mcmc.draws, cfg.mcmc.keep);
  Eigen::MatrixXd kept(static_cast<Index>(keep.size()), p);
  std::size_t next = 0;
  const int total = cfg.mcmc.warmup + cfg.mcmc.draws;
  for (int it = 0; it < total; ++it) {
    for (Index j = 0; j < p; ++j) {
      const double prec = 1.0 / s2 + 1.0 / (tau2 * lambda2(j)) + inv_c2;
      theta(j) = z(j) / (s2 * prec) + sample_normal(eng) / std::sqrt(prec);
    }
    double ss = 0.0;
    for (Index j = 0; j < p; ++j) {
      detail::update_half_t(eng, 1.0, 1.0, 1.0, theta(j) * theta(j) / (2.0 * tau2), lambda2(j),
                            a_lambda(j));
      lambda2(j) = std::clamp(lambda2(j), 1e-100, 1e100);
      ss += theta(j) * theta(j) / lambda2(j);
    }
    detail::update_half_t(eng, 1.0, tau0, static_cast<double>(p), 0.5 * ss, tau2, a_tau);
    tau2 = std::clamp(tau2, 1e-100, 1e100);
    const int d = it - cfg.mcmc.warmup;
    if (d >= 0 && next < keep.size() && keep[next] == d) kept.row(static_cast<Index>(next++)) = theta.transpose();
  }

  Ci90Fit fit;
  fit.lower.resize(p);
  fit.upper.resize(p);
  fit.mean = kept.colwise().mean().transpose();
  std::vector<double> col(keep.size());
  for (Index j = 0; j < p; ++j) {
    for (std::size_t s = 0; s < keep.size(); ++s) col[s] = kept(static_cast<Index>(s), j);
    std::sort(col.begin(), col.end());
    fit.lower(j) = quantile_sorted(col, cfg.lower);
    fit.upper(j) = quantile_sorted(col, cfg.upper);
    if (fit.lower(j) > 0.0 || fit.upper(j) < 0.0) fit.selected.push_back(j);
  }
  return fit;
}

IndexList ci90_select(const NormalMeansProblem& problem, const Ci90Config& cfg) {
  return ci90_fit(problem, cfg).selected;
}

void write_problem_csv(const NormalMeansProblem& problem, const std::vector<std::string>& names,
                       const std::vector<std::pair<std::string, IndexList>>& selections,
                       std::ostream& out) {
  out << "variable,r,z";
  std::vector<std::vector<bool>> flags;
  for (const auto& [name, sel] : selections) {
    out << ",selected_by_" << name;
    std::vector<bool> f(static_cast<std::size_t>(problem.p()), false);
    for (Index j : sel) f.at(static_cast<std::size_t>(j)) = true;
    flags.push_back(std::move(f));
  }
  out << '\n' << std::setprecision(10);
  for (Index j = 0; j < problem.p(); ++j) {
    const auto ju = static_cast<std::size_t>(j);
    out << (ju < names.size() ? names[ju] : std::to_string(j)) << ',' << problem.r(j) << ','
        << problem.z(j);
    for (const auto& f : flags) out << ',' << (f[ju] ? 1 : 0);
    out << '\n';
  }
}

}  // namespace refsel
