#include "refsel/projpred.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>

#include "refsel/datagen.hpp"
#include "refsel/errors.hpp"
#include "refsel/linalg.hpp"
#include "refsel/rng.hpp"
#include "refsel/stats.hpp"

namespace refsel {
namespace {

Eigen::MatrixXd with_intercept(const Eigen::MatrixXd& X_sub) {
  Eigen::MatrixXd A(X_sub.rows(), X_sub.cols() + 1);
  A.col(0).setOnes();
  A.rightCols(X_sub.cols()) = X_sub;
  return A;
}

// Least squares of every column of B on A, dropping dependent columns of A
// (never the intercept in column 0). Returns coefficients with zeros in the
// dropped rows.
Eigen::MatrixXd pivoted_least_squares(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                                      IndexList& dropped_cols) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
  qr.setThreshold(1e-10);
  qr.compute(A);
  const Index rank = qr.rank();
  Eigen::MatrixXd coef = Eigen::MatrixXd::Zero(A.cols(), B.cols());
  if (rank == A.cols()) {
    coef = qr.solve(B);
    return coef;
  }
  IndexList keep;
  const auto& perm = qr.colsPermutation().indices();
  for (Index k = 0; k < rank; ++k) keep.push_back(perm(k));
  for (Index k = rank; k < A.cols(); ++k) dropped_cols.push_back(perm(k));
  std::sort(keep.begin(), keep.end());
  std::sort(dropped_cols.begin(), dropped_cols.end());
  const Eigen::MatrixXd A_keep = select_columns(A, keep);
  const Eigen::MatrixXd c = A_keep.colPivHouseholderQr().solve(B);
  for (std::size_t k = 0; k < keep.size(); ++k) coef.row(keep[k]) = c.row(static_cast<Index>(k));
  return coef;
}

}  // namespace

DrawProjection project_draw(const Eigen::VectorXd& f_s, double sigma_s,
                            const Eigen::MatrixXd& X_sub) {
  if (f_s.size() != X_sub.rows()) throw InputError("project_draw: row count mismatch");
  if (!(sigma_s > 0)) throw InputError("project_draw: reference scale must be positive");
  const Index n = X_sub.rows();
  const Eigen::MatrixXd A = with_intercept(X_sub);
  IndexList dropped_cols;
  const Eigen::MatrixXd coef = pivoted_least_squares(A, f_s, dropped_cols);

  DrawProjection out;
  out.beta = coef.col(0);
  const double rss = (f_s - A * out.beta).squaredNorm();
  out.sigma = std::sqrt(sigma_s * sigma_s + rss / static_cast<double>(n));
  out.kl = static_cast<double>(n) * std::log(out.sigma / sigma_s);
  for (Index c : dropped_cols)
    if (c > 0) out.dropped.push_back(c - 1);
  return out;
}

Eigen::VectorXd SubmodelProjection::predict_mean(const Eigen::MatrixXd& X_full) const {
  const Eigen::VectorXd beta_bar = beta_draws.colwise().mean().transpose();
  Eigen::VectorXd out = Eigen::VectorXd::Constant(X_full.rows(), beta_bar(0));
  for (std::size_t j = 0; j < idx.size(); ++j)
    out += beta_bar(static_cast<Index>(j) + 1) * X_full.col(idx[j]);
  return out;
}

SubmodelProjection project_submodel(const ReferenceFit& ref, const Eigen::MatrixXd& X,
                                    std::span<const Index> idx) {
  if (ref.mean_draws.cols() != X.rows())
    throw InputError("project_submodel: reference draws do not match the design rows");
  const Index n = X.rows();
  const Eigen::MatrixXd A = with_intercept(select_columns(X, idx));
  const Eigen::MatrixXd F = ref.mean_draws.transpose();  // n x S
  IndexList dropped_cols;
  const Eigen::MatrixXd coef = pivoted_least_squares(A, F, dropped_cols);

  SubmodelProjection out;
  out.idx.assign(idx.begin(), idx.end());
  out.beta_draws = coef.transpose();
  const Eigen::VectorXd rss = (F - A * coef).colwise().squaredNorm().transpose();
  out.sigma_draws =
      (ref.sigma_draws.array().square() + rss.array() / static_cast<double>(n)).sqrt();
  out.kl_draws =
      static_cast<double>(n) * (out.sigma_draws.array() / ref.sigma_draws.array()).log();
  for (Index c : dropped_cols)
    if (c > 0) out.dropped.push_back(idx[static_cast<std::size_t>(c - 1)]);
  return out;
}

Index default_max_size(Index n, Index p) {
  return std::max<Index>(0, std::min({p, n - 2, Index{30}}));
}

SearchPath forward_search(const ReferenceFit& ref, const Eigen::MatrixXd& X,
                          const SearchOptions& opts) {
  const Index n = X.rows();
  if (ref.mean_draws.cols() != n)
    throw InputError("forward_search: reference draws do not match the design rows");
  IndexList cand = opts.candidates.empty() ? iota_indices(X.cols()) : sorted_unique(opts.candidates);
  const Index max_size =
      std::min<Index>(opts.max_size.value_or(default_max_size(n, X.cols())),
                      static_cast<Index>(cand.size()));
  if (max_size > X.cols()) throw ConfigError("max_size exceeds the number of variables");

  const ReferenceFit sub = ref.thinned(opts.draws);
  const Eigen::VectorXd var_ref = sub.sigma_draws.array().square();
  const double nd = static_cast<double>(n);

  Eigen::MatrixXd Fr = sub.mean_draws.transpose();  // n x S, residual of each draw
  Fr.rowwise() -= Fr.colwise().mean();
  Eigen::VectorXd rss = Fr.colwise().squaredNorm().transpose();

  auto mean_kl = [&](const Eigen::VectorXd& r) {
    return (0.5 * nd * (1.0 + r.array() / (nd * var_ref.array())).log()).mean();
  };

  Eigen::MatrixXd Xr = select_columns(X, cand);
  Xr.rowwise() -= Xr.colwise().mean();
  Eigen::VectorXd orig_norm = select_columns(X, cand).colwise().norm().transpose();

  SearchPath path;
  path.mean_kl.push_back(mean_kl(rss));
  std::vector<bool> used(cand.size(), false);

  for (Index step = 0; step < max_size; ++step) {
    const Eigen::MatrixXd G = Xr.transpose() * Fr;  // |cand| x S
    double best_kl = std::numeric_limits<double>::infinity();
    Index best = -1;
    bool best_dependent = false;
    for (std::size_t c = 0; c < cand.size(); ++c) {
      if (used[c]) continue;
      const auto ci = static_cast<Index>(c);
      const double nrm2 = Xr.col(ci).squaredNorm();
      const bool dependent = !(nrm2 > 1e-20 * std::max(1.0, orig_norm(ci) * orig_norm(ci)));
      double kl;
      if (dependent) {
        kl = path.mean_kl.back();
      } else {
        const Eigen::VectorXd r =
            (rss.array() - G.row(ci).transpose().array().square() / nrm2).cwiseMax(0.0);
        kl = mean_kl(r);
      }
      if (kl < best_kl) {
        best_kl = kl;
        best = ci;
        best_dependent = dependent;
      }
    }
    if (best < 0) break;
    used[static_cast<std::size_t>(best)] = true;
    path.ranking.push_back(cand[static_cast<std::size_t>(best)]);
    if (best_dependent) {
      path.dependent.push_back(cand[static_cast<std::size_t>(best)]);
      path.mean_kl.push_back(path.mean_kl.back());
      continue;
    }
    const Eigen::VectorXd q = Xr.col(best) / Xr.col(best).norm();
    Fr -= q * (q.transpose() * Fr);
    rss = Fr.colwise().squaredNorm().transpose();
    Xr -= q * (q.transpose() * Xr);
    path.mean_kl.push_back(std::min(mean_kl(rss), path.mean_kl.back()));
  }
  return path;
}

IndexList forward_search(const ReferenceFit& ref, const Eigen::MatrixXd& X, Index max_size) {
  SearchOptions opts;
  opts.max_size = max_size;
  return forward_search(ref, X, opts).ranking;
}

double UtilityPath::baseline_elpd() const {
  return baseline == Baseline::Reference ? reference_elpd : elpd(best_size);
}

Eigen::VectorXd UtilityPath::baseline_pointwise() const {
  return baseline == Baseline::Reference ? reference_pointwise
                                         : Eigen::VectorXd(pointwise.col(best_size));
}

void UtilityPath::set_baseline(Baseline b) {
  baseline = b;
  const Eigen::VectorXd base = baseline_pointwise();
  const Index L = elpd.size();
  const double n = static_cast<double>(pointwise.rows());
  diff.resize(L);
  se_diff.resize(L);
  for (Index i = 0; i < L; ++i) {
    const Eigen::VectorXd d = pointwise.col(i) - base;
    diff(i) = d.sum();
    se_diff(i) = sample_sd(d) * std::sqrt(n);
  }
}

FoldReferences fit_fold_references(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, int K,
                                   const ReferenceBuilder& builder, std::uint64_t seed) {
  if (X.rows() != y.size()) throw InputError("fit_fold_references: row count mismatch");
  FoldReferences f;
  f.fold_of = make_folds(X.rows(), K, derive_seed(seed, {0xf01d}));
  f.train_rows.resize(static_cast<std::size_t>(K));
  f.test_rows.resize(static_cast<std::size_t>(K));
  for (Index i = 0; i < X.rows(); ++i) {
    const int k = f.fold_of[static_cast<std::size_t>(i)];
    for (int j = 0; j < K; ++j)
      (j == k ? f.test_rows : f.train_rows)[static_cast<std::size_t>(j)].push_back(i);
  }
  for (int k = 0; k < K; ++k) {
    const auto& tr = f.train_rows[static_cast<std::size_t>(k)];
    if (tr.size() < 2) throw ConfigError("a cross-validation fold has fewer than 2 training rows");
    f.refs.push_back(builder(select_rows(X, tr), select_rows(y, tr),
                             derive_seed(seed, {static_cast<std::uint64_t>(k)})));
  }
  return f;
}

namespace {

// Fold k scores the prefixes of ranking_of(k), truncated to L variables.
template <class RankingOf>
UtilityPath evaluate_folds(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                           const FoldReferences& folds, std::span<const Index> report_ranking,
                           Index L, RankingOf ranking_of) {
  const Index n = X.rows();
  UtilityPath path;
  path.ranking.assign(report_ranking.begin(), report_ranking.begin() + L);
  path.pointwise.resize(n, L + 1);
  path.reference_pointwise.resize(n);

  for (int k = 0; k < folds.k(); ++k) {
    const auto& tr = folds.train_rows[static_cast<std::size_t>(k)];
    const auto& te = folds.test_rows[static_cast<std::size_t>(k)];
    if (te.empty()) continue;
    const ReferenceFit& ref = folds.refs[static_cast<std::size_t>(k)];
    const IndexList fold_ranking = ranking_of(k);
    const std::span<const Index> ranking(fold_ranking.data(), static_cast<std::size_t>(L));
    const Eigen::MatrixXd Xtr = select_rows(X, tr);
    const Eigen::MatrixXd Xte = select_rows(X, te);
    const Eigen::VectorXd yte = select_rows(y, te);
    const Index ntr = Xtr.rows();
    const Index nte = Xte.rows();
    const Index S = ref.n_draws();
    const Eigen::MatrixXd F = ref.mean_draws.transpose();  // ntr x S
    const Eigen::ArrayXd var_ref = ref.sigma_draws.array().square();

    // Reference model's own held-out densities.
    const Eigen::MatrixXd mu_ref = predictive_mean_draws(ref, Xte);  // S x nte
    Eigen::VectorXd lp(S);
    for (Index t = 0; t < nte; ++t) {
      for (Index s = 0; s < S; ++s)
        lp(s) = log_normal_density(yte(t), mu_ref(s, t), ref.sigma_draws(s));
      path.reference_pointwise(te[static_cast<std::size_t>(t)]) =
          log_sum_exp(lp) - std::log(static_cast<double>(S));
    }

    // Nested projections along the ranking share one orthogonal basis.
    NestedBasis basis(ntr, true, L + 1);
    IndexList accepted;  // ranked columns that entered the basis
    std::vector<Index> basis_count(static_cast<std::size_t>(L + 1));
    basis_count[0] = basis.size();
    for (Index i = 0; i < L; ++i) {
      const Index col = ranking[static_cast<std::size_t>(i)];
      if (basis.add(Xtr.col(col))) accepted.push_back(col);
      basis_count[static_cast<std::size_t>(i + 1)] = basis.size();
    }
    const Eigen::MatrixXd G = basis.q().transpose() * F;  // m x S
    Eigen::MatrixXd resid = F;  // updated in place; avoids |f|^2 - |g|^2 cancellation
    Eigen::MatrixXd Ate(nte, basis.size());
    Ate.col(0).setOnes();
    for (std::size_t j = 0; j < accepted.size(); ++j)
      Ate.col(static_cast<Index>(j) + 1) = Xte.col(accepted[j]);

    Eigen::VectorXd rss;
    Index used = 0;
    for (Index i = 0; i <= L; ++i) {
      const Index m = basis_count[static_cast<std::size_t>(i)];
      for (; used < m; ++used) resid.noalias() -= basis.q().col(used) * G.row(used);
      rss = resid.colwise().squaredNorm().transpose();
      const Eigen::MatrixXd coef =
          basis.r().topLeftCorner(m, m).triangularView<Eigen::Upper>().solve(G.topRows(m));
      const Eigen::MatrixXd mu = Ate.leftCols(m) * coef;  // nte x S
      const Eigen::ArrayXd sd =
          (var_ref + rss.array().cwiseMax(0.0) / static_cast<double>(ntr)).sqrt();
      for (Index t = 0; t < nte; ++t) {
        for (Index s = 0; s < S; ++s) lp(s) = log_normal_density(yte(t), mu(t, s), sd(s));
        path.pointwise(te[static_cast<std::size_t>(t)], i) =
            log_sum_exp(lp) - std::log(static_cast<double>(S));
      }
    }
  }

  path.elpd = path.pointwise.colwise().sum().transpose();
  path.reference_elpd = path.reference_pointwise.sum();
  path.elpd.maxCoeff(&path.best_size);
  path.set_baseline(Baseline::Reference);
  return path;
}

}  // namespace

UtilityPath estimate_utility(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                             const FoldReferences& folds, std::span<const Index> ranking) {
  const IndexList r(ranking.begin(), ranking.end());
  return evaluate_folds(X, y, folds, ranking, static_cast<Index>(ranking.size()),
                        [&](int) { return r; });
}

UtilityPath estimate_utility_searched(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                      const FoldReferences& folds, std::span<const Index> ranking,
                                      const SearchOptions& opts) {
  std::vector<IndexList> fold_rankings;
  auto L = static_cast<Index>(ranking.size());
  SearchOptions fold_opts = opts;
  fold_opts.max_size = L;
  for (int k = 0; k < folds.k(); ++k) {
    const Eigen::MatrixXd Xtr = select_rows(X, folds.train_rows[static_cast<std::size_t>(k)]);
    fold_rankings.push_back(
        forward_search(folds.refs[static_cast<std::size_t>(k)], Xtr, fold_opts).ranking);
    L = std::min(L, static_cast<Index>(fold_rankings.back().size()));
  }
  return evaluate_folds(X, y, folds, ranking, L,
                        [&](int k) { return fold_rankings[static_cast<std::size_t>(k)]; });
}

UtilityPath estimate_utility_kfold(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                   std::span<const Index> ranking, int K,
                                   const ReferenceBuilder& builder, std::uint64_t seed) {
  if (K < 2) throw ConfigError("K must be >= 2");
  return estimate_utility(X, y, fit_fold_references(X, y, K, builder, seed), ranking);
}

double prob_not_worse(double diff, double se) {
  if (se > 0) return normal_cdf(diff / se);
  if (diff > 0) return 1.0;
  return diff == 0 ? 0.5 : 0.0;
}

SizeDecision select_size(const UtilityPath& path, double alpha) {
  if (path.elpd.size() == 0) throw ConfigError("select_size: empty utility path");
  for (Index i = 0; i < path.elpd.size(); ++i)
    if (prob_not_worse(path.diff(i), path.se_diff(i)) >= alpha) return {i, true};
  return {path.max_size(), false};
}

void ProjpredConfig::validate() const {
  if (folds < 2) throw ConfigError("projpred.folds must be >= 2");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("projpred.alpha must lie in (0, 1)");
  if (max_size && *max_size < 0) throw ConfigError("projpred.max_size must be >= 0");
  if (search_draws < 1) throw ConfigError("projpred.search_draws must be >= 1");
}

SelectionResult projpred_select(const Dataset& d, const ProjpredConfig& cfg) {
  cfg.validate();
  d.validate();
  const ReferenceBuilder builder = make_reference_builder(cfg.reference);
  return projpred_select(d, cfg, builder(d.X, d.y, derive_seed(cfg.seed, {0xfeed})));
}

SelectionResult projpred_select(const Dataset& d, const ProjpredConfig& cfg,
                                const ReferenceFit& reference) {
  cfg.validate();
  d.validate();
  if (reference.mean_draws.cols() != d.n())
    throw InputError("projpred_select: reference was fitted to a different number of rows");
  const ReferenceBuilder builder = make_reference_builder(cfg.reference);

  SelectionResult res;
  res.alpha = cfg.alpha;
  res.reference = reference;

  SearchOptions opts;
  opts.max_size = cfg.max_size.value_or(default_max_size(d.n(), d.p()));
  opts.draws = cfg.search_draws;
  res.ranking = forward_search(res.reference, d.X, opts).ranking;

  const FoldReferences folds =
      fit_fold_references(d.X, d.y, cfg.folds, builder, derive_seed(cfg.seed, {0xcf}));
  res.utility = cfg.validate_search
                    ? estimate_utility_searched(d.X, d.y, folds, res.ranking, opts)
                    : estimate_utility(d.X, d.y, folds, res.ranking);
  res.ranking = res.utility.ranking;
  const SizeDecision dec = select_size(res.utility, cfg.alpha);
  res.chosen_size = dec.size;
  res.qualified = dec.qualified;
  res.chosen_idx.assign(res.ranking.begin(), res.ranking.begin() + dec.size);
  return res;
}

void write_selection_csv(const SelectionResult& result, const std::vector<std::string>& names,
                         std::ostream& out) {
  const UtilityPath& u = result.utility;
  out << "size,elpd,se_diff_to_baseline,added_variable\n" << std::setprecision(10);
  for (Index i = 0; i < u.elpd.size(); ++i) {
    out << i << ',' << u.elpd(i) << ',' << u.se_diff(i) << ',';
    if (i > 0) {
      const Index v = u.ranking[static_cast<std::size_t>(i - 1)];
      out << (static_cast<std::size_t>(v) < names.size() ? names[static_cast<std::size_t>(v)]
                                                         : std::to_string(v));
    }
    out << '\n';
  }
}

}  // namespace refsel
