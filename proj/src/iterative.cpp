#include "refsel/iterative.hpp"

#include <iomanip>
#include <limits>

#include "refsel/datagen.hpp"
#include "refsel/errors.hpp"
#include "refsel/rng.hpp"

namespace refsel {

void IterState::accept(const IndexList& S) {
  const IndexList s = sorted_unique(S);
  F = set_difference(F, s);
  IndexList merged = R;
  merged.insert(merged.end(), s.begin(), s.end());
  R = sorted_unique(merged);
}

void IterativeConfig::validate() const {
  inner.validate();
  if (max_iters < 1) throw ConfigError("iterative.max_iters must be >= 1");
}

void IterativeLassoConfig::validate() const {
  if (max_iters < 1) throw ConfigError("iterative.max_iters must be >= 1");
}

namespace {

IterativeResult finish(IterState& st, bool hit) {
  IterativeResult res;
  res.selected = st.R;
  res.log = std::move(st.log);
  res.remaining = st.F;
  res.hit_max_iters = hit;
  return res;
}

}  // namespace

IterativeResult iterative_projpred(const Dataset& d, const IterativeConfig& cfg) {
  cfg.validate();
  d.validate();
  const ReferenceBuilder builder = make_reference_builder(cfg.inner.reference);
  return iterative_projpred(d, cfg, builder(d.X, d.y, derive_seed(cfg.inner.seed, {0xfeed})));
}

IterativeResult iterative_projpred(const Dataset& d, const IterativeConfig& cfg,
                                   const ReferenceFit& ref) {
  cfg.validate();
  d.validate();
  if (ref.mean_draws.cols() != d.n())
    throw InputError("iterative_projpred: reference was fitted to a different number of rows");
  const ProjpredConfig& pc = cfg.inner;
  const ReferenceBuilder builder = make_reference_builder(pc.reference);
  const FoldReferences folds =
      fit_fold_references(d.X, d.y, pc.folds, builder, derive_seed(pc.seed, {0xcf}));

  IterState st;
  st.F = iota_indices(d.p());
  while (!st.F.empty()) {
    if (st.iteration == cfg.max_iters) return finish(st, true);
    ++st.iteration;
    SearchOptions opts;
    opts.candidates = st.F;
    opts.draws = pc.search_draws;
    opts.max_size = std::min<Index>(pc.max_size.value_or(default_max_size(d.n(), d.p())),
                                    static_cast<Index>(st.F.size()));
    const IndexList ranking = forward_search(ref, d.X, opts).ranking;
    UtilityPath u = pc.validate_search ? estimate_utility_searched(d.X, d.y, folds, ranking, opts)
                                       : estimate_utility(d.X, d.y, folds, ranking);
    u.set_baseline(Baseline::BestSubmodel);
    const SizeDecision dec = select_size(u, pc.alpha);

    IterationRecord rec;
    rec.iteration = st.iteration;
    rec.variables_added.assign(ranking.begin(), ranking.begin() + dec.size);
    rec.baseline_elpd = u.baseline_elpd();
    rec.chosen_size = dec.size;
    st.log.push_back(rec);
    if (dec.size == 0) break;
    st.accept(rec.variables_added);
  }
  return finish(st, false);
}

IterativeResult iterative_lasso(const Dataset& d, const IterativeLassoConfig& cfg) {
  cfg.validate();
  d.validate();
  IterState st;
  st.F = iota_indices(d.p());
  while (!st.F.empty()) {
    if (st.iteration == cfg.max_iters) return finish(st, true);
    ++st.iteration;
    Dataset sub;
    sub.X = select_columns(d.X, st.F);
    sub.y = d.y;
    const LassoFit fit = lasso_cv(sub, cfg.inner);

    IterationRecord rec;
    rec.iteration = st.iteration;
    for (Index j : fit.active) rec.variables_added.push_back(st.F[static_cast<std::size_t>(j)]);
    rec.baseline_elpd = std::numeric_limits<double>::quiet_NaN();
    rec.chosen_size = static_cast<Index>(rec.variables_added.size());
    st.log.push_back(rec);
    if (rec.variables_added.empty()) break;
    st.accept(rec.variables_added);
  }
  return finish(st, false);
}

void write_iteration_csv(const IterativeResult& result, const std::vector<std::string>& names,
                         std::ostream& out) {
  out << "iteration,variables_added,baseline_elpd,chosen_size\n" << std::setprecision(10);
  for (const IterationRecord& r : result.log) {
    out << r.iteration << ',';
    for (std::size_t k = 0; k < r.variables_added.size(); ++k) {
      const Index v = r.variables_added[k];
      if (k) out << ';';
      out << (static_cast<std::size_t>(v) < names.size() ? names[static_cast<std::size_t>(v)]
                                                         : std::to_string(v));
    }
    out << ',' << r.baseline_elpd << ',' << r.chosen_size << '\n';
  }
}

}  // namespace refsel
