#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "refsel/dataset.hpp"
#include "refsel/lasso.hpp"
#include "refsel/projpred.hpp"

namespace refsel {

struct IterationRecord {
  int iteration = 0;  ///< 1-based
  IndexList variables_added;
  double baseline_elpd = 0.0;  ///< NaN for selectors without an elpd baseline
  Index chosen_size = 0;
};

/// Search state: F are the remaining candidates, R the accumulated selection.
struct IterState {
  IndexList F;
  IndexList R;
  int iteration = 0;
  std::vector<IterationRecord> log;

  /// Moves S from F to R.
  void accept(const IndexList& S);
};

struct IterativeResult {
  IndexList selected;  ///< sorted
  std::vector<IterationRecord> log;
  IndexList remaining;
  bool hit_max_iters = false;
};

struct IterativeConfig {
  ProjpredConfig inner;
  int max_iters = 20;

  void validate() const;
};

/// Repeated projection selection on the not-yet-selected variables. The
/// reference model and its fold refits are built once; each round compares
/// submodels against the best submodel found in that round and stops when the
/// empty model already qualifies.
IterativeResult iterative_projpred(const Dataset& d, const IterativeConfig& cfg);
IterativeResult iterative_projpred(const Dataset& d, const IterativeConfig& cfg,
                                   const ReferenceFit& reference);

struct IterativeLassoConfig {
  LassoConfig inner;
  int max_iters = 20;

  void validate() const;
};

/// Same loop with the cross-validated lasso support as the inner selector,
/// fitted to the observed target.
IterativeResult iterative_lasso(const Dataset& d, const IterativeLassoConfig& cfg);

/// CSV with columns iteration,variables_added,baseline_elpd,chosen_size.
/// Added variables are joined by ';'.
void write_iteration_csv(const IterativeResult& result, const std::vector<std::string>& names,
                         std::ostream& out);

}  // namespace refsel
