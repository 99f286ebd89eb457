#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "refsel/dataset.hpp"

namespace refsel {

/// Parameters of the latent-factor generator: f ~ N(0,1), y = f + N(0,1),
/// the first k columns are sqrt(rho) f + N(0, 1 - rho), the rest N(0,1).
struct GenConfig {
  Index n = 100;
  Index p = 70;
  Index k = 20;
  double rho = 0.5;
  std::uint64_t seed = 1;

  void validate() const;
};

Dataset gen_latent_regression(const GenConfig& cfg);

/// Appends total_p - p standard normal columns labelled noise1, noise2, ...
Dataset augment_with_noise(const Dataset& d, Index total_p, std::uint64_t seed);

struct BootstrapSplit {
  Dataset train;
  Dataset oob;
  IndexList train_rows;
  IndexList oob_rows;
};

BootstrapSplit bootstrap_sample(const Dataset& d, std::uint64_t seed);

/// m rows drawn with replacement.
Dataset subsample(const Dataset& d, Index m, std::uint64_t seed);

/// Fold label for each row: a seeded permutation dealt round-robin into k folds.
std::vector<int> make_folds(Index n, int k, std::uint64_t seed);

struct CsvSpec {
  std::string target;
  /// Columns dropped before use (e.g. alternative targets).
  std::vector<std::string> exclude;
};

/// Reads a numeric CSV with a header row. Every non-target, non-excluded
/// column becomes a predictor; `relevant` is left unset.
Dataset read_csv_dataset(const std::string& path, const CsvSpec& spec);

}  // namespace refsel
