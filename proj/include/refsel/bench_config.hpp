#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "refsel/dataset.hpp"

namespace refsel {

enum class Preset { Bodyfat1, Bodyfat2, Bodyfat3, Sim1, Sim2, Custom };

std::string preset_name(Preset p);
Preset parse_preset(const std::string& name);

struct GridConfig {
  std::vector<Index> n;
  std::vector<double> rho;
  std::vector<Index> p;
  std::vector<Index> k;
};

struct DataConfig {
  std::string path;
  std::string target = "siri";
  std::vector<std::string> predictors;  ///< empty: every other column
  std::vector<std::string> exclude;
  Index noise_total = 100;              ///< total columns after adding noise; 0 disables
  std::vector<Index> subsample_sizes;   ///< bodyfat3 bootstrap sizes
};

struct ReferenceConfig {
  std::string kind = "spc";  ///< spc | rhs
  Index n_components = 5;
  double threshold_ratio = 0.6;
  int warmup = 1000;
  int draws = 1000;
  int keep = 400;
};

struct ExperimentConfig {
  Preset preset = Preset::Custom;
  int replications = 100;
  double scale = 1.0;
  std::uint64_t seed = 1;
  std::string output_dir = "results";
  int jobs = 1;
  double alpha = 0.16;
  GridConfig grid;
  std::vector<std::string> methods;
  std::vector<bool> filter{false, true};
  DataConfig data;
  ReferenceConfig reference;
  int projpred_folds = 10;
  Index search_draws = 20;
  bool validate_search = true;
  std::optional<Index> max_size;
  std::string step_direction = "backward";
  int bayes_folds = 5;
  int bayes_warmup = 200;
  int bayes_draws = 200;
  int lasso_folds = 10;
  int max_iters = 20;
  bool estimate_sigma = false;
  double locfdr_threshold = 0.2;
  int locfdr_df = 7;
  int ci90_warmup = 1000;
  int ci90_draws = 2000;
  Index test_size = 1000;

  /// Replications after dividing by the scale factor, at least 1.
  int effective_replications() const;
  void validate() const;
  nlohmann::json to_json() const;
};

/// Defaults for a preset before any config file values are applied.
ExperimentConfig preset_config(Preset p);

/// Parses a JSON config, fills defaults from its preset and checks
/// invariants. Errors name the offending field path.
ExperimentConfig config_from_json(const nlohmann::json& j);
/// Reads a JSON object; // and /* */ comments are accepted.
nlohmann::json read_config_json(const std::string& path);
ExperimentConfig validate_config(const std::string& path);

/// Help text listing every config key.
std::string config_keys_help();

}  // namespace refsel
