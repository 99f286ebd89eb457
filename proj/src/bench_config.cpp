#include "refsel/bench_config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "refsel/errors.hpp"

namespace refsel {

using nlohmann::json;

std::string preset_name(Preset p) {
  switch (p) {
    case Preset::Bodyfat1: return "bodyfat1";
    case Preset::Bodyfat2: return "bodyfat2";
    case Preset::Bodyfat3: return "bodyfat3";
    case Preset::Sim1: return "sim1";
    case Preset::Sim2: return "sim2";
    case Preset::Custom: return "custom";
  }
  return "custom";
}

Preset parse_preset(const std::string& name) {
  for (Preset p : {Preset::Bodyfat1, Preset::Bodyfat2, Preset::Bodyfat3, Preset::Sim1, Preset::Sim2,
                   Preset::Custom})
    if (preset_name(p) == name) return p;
  throw ConfigError("preset: unknown name '" + name + "'");
}

namespace {

const std::set<std::string> kMethods{"projpred", "steplm", "bayes_step", "lasso", "iter_projpred",
                                     "iter_lasso", "locfdr", "ebmed", "ci90"};

const std::vector<std::string> kBodyfatPredictors{"age",   "weight", "height", "neck",  "chest",
                                                  "abdomen", "hip",  "thigh",  "knee",  "ankle",
                                                  "biceps", "forearm", "wrist"};

[[noreturn]] void fail(const std::string& path, const std::string& msg) {
  throw ConfigError("field '" + path + "': " + msg);
}

void check_keys(const json& obj, const std::string& path, const std::set<std::string>& allowed) {
  if (!obj.is_object()) fail(path.empty() ? "<root>" : path, "expected an object");
  for (const auto& [k, v] : obj.items())
    if (!allowed.count(k)) fail(path.empty() ? k : path + "." + k, "unknown key");
}

template <class T>
T get_as(const json& v, const std::string& path) {
  try {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) fail(path, "expected true or false");
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) fail(path, "expected an integer");
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) fail(path, "expected a number");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) fail(path, "expected a string");
    }
    return v.get<T>();
  } catch (const json::exception& e) {
    fail(path, e.what());
  }
}

template <class T>
void read(const json& obj, const std::string& key, const std::string& path, T& out) {
  if (obj.contains(key)) out = get_as<T>(obj.at(key), path.empty() ? key : path + "." + key);
}

template <class T>
void read_list(const json& obj, const std::string& key, const std::string& path, std::vector<T>& out) {
  if (!obj.contains(key)) return;
  const std::string fp = path.empty() ? key : path + "." + key;
  const json& v = obj.at(key);
  if (!v.is_array()) fail(fp, "expected a list");
  std::vector<T> tmp;
  for (std::size_t i = 0; i < v.size(); ++i)
    tmp.push_back(get_as<T>(v[i], fp + "[" + std::to_string(i) + "]"));
  out = std::move(tmp);
}

void read_reference(const json& j, ReferenceConfig& r) {
  check_keys(j, "reference", {"kind", "n_components", "threshold_ratio", "warmup", "draws", "keep"});
  read(j, "kind", "reference", r.kind);
  read(j, "n_components", "reference", r.n_components);
  read(j, "threshold_ratio", "reference", r.threshold_ratio);
  read(j, "warmup", "reference", r.warmup);
  read(j, "draws", "reference", r.draws);
  read(j, "keep", "reference", r.keep);
}

}  // namespace

int ExperimentConfig::effective_replications() const {
  return std::max(1, static_cast<int>(std::lround(replications * scale)));
}

ExperimentConfig preset_config(Preset p) {
  ExperimentConfig c;
  c.preset = p;
  switch (p) {
    case Preset::Bodyfat1:
      c.methods = {"projpred", "steplm"};
      c.filter = {false};
      c.reference.kind = "rhs";
      c.data.path = "data/bodyfat.csv";
      c.data.predictors = kBodyfatPredictors;
      break;
    case Preset::Bodyfat2:
      c.methods = {"steplm"};
      c.data.path = "data/bodyfat.csv";
      c.data.predictors = kBodyfatPredictors;
      break;
    case Preset::Bodyfat3:
      c.methods = {"iter_projpred", "iter_lasso", "locfdr", "ebmed", "ci90"};
      c.data.path = "data/bodyfat.csv";
      c.data.predictors = kBodyfatPredictors;
      c.data.subsample_sizes = {50, 100, 150, 200, 251};
      c.estimate_sigma = true;
      break;
    case Preset::Sim1:
      c.grid = {{100, 200, 400}, {0.3, 0.5}, {70}, {20}};
      c.methods = {"projpred", "bayes_step", "steplm"};
      break;
    case Preset::Sim2:
      c.grid = {{50, 70, 100}, {0.3, 0.5}, {1000}, {100}};
      c.methods = {"iter_projpred", "iter_lasso", "locfdr", "ebmed", "ci90"};
      break;
    case Preset::Custom:
      break;
  }
  return c;
}

void ExperimentConfig::validate() const {
  if (replications < 1) fail("replications", "must be >= 1");
  if (!(scale > 0.0 && scale <= 1.0)) fail("scale", "must lie in (0, 1]");
  if (jobs < 1) fail("jobs", "must be >= 1");
  if (!(alpha > 0.0 && alpha < 1.0)) fail("alpha", "must lie in (0, 1)");
  if (methods.empty()) fail("methods", "must not be empty");
  for (std::size_t i = 0; i < methods.size(); ++i)
    if (!kMethods.count(methods[i])) fail("methods[" + std::to_string(i) + "]", "unknown method '" + methods[i] + "'");
  if (filter.empty()) fail("filter", "must not be empty");
  const bool simulated = preset == Preset::Sim1 || preset == Preset::Sim2 || preset == Preset::Custom;
  if (simulated) {
    if (grid.n.empty()) fail("grid.n", "must not be empty");
    if (grid.rho.empty()) fail("grid.rho", "must not be empty");
    if (grid.p.empty()) fail("grid.p", "must not be empty");
    if (grid.k.empty()) fail("grid.k", "must not be empty");
    for (std::size_t i = 0; i < grid.n.size(); ++i)
      if (grid.n[i] < 10) fail("grid.n[" + std::to_string(i) + "]", "must be >= 10");
    for (std::size_t i = 0; i < grid.rho.size(); ++i)
      if (!(grid.rho[i] >= 0.0 && grid.rho[i] <= 1.0)) fail("grid.rho[" + std::to_string(i) + "]", "rho must lie in [0, 1]");
    for (std::size_t i = 0; i < grid.p.size(); ++i)
      if (grid.p[i] < 1) fail("grid.p[" + std::to_string(i) + "]", "must be >= 1");
    for (std::size_t i = 0; i < grid.k.size(); ++i)
      for (Index pp : grid.p)
        if (grid.k[i] < 0 || grid.k[i] > pp) fail("grid.k[" + std::to_string(i) + "]", "must lie in [0, p]");
    if (test_size < 1) fail("simulation.test_size", "must be >= 1");
  } else {
    if (data.path.empty()) fail("data.path", "required for body-fat presets");
    if (data.target.empty()) fail("data.target", "must not be empty");
    if (data.noise_total < 0) fail("data.noise_total", "must be >= 0");
    for (std::size_t i = 0; i < data.subsample_sizes.size(); ++i)
      if (data.subsample_sizes[i] < 10) fail("data.subsample_sizes[" + std::to_string(i) + "]", "must be >= 10");
    if (preset == Preset::Bodyfat3 && data.subsample_sizes.empty())
      fail("data.subsample_sizes", "must not be empty");
  }
  if (reference.kind != "spc" && reference.kind != "rhs") fail("reference.kind", "must be 'spc' or 'rhs'");
  if (reference.n_components < 1) fail("reference.n_components", "must be >= 1");
  if (!(reference.threshold_ratio > 0.0 && reference.threshold_ratio <= 1.0))
    fail("reference.threshold_ratio", "must lie in (0, 1]");
  if (reference.warmup < 0) fail("reference.warmup", "must be >= 0");
  if (reference.draws < 1) fail("reference.draws", "must be >= 1");
  if (reference.keep < 1 || reference.keep > reference.draws) fail("reference.keep", "must lie in [1, draws]");
  if (projpred_folds < 2) fail("projpred.folds", "must be >= 2");
  if (search_draws < 1) fail("projpred.search_draws", "must be >= 1");
  if (max_size && *max_size < 0) fail("projpred.max_size", "must be >= 0");
  if (step_direction != "backward" && step_direction != "forward")
    fail("steplm.direction", "must be 'backward' or 'forward'");
  if (bayes_folds < 2) fail("bayes_step.folds", "must be >= 2");
  if (bayes_warmup < 0) fail("bayes_step.warmup", "must be >= 0");
  if (bayes_draws < 100) fail("bayes_step.draws", "must be >= 100");
  if (lasso_folds < 2) fail("lasso.folds", "must be >= 2");
  if (max_iters < 1) fail("iterative.max_iters", "must be >= 1");
  if (!(locfdr_threshold > 0.0 && locfdr_threshold <= 1.0))
    fail("normal_means.locfdr_threshold", "must lie in (0, 1]");
  if (locfdr_df < 2) fail("normal_means.locfdr_df", "must be >= 2");
  if (ci90_warmup < 0) fail("normal_means.ci90_warmup", "must be >= 0");
  if (ci90_draws < 10) fail("normal_means.ci90_draws", "must be >= 10");
}

ExperimentConfig config_from_json(const json& j) {
  check_keys(j, "", {"preset", "replications", "scale", "seed", "output_dir", "jobs", "alpha",
                     "grid", "methods", "filter", "data", "reference", "projpred", "steplm",
                     "bayes_step", "lasso", "iterative", "normal_means", "simulation"});
  std::string preset = "custom";
  read(j, "preset", "", preset);
  ExperimentConfig c = preset_config(parse_preset(preset));
  read(j, "replications", "", c.replications);
  read(j, "scale", "", c.scale);
  if (j.contains("seed")) {
    const json& s = j.at("seed");
    if (!s.is_number_integer() || (s.is_number_integer() && !s.is_number_unsigned() && s.get<std::int64_t>() < 0))
      fail("seed", "expected a non-negative integer");
    c.seed = s.get<std::uint64_t>();
  }
  read(j, "output_dir", "", c.output_dir);
  read(j, "jobs", "", c.jobs);
  read(j, "alpha", "", c.alpha);
  read_list(j, "methods", "", c.methods);
  read_list(j, "filter", "", c.filter);
  if (j.contains("grid")) {
    const json& g = j.at("grid");
    check_keys(g, "grid", {"n", "rho", "p", "k"});
    read_list(g, "n", "grid", c.grid.n);
    read_list(g, "rho", "grid", c.grid.rho);
    read_list(g, "p", "grid", c.grid.p);
    read_list(g, "k", "grid", c.grid.k);
  }
  if (j.contains("data")) {
    const json& d = j.at("data");
    check_keys(d, "data", {"path", "target", "predictors", "exclude", "noise_total", "subsample_sizes"});
    read(d, "path", "data", c.data.path);
    read(d, "target", "data", c.data.target);
    read_list(d, "predictors", "data", c.data.predictors);
    read_list(d, "exclude", "data", c.data.exclude);
    read(d, "noise_total", "data", c.data.noise_total);
    read_list(d, "subsample_sizes", "data", c.data.subsample_sizes);
  }
  if (j.contains("reference")) read_reference(j.at("reference"), c.reference);
  if (j.contains("projpred")) {
    const json& s = j.at("projpred");
    check_keys(s, "projpred", {"folds", "search_draws", "max_size", "validate_search"});
    read(s, "folds", "projpred", c.projpred_folds);
    read(s, "search_draws", "projpred", c.search_draws);
    read(s, "validate_search", "projpred", c.validate_search);
    if (s.contains("max_size") && !s.at("max_size").is_null())
      c.max_size = get_as<Index>(s.at("max_size"), "projpred.max_size");
  }
  if (j.contains("steplm")) {
    check_keys(j.at("steplm"), "steplm", {"direction"});
    read(j.at("steplm"), "direction", "steplm", c.step_direction);
  }
  if (j.contains("bayes_step")) {
    const json& s = j.at("bayes_step");
    check_keys(s, "bayes_step", {"folds", "warmup", "draws"});
    read(s, "folds", "bayes_step", c.bayes_folds);
    read(s, "warmup", "bayes_step", c.bayes_warmup);
    read(s, "draws", "bayes_step", c.bayes_draws);
  }
  if (j.contains("lasso")) {
    check_keys(j.at("lasso"), "lasso", {"folds"});
    read(j.at("lasso"), "folds", "lasso", c.lasso_folds);
  }
  if (j.contains("iterative")) {
    check_keys(j.at("iterative"), "iterative", {"max_iters"});
    read(j.at("iterative"), "max_iters", "iterative", c.max_iters);
  }
  if (j.contains("normal_means")) {
    const json& s = j.at("normal_means");
    check_keys(s, "normal_means", {"estimate_sigma", "locfdr_threshold", "locfdr_df", "ci90_warmup", "ci90_draws"});
    read(s, "estimate_sigma", "normal_means", c.estimate_sigma);
    read(s, "locfdr_threshold", "normal_means", c.locfdr_threshold);
    read(s, "locfdr_df", "normal_means", c.locfdr_df);
    read(s, "ci90_warmup", "normal_means", c.ci90_warmup);
    read(s, "ci90_draws", "normal_means", c.ci90_draws);
  }
  if (j.contains("simulation")) {
    check_keys(j.at("simulation"), "simulation", {"test_size"});
    read(j.at("simulation"), "test_size", "simulation", c.test_size);
  }
  c.validate();
  return c;
}

json read_config_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  json j;
  try {
    j = json::parse(in, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
  }
  if (!j.is_object()) throw ConfigError("config '" + path + "' must hold a JSON object");
  return j;
}

ExperimentConfig validate_config(const std::string& path) { return config_from_json(read_config_json(path)); }

json ExperimentConfig::to_json() const {
  json j;
  j["preset"] = preset_name(preset);
  j["replications"] = replications;
  j["scale"] = scale;
  j["seed"] = seed;
  j["output_dir"] = output_dir;
  j["jobs"] = jobs;
  j["alpha"] = alpha;
  j["grid"] = {{"n", grid.n}, {"rho", grid.rho}, {"p", grid.p}, {"k", grid.k}};
  j["methods"] = methods;
  j["filter"] = filter;
  j["data"] = {{"path", data.path},
               {"target", data.target},
               {"predictors", data.predictors},
               {"exclude", data.exclude},
               {"noise_total", data.noise_total},
               {"subsample_sizes", data.subsample_sizes}};
  j["reference"] = {{"kind", reference.kind},
                    {"n_components", reference.n_components},
                    {"threshold_ratio", reference.threshold_ratio},
                    {"warmup", reference.warmup},
                    {"draws", reference.draws},
                    {"keep", reference.keep}};
  j["projpred"] = {{"folds", projpred_folds}, {"search_draws", search_draws},
                   {"validate_search", validate_search},
                   {"max_size", max_size ? json(*max_size) : json(nullptr)}};
  j["steplm"] = {{"direction", step_direction}};
  j["bayes_step"] = {{"folds", bayes_folds}, {"warmup", bayes_warmup}, {"draws", bayes_draws}};
  j["lasso"] = {{"folds", lasso_folds}};
  j["iterative"] = {{"max_iters", max_iters}};
  j["normal_means"] = {{"estimate_sigma", estimate_sigma},
                       {"locfdr_threshold", locfdr_threshold},
                       {"locfdr_df", locfdr_df},
                       {"ci90_warmup", ci90_warmup},
                       {"ci90_draws", ci90_draws}};
  j["simulation"] = {{"test_size", test_size}};
  return j;
}

std::string config_keys_help() {
  return R"(Config file: one JSON object (comments allowed). Unset keys take the preset default.
  preset                 bodyfat1 | bodyfat2 | bodyfat3 | sim1 | sim2 | custom
  replications           replications per cell (default 100)
  scale                  factor in (0,1] multiplying replications (default 1)
  seed                   master seed (default 1)
  output_dir             result directory (default "results")
  jobs                   worker threads (default 1)
  alpha                  projpred size rule level (default 0.16)
  methods                list of: projpred steplm bayes_step lasso iter_projpred
                         iter_lasso locfdr ebmed ci90
  filter                 list of booleans: run unfiltered (false) and/or
                         reference-filtered (true) variants (default [false, true])
  grid.n, grid.rho, grid.p, grid.k
                         simulation grid (sim1: n 100,200,400 rho 0.3,0.5 p 70 k 20;
                         sim2: n 50,70,100 rho 0.3,0.5 p 1000 k 100)
  data.path              body-fat CSV (default data/bodyfat.csv)
  data.target            target column (default siri)
  data.predictors        predictor columns (default the 13 anthropometric ones)
  data.exclude           columns to drop when predictors is empty
  data.noise_total       total columns after appending N(0,1) noise (default 100, 0 = none)
  data.subsample_sizes   bootstrap sizes for bodyfat3 (default 50,100,150,200,251)
  reference.kind         spc | rhs (bodyfat1 default rhs, otherwise spc)
  reference.n_components, reference.threshold_ratio
                         supervised principal components (default 5, 0.6)
  reference.warmup, reference.draws, reference.keep
                         Gibbs settings (default 1000, 1000, 400)
  projpred.folds         cross-validation folds (default 10)
  projpred.search_draws  reference draws used in the search (default 20)
  projpred.validate_search  rerun the search inside each CV fold (default true)
  projpred.max_size      largest submodel (default min(p, n-2, 30))
  steplm.direction       backward | forward (default backward)
  bayes_step.folds, bayes_step.warmup, bayes_step.draws
                         elpd folds and Gibbs lengths (default 5, 200, 200)
  lasso.folds            cross-validation folds (default 10)
  iterative.max_iters    iteration cap (default 20)
  normal_means.estimate_sigma     estimate the z scale (bodyfat3 default true)
  normal_means.locfdr_threshold   default 0.2
  normal_means.locfdr_df          spline degrees of freedom (default 7)
  normal_means.ci90_warmup, normal_means.ci90_draws   default 1000, 2000
  simulation.test_size   rows of the held-out test set for RMSE (default 1000)
)";
}

}  // namespace refsel
