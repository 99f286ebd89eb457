#include "refsel/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <thread>

#include "refsel/baselines.hpp"
#include "refsel/datagen.hpp"
#include "refsel/errors.hpp"
#include "refsel/iterative.hpp"
#include "refsel/lasso.hpp"
#include "refsel/linalg.hpp"
#include "refsel/metrics.hpp"
#include "refsel/normalmeans.hpp"
#include "refsel/projpred.hpp"
#include "refsel/rng.hpp"

namespace refsel {

using nlohmann::json;
namespace fs = std::filesystem;

std::string RunRecord::key() const {
  return scenario + "|" + method + "|" + (filtered ? "1" : "0") + "|" + std::to_string(replication);
}

std::string RunRecord::label() const { return filtered ? method + "+ref" : method; }

json RunRecord::to_json() const {
  json j;
  j["scenario"] = scenario;
  j["fields"] = fields;
  j["method"] = method;
  j["filtered"] = filtered;
  j["replication"] = replication;
  j["seed"] = seed;
  j["selected"] = selected;
  j["metrics"] = json::object();
  for (const auto& [k, v] : metrics) j["metrics"][k] = v;
  j["wall_time"] = wall_time;
  if (!error.empty()) j["error"] = error;
  return j;
}

RunRecord RunRecord::from_json(const json& j) {
  RunRecord r;
  r.scenario = j.at("scenario").get<std::string>();
  r.fields = j.value("fields", json::object());
  r.method = j.at("method").get<std::string>();
  r.filtered = j.at("filtered").get<bool>();
  r.replication = j.at("replication").get<int>();
  r.seed = j.value("seed", std::uint64_t{0});
  r.selected = j.at("selected").get<IndexList>();
  for (const auto& [k, v] : j.at("metrics").items()) r.metrics[k] = v.get<double>();
  r.wall_time = j.value("wall_time", 0.0);
  r.error = j.value("error", std::string());
  return r;
}

Dataset load_bodyfat(const DataConfig& data) {
  if (!fs::exists(data.path)) throw DataError("body-fat data file not found: " + data.path);
  Dataset d = read_csv_dataset(data.path, CsvSpec{data.target, data.exclude});
  if (!data.predictors.empty()) {
    IndexList cols;
    for (const std::string& name : data.predictors) {
      const Index j = d.column_index(name);
      if (j < 0) throw DataError(data.path + ": missing predictor column '" + name + "'");
      cols.push_back(j);
    }
    d.X = select_columns(d.X, cols);
    d.column_names = data.predictors;
  }
  d.relevant = std::vector<bool>(static_cast<std::size_t>(d.p()), true);
  d.validate();
  return d;
}

namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

struct Variant {
  std::string method;
  bool filtered;
};

std::vector<Variant> variants_for(const ExperimentConfig& cfg) {
  std::vector<Variant> out;
  for (const std::string& m : cfg.methods) {
    if (m == "projpred" || m == "iter_projpred") {
      out.push_back({m, true});
    } else if (m == "iter_lasso") {
      out.push_back({m, false});
    } else {
      for (bool f : cfg.filter) out.push_back({m, f});
    }
  }
  return out;
}

enum class CellKind { Sim, BodyfatFull, BodyfatCv, BodyfatBoot, BodyfatSub };

struct Cell {
  Cell(CellKind k, std::string s, json f, int r, std::size_t si)
      : kind(k), scenario(std::move(s)), fields(std::move(f)), rep(r), scenario_index(si) {}
  CellKind kind;
  std::string scenario;
  json fields;
  int rep = 0;
  std::size_t scenario_index = 0;
  std::uint64_t seed = 0;
  // simulation parameters
  GenConfig gen;
  bool noise = false;
  Index m = 0;
};

struct Context {
  const ExperimentConfig& cfg;
  std::vector<Variant> variants;
  std::optional<Dataset> bodyfat;        ///< original columns
  std::optional<Dataset> bodyfat_noise;  ///< with appended noise
};

ReferenceSpec reference_spec(const ExperimentConfig& cfg) {
  ReferenceSpec s;
  s.kind = cfg.reference.kind == "rhs" ? ReferenceSpec::Kind::Rhs : ReferenceSpec::Kind::Spc;
  s.n_components = cfg.reference.n_components;
  s.threshold_ratio = cfg.reference.threshold_ratio;
  s.mcmc.warmup = cfg.reference.warmup;
  s.mcmc.draws = cfg.reference.draws;
  s.mcmc.keep = cfg.reference.keep;
  return s;
}

ProjpredConfig projpred_config(const ExperimentConfig& cfg, std::uint64_t seed) {
  ProjpredConfig pc;
  pc.reference = reference_spec(cfg);
  pc.folds = cfg.projpred_folds;
  pc.alpha = cfg.alpha;
  pc.max_size = cfg.max_size;
  pc.search_draws = cfg.search_draws;
  pc.validate_search = cfg.validate_search;
  pc.seed = seed;
  return pc;
}

struct MethodOut {
  IndexList selected;
  std::optional<Eigen::VectorXd> pred;       ///< selected model at the test rows
  std::optional<Eigen::VectorXd> pred_full;  ///< full model at the test rows
  std::map<std::string, double> extra;
};

MethodOut run_method(const Variant& v, const Dataset& d, const ReferenceFit* ref,
                     const ExperimentConfig& cfg, std::uint64_t seed, const Eigen::MatrixXd* X_test) {
  MethodOut out;
  const ReferenceFit* use_ref = v.filtered ? ref : nullptr;
  if (v.filtered && !ref) throw ConfigError("reference-filtered variant without a reference");
  const Dataset target_d = use_ref ? d.with_target(predictive_means(*ref, d.X)) : d;

  if (v.method == "projpred") {
    const SelectionResult r = projpred_select(d, projpred_config(cfg, seed), *ref);
    out.selected = sorted_unique(r.chosen_idx);
    out.extra["qualified"] = r.qualified ? 1.0 : 0.0;
    if (X_test) {
      out.pred = project_submodel(*ref, d.X, r.chosen_idx).predict_mean(*X_test);
      out.pred_full = predictive_means(*ref, *X_test);
    }
  } else if (v.method == "iter_projpred") {
    IterativeConfig ic;
    ic.inner = projpred_config(cfg, seed);
    ic.max_iters = cfg.max_iters;
    const IterativeResult r = iterative_projpred(d, ic, *ref);
    out.selected = r.selected;
    out.extra["iterations"] = static_cast<double>(r.log.size());
    out.extra["hit_max_iters"] = r.hit_max_iters ? 1.0 : 0.0;
  } else if (v.method == "iter_lasso") {
    IterativeLassoConfig ic;
    ic.inner.folds = cfg.lasso_folds;
    ic.inner.seed = seed;
    ic.max_iters = cfg.max_iters;
    const IterativeResult r = iterative_lasso(d, ic);
    out.selected = r.selected;
    out.extra["iterations"] = static_cast<double>(r.log.size());
    out.extra["hit_max_iters"] = r.hit_max_iters ? 1.0 : 0.0;
  } else if (v.method == "steplm") {
    StepConfig sc;
    sc.direction = cfg.step_direction == "forward" ? StepDirection::Forward : StepDirection::Backward;
    sc.use_reference = use_ref != nullptr;
    const StepResult r = steplm(d, sc, use_ref);
    out.selected = r.selected;
    if (X_test) {
      out.pred = r.predict(*X_test);
      Eigen::MatrixXd A(d.n(), d.p() + 1);
      A.col(0).setOnes();
      A.rightCols(d.p()) = d.X;
      const OlsFit full = ols_fit(A, target_d.y);
      out.pred_full = (full.beta(0) + (*X_test * full.beta.tail(d.p())).array()).matrix();
    }
  } else if (v.method == "bayes_step") {
    BayesStepConfig bc;
    bc.folds = cfg.bayes_folds;
    bc.mcmc.warmup = cfg.bayes_warmup;
    bc.mcmc.draws = cfg.bayes_draws;
    bc.mcmc.keep = cfg.bayes_draws;
    bc.seed = seed;
    const BayesStepResult r = bayes_stepwise(d, bc, use_ref);
    out.selected = r.selected;
    if (X_test) out.pred = r.predict(*X_test);
  } else if (v.method == "lasso") {
    LassoConfig lc;
    lc.folds = cfg.lasso_folds;
    lc.seed = seed;
    const LassoFit r = lasso_cv(d, lc, use_ref);
    out.selected = r.active;
    if (X_test)
      out.pred = ((*X_test * r.path.coef.col(r.chosen)).array() + r.path.intercept(r.chosen)).matrix();
  } else if (v.method == "locfdr" || v.method == "ebmed" || v.method == "ci90") {
    FisherOptions fo;
    fo.estimate_sigma = cfg.estimate_sigma;
    const NormalMeansProblem pb = fisher_problem(d.X, target_d.y, fo);
    if (v.method == "locfdr") {
      LocfdrConfig lc;
      lc.df = cfg.locfdr_df;
      lc.threshold = cfg.locfdr_threshold;
      const LocfdrModel mdl = locfdr_fit(pb, lc);
      for (Index j = 0; j < mdl.fdr.size(); ++j)
        if (mdl.fdr(j) < lc.threshold) out.selected.push_back(j);
      out.extra["pi0"] = mdl.pi0;
    } else if (v.method == "ebmed") {
      const EbSelection eb = ebayes_median(pb);
      out.selected = eb.selected;
      out.extra["eb_w"] = eb.fit.w;
      out.extra["eb_a"] = eb.fit.a;
    } else {
      Ci90Config cc;
      cc.mcmc = McmcConfig{cfg.ci90_warmup, cfg.ci90_draws, cfg.ci90_draws, derive_seed(seed, {0xc1})};
      out.selected = ci90_select(pb, cc);
    }
    out.extra["sigma"] = pb.sigma;
  } else {
    throw ConfigError("unknown method '" + v.method + "'");
  }
  return out;
}

void add_selection_metrics(RunRecord& r, const std::optional<std::vector<bool>>& relevant) {
  r.metrics["n_selected"] = static_cast<double>(r.selected.size());
  if (!relevant) return;
  r.metrics["fdr"] = fdr(r.selected, *relevant);
  Index noisy = 0;
  for (Index j : r.selected)
    if (!(*relevant)[static_cast<std::size_t>(j)]) ++noisy;
  r.metrics["n_noisy"] = static_cast<double>(noisy);
  if (std::count(relevant->begin(), relevant->end(), true) > 0)
    r.metrics["sensitivity"] = sensitivity(r.selected, *relevant);
}

bool needs_reference(const std::vector<Variant>& vs) {
  for (const Variant& v : vs)
    if (v.filtered) return true;
  return false;
}

std::vector<RunRecord> run_cell(const Context& ctx, const Cell& cell) {
  const ExperimentConfig& cfg = ctx.cfg;
  std::vector<RunRecord> recs;
  auto base_record = [&](const Variant& v) {
    RunRecord r;
    r.scenario = cell.scenario;
    r.fields = cell.fields;
    r.method = v.method;
    r.filtered = v.filtered;
    r.replication = cell.rep;
    r.seed = cell.seed;
    return r;
  };

  Dataset train;
  std::optional<Dataset> test;
  try {
    switch (cell.kind) {
      case CellKind::Sim: {
        GenConfig g = cell.gen;
        g.seed = derive_seed(cell.seed, {1});
        train = gen_latent_regression(g);
        g.n = cfg.test_size;
        g.seed = derive_seed(cell.seed, {2});
        test = gen_latent_regression(g);
        break;
      }
      case CellKind::BodyfatFull:
        train = cell.noise ? *ctx.bodyfat_noise : *ctx.bodyfat;
        break;
      case CellKind::BodyfatCv: {
        const Dataset& d = cell.noise ? *ctx.bodyfat_noise : *ctx.bodyfat;
        const std::vector<int> folds =
            make_folds(d.n(), cfg.projpred_folds, derive_seed(cfg.seed, {0xb0d1}));
        IndexList tr, te;
        for (Index i = 0; i < d.n(); ++i) (folds[static_cast<std::size_t>(i)] == cell.rep ? te : tr).push_back(i);
        train = d.rows(tr);
        test = d.rows(te);
        break;
      }
      case CellKind::BodyfatBoot: {
        const Dataset& d = cell.noise ? *ctx.bodyfat_noise : *ctx.bodyfat;
        BootstrapSplit s = bootstrap_sample(d, cell.seed);
        train = std::move(s.train);
        test = std::move(s.oob);
        if (test->n() == 0) test.reset();
        break;
      }
      case CellKind::BodyfatSub:
        train = subsample(*ctx.bodyfat_noise, cell.m, cell.seed);
        break;
    }
  } catch (const std::exception& e) {
    for (const Variant& v : ctx.variants) {
      RunRecord r = base_record(v);
      r.error = std::string("data: ") + e.what();
      recs.push_back(std::move(r));
    }
    return recs;
  }

  std::optional<ReferenceFit> ref;
  std::string ref_error;
  if (needs_reference(ctx.variants)) {
    try {
      ref = make_reference_builder(reference_spec(cfg))(train.X, train.y,
                                                        derive_seed(cell.seed, {0xfeed}));
    } catch (const std::exception& e) {
      ref_error = std::string("reference: ") + e.what();
    }
  }

  for (const Variant& v : ctx.variants) {
    RunRecord r = base_record(v);
    const auto t0 = std::chrono::steady_clock::now();
    try {
      if (v.filtered && !ref) throw NumericalError(ref_error);
      const MethodOut out = run_method(v, train, ref ? &*ref : nullptr, cfg, cell.seed,
                                       test ? &test->X : nullptr);
      r.selected = out.selected;
      add_selection_metrics(r, train.relevant);
      if (out.pred && test) r.metrics["rmse"] = rmse(test->y, *out.pred);
      if (out.pred_full && test) r.metrics["rmse_full"] = rmse(test->y, *out.pred_full);
      for (const auto& [k, val] : out.extra) r.metrics[k] = val;
    } catch (const std::exception& e) {
      r.error = e.what();
      r.selected.clear();
      r.metrics.clear();
    }
    r.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    recs.push_back(std::move(r));
  }
  return recs;
}

std::string fmt_num(double v) {
  std::ostringstream os;
  os << std::setprecision(6) << v;
  return os.str();
}

std::vector<Cell> build_cells(const ExperimentConfig& cfg, const Context& ctx) {
  std::vector<Cell> cells;
  std::vector<std::string> scenarios;
  auto add_scenario = [&](const std::string& s) {
    scenarios.push_back(s);
    return scenarios.size() - 1;
  };
  const int reps = cfg.effective_replications();
  auto push = [&](Cell c) {
    c.seed = derive_seed(cfg.seed, {fnv1a(c.scenario), static_cast<std::uint64_t>(c.rep)});
    cells.push_back(std::move(c));
  };

  switch (cfg.preset) {
    case Preset::Sim1:
    case Preset::Sim2:
    case Preset::Custom:
      for (Index n : cfg.grid.n)
        for (double rho : cfg.grid.rho)
          for (Index p : cfg.grid.p)
            for (Index k : cfg.grid.k) {
              const std::string key = "n=" + std::to_string(n) + ";rho=" + fmt_num(rho) +
                                      ";p=" + std::to_string(p) + ";k=" + std::to_string(k);
              const std::size_t si = add_scenario(key);
              for (int rep = 0; rep < reps; ++rep) {
                Cell c(CellKind::Sim, key, json{{"n", n}, {"rho", rho}, {"p", p}, {"k", k}}, rep, si);
                c.gen = GenConfig{n, p, k, rho, 0};
                push(c);
              }
            }
      break;
    case Preset::Bodyfat1: {
      const Index n = ctx.bodyfat->n();
      for (bool noise : {false, true}) {
        const Index p = noise ? ctx.bodyfat_noise->p() : ctx.bodyfat->p();
        const std::string tag = noise ? "noise" : "original";
        Cell full(CellKind::BodyfatFull, "full-" + tag, json{{"n", n}, {"p", p}}, 0, add_scenario("full-" + tag));
        full.noise = noise;
        push(full);
        const std::size_t si = add_scenario("cv-" + tag);
        for (int fold = 0; fold < cfg.projpred_folds; ++fold) {
          Cell c(CellKind::BodyfatCv, "cv-" + tag, json{{"n", n}, {"p", p}}, fold, si);
          c.noise = noise;
          push(c);
        }
      }
      const std::size_t si = add_scenario("boot-original");
      for (int rep = 0; rep < reps; ++rep) {
        Cell c(CellKind::BodyfatBoot, "boot-original", json{{"n", n}, {"p", ctx.bodyfat->p()}}, rep, si);
        push(c);
      }
      break;
    }
    case Preset::Bodyfat2: {
      const std::size_t si = add_scenario("boot-noise");
      for (int rep = 0; rep < reps; ++rep) {
        Cell c(CellKind::BodyfatBoot, "boot-noise",
               json{{"n", ctx.bodyfat_noise->n()}, {"p", ctx.bodyfat_noise->p()}}, rep, si);
        c.noise = true;
        push(c);
      }
      break;
    }
    case Preset::Bodyfat3:
      for (Index m : cfg.data.subsample_sizes) {
        const std::string key = "m=" + std::to_string(m);
        const std::size_t si = add_scenario(key);
        for (int rep = 0; rep < reps; ++rep) {
          Cell c(CellKind::BodyfatSub, key, json{{"n", m}, {"p", ctx.bodyfat_noise->p()}}, rep, si);
          c.m = m;
          push(c);
        }
      }
      break;
  }
  return cells;
}

std::vector<std::string> variable_names_for(const ExperimentConfig& cfg, const Context& ctx) {
  if (ctx.bodyfat_noise) return ctx.bodyfat_noise->column_names;
  if (ctx.bodyfat) return ctx.bodyfat->column_names;
  Index pmax = 0;
  for (Index p : cfg.grid.p) pmax = std::max(pmax, p);
  std::vector<std::string> names;
  for (Index j = 0; j < pmax; ++j) names.push_back("x" + std::to_string(j + 1));
  return names;
}

std::string var_name(const std::vector<std::string>& names, Index j) {
  return static_cast<std::size_t>(j) < names.size() ? names[static_cast<std::size_t>(j)]
                                                    : "x" + std::to_string(j + 1);
}

struct Group {
  std::string scenario;
  std::string method;
  bool filtered;
  json fields;
  std::vector<const RunRecord*> runs;  ///< successful runs only
  int errors = 0;

  std::string label() const { return filtered ? method + "+ref" : method; }
};

std::vector<Group> group_records(const std::vector<RunRecord>& records) {
  std::vector<Group> groups;
  std::map<std::string, std::size_t> index;
  for (const RunRecord& r : records) {
    const std::string k = r.scenario + "|" + r.method + "|" + (r.filtered ? "1" : "0");
    auto it = index.find(k);
    if (it == index.end()) {
      it = index.emplace(k, groups.size()).first;
      groups.push_back(Group{r.scenario, r.method, r.filtered, r.fields, {}, 0});
    }
    if (r.error.empty())
      groups[it->second].runs.push_back(&r);
    else
      ++groups[it->second].errors;
  }
  return groups;
}

struct Moments {
  double mean = 0.0;
  double sd = 0.0;
  int count = 0;
};

Moments metric_moments(const Group& g, const std::string& metric) {
  std::vector<double> v;
  for (const RunRecord* r : g.runs) {
    auto it = r->metrics.find(metric);
    if (it != r->metrics.end()) v.push_back(it->second);
  }
  Moments m;
  m.count = static_cast<int>(v.size());
  if (v.empty()) return m;
  for (double x : v) m.mean += x;
  m.mean /= static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - m.mean) * (x - m.mean);
    m.sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return m;
}

Index group_p(const Group& g) {
  if (g.fields.contains("p")) return g.fields.at("p").get<Index>();
  Index p = 0;
  for (const RunRecord* r : g.runs)
    for (Index j : r->selected) p = std::max(p, j + 1);
  return p;
}

SelectionMatrix selection_matrix(const Group& g) {
  std::vector<IndexList> sets;
  for (const RunRecord* r : g.runs) sets.push_back(r->selected);
  return SelectionMatrix::from_sets(sets, group_p(g));
}

void write_csv_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << content;
}

}  // namespace

std::vector<RunRecord> read_records(const fs::path& jsonl) {
  std::vector<RunRecord> out;
  std::ifstream in(jsonl);
  if (!in) return out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(RunRecord::from_json(json::parse(line)));
    } catch (const std::exception&) {
      // A torn final line from an interrupted run is dropped; the cell reruns.
      if (in.peek() != std::char_traits<char>::eof())
        throw DataError(jsonl.string() + ":" + std::to_string(lineno) + ": malformed record");
    }
  }
  return out;
}

void write_aggregates(const std::vector<RunRecord>& records,
                      const std::vector<std::string>& variable_names, const fs::path& out_dir) {
  const std::vector<Group> groups = group_records(records);
  const double nan = std::numeric_limits<double>::quiet_NaN();

  std::vector<MetricRow> rows;
  std::ostringstream inc, models, sels;
  inc << "scenario,method,filtered,variable,frequency\n" << std::setprecision(10);
  models << "scenario,method,filtered,rank,size,variables,frequency\n" << std::setprecision(10);
  sels << "run_id,method,variable,included\n";

  for (const Group& g : groups) {
    std::set<std::string> names;
    for (const RunRecord* r : g.runs)
      for (const auto& [k, v] : r->metrics) names.insert(k);
    rows.push_back({g.scenario, g.method, g.filtered, "runs", static_cast<double>(g.runs.size()), nan, nan});
    rows.push_back({g.scenario, g.method, g.filtered, "errors", static_cast<double>(g.errors), nan, nan});
    int empty = 0;
    for (const RunRecord* r : g.runs) empty += r->selected.empty() ? 1 : 0;
    rows.push_back({g.scenario, g.method, g.filtered, "empty_selections", static_cast<double>(empty), nan, nan});
    for (const std::string& name : names) {
      const Moments m = metric_moments(g, name);
      rows.push_back({g.scenario, g.method, g.filtered, name, m.mean,
                      m.count > 1 ? m.sd / std::sqrt(static_cast<double>(m.count)) : nan, nan});
      rows.push_back({g.scenario, g.method, g.filtered, name + "_sd", m.sd, nan, nan});
    }
    if (g.runs.empty()) continue;
    const SelectionMatrix S = selection_matrix(g);
    try {
      rows.push_back({g.scenario, g.method, g.filtered, "entropy", inclusion_entropy(S), nan, nan});
    } catch (const Error&) {
    }
    rows.push_back({g.scenario, g.method, g.filtered, "entropy_sets",
                    inclusion_entropy(S, EntropyKind::Sets), nan, nan});
    if (S.runs() >= 2) {
      try {
        const StabilityEstimate st = stability(S);
        rows.push_back({g.scenario, g.method, g.filtered, "stability", st.estimate, st.lo, st.hi});
        rows.push_back({g.scenario, g.method, g.filtered, "stability_clipped", st.clipped,
                        std::clamp(st.lo, 0.0, 1.0), std::clamp(st.hi, 0.0, 1.0)});
      } catch (const Error&) {
      }
    }
    const Eigen::VectorXd freq = S.inclusion_frequency();
    for (Index j = 0; j < freq.size(); ++j)
      inc << g.scenario << ',' << g.method << ',' << (g.filtered ? 1 : 0) << ','
          << var_name(variable_names, j) << ',' << freq(j) << '\n';

    std::map<IndexList, int> counts;
    for (const RunRecord* r : g.runs) ++counts[r->selected];
    std::vector<std::pair<IndexList, int>> ranked(counts.begin(), counts.end());
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    for (std::size_t i = 0; i < ranked.size() && i < 10; ++i) {
      models << g.scenario << ',' << g.method << ',' << (g.filtered ? 1 : 0) << ',' << i + 1 << ','
             << ranked[i].first.size() << ',';
      for (std::size_t t = 0; t < ranked[i].first.size(); ++t)
        models << (t ? ";" : "") << var_name(variable_names, ranked[i].first[t]);
      models << ',' << static_cast<double>(ranked[i].second) / static_cast<double>(g.runs.size()) << '\n';
    }
    for (const RunRecord* r : g.runs)
      for (Index j : r->selected)
        sels << r->scenario << '#' << r->replication << ',' << r->label() << ','
             << var_name(variable_names, j) << ",1\n";
  }

  std::ostringstream summary;
  write_metric_table(rows, summary);
  write_csv_file(out_dir / "summary.csv", summary.str());
  write_csv_file(out_dir / "inclusion.csv", inc.str());
  write_csv_file(out_dir / "models.csv", models.str());
  write_csv_file(out_dir / "selections.csv", sels.str());
  std::ostringstream vars;
  for (const std::string& v : variable_names) vars << v << '\n';
  write_csv_file(out_dir / "variables.txt", vars.str());
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, std::ostream* log) {
  cfg.validate();
  Context ctx{cfg, variants_for(cfg), std::nullopt, std::nullopt};
  if (cfg.preset == Preset::Bodyfat1 || cfg.preset == Preset::Bodyfat2 || cfg.preset == Preset::Bodyfat3) {
    ctx.bodyfat = load_bodyfat(cfg.data);
    if (cfg.data.noise_total > ctx.bodyfat->p())
      ctx.bodyfat_noise = augment_with_noise(*ctx.bodyfat, cfg.data.noise_total, derive_seed(cfg.seed, {0x4e01}));
    else
      ctx.bodyfat_noise = ctx.bodyfat;
  }
  const std::vector<Cell> cells = build_cells(cfg, ctx);

  ExperimentResult result;
  result.out_dir = cfg.output_dir;
  result.variable_names = variable_names_for(cfg, ctx);
  fs::create_directories(result.out_dir);
  {
    std::ofstream echo(result.out_dir / "config.json", std::ios::trunc);
    echo << cfg.to_json().dump(2) << '\n';
  }

  const fs::path jsonl = result.out_dir / "records.jsonl";
  std::vector<RunRecord> existing = read_records(jsonl);
  std::set<std::string> done;
  for (const RunRecord& r : existing) done.insert(r.key());
  // Rewrite the file so that a torn trailing line does not corrupt appends.
  {
    std::ofstream out(jsonl, std::ios::trunc);
    for (const RunRecord& r : existing) out << r.to_json().dump() << '\n';
  }

  std::vector<const Cell*> todo;
  for (const Cell& c : cells) {
    bool complete = true;
    for (const Variant& v : ctx.variants) {
      RunRecord probe;
      probe.scenario = c.scenario;
      probe.method = v.method;
      probe.filtered = v.filtered;
      probe.replication = c.rep;
      if (!done.count(probe.key())) complete = false;
    }
    if (complete)
      ++result.cells_skipped;
    else
      todo.push_back(&c);
  }

  std::mutex mu;
  std::ofstream out(jsonl, std::ios::app);
  std::vector<RunRecord> fresh;
  std::atomic<std::size_t> next{0};
  std::size_t finished = 0;
  auto worker = [&]() {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= todo.size()) return;
      const auto t0 = std::chrono::steady_clock::now();
      std::vector<RunRecord> recs = run_cell(ctx, *todo[i]);
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      std::lock_guard<std::mutex> lock(mu);
      for (RunRecord& r : recs) {
        if (done.count(r.key())) continue;
        out << r.to_json().dump() << '\n';
        fresh.push_back(std::move(r));
      }
      out.flush();
      ++finished;
      if (log)
        *log << "[" << finished << "/" << todo.size() << "] " << todo[i]->scenario << " rep "
             << todo[i]->rep << " (" << std::fixed << std::setprecision(1) << secs << "s)\n"
             << std::defaultfloat << std::flush;
    }
  };
  const int nthreads = std::max(1, std::min<int>(cfg.jobs, static_cast<int>(todo.size())));
  if (nthreads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }
  out.close();
  result.cells_run = static_cast<int>(todo.size());

  // Canonical order: scenario (config order), method variant, replication.
  std::map<std::string, std::size_t> scen_order;
  for (const Cell& c : cells) scen_order.emplace(c.scenario, c.scenario_index);
  std::map<std::string, std::size_t> var_order;
  for (std::size_t i = 0; i < ctx.variants.size(); ++i)
    var_order.emplace(ctx.variants[i].method + (ctx.variants[i].filtered ? "|1" : "|0"), i);
  std::set<std::string> seen;
  for (auto* src : {&existing, &fresh})
    for (RunRecord& r : *src) {
      const auto si = scen_order.find(r.scenario);
      const auto vi = var_order.find(r.method + (r.filtered ? "|1" : "|0"));
      if (si == scen_order.end() || vi == var_order.end()) continue;
      if (!seen.insert(r.key()).second) continue;
      result.records.push_back(std::move(r));
    }
  std::sort(result.records.begin(), result.records.end(), [&](const RunRecord& a, const RunRecord& b) {
    const auto ka = std::make_tuple(scen_order.at(a.scenario), var_order.at(a.method + (a.filtered ? "|1" : "|0")), a.replication);
    const auto kb = std::make_tuple(scen_order.at(b.scenario), var_order.at(b.method + (b.filtered ? "|1" : "|0")), b.replication);
    return ka < kb;
  });
  write_aggregates(result.records, result.variable_names, result.out_dir);
  return result;
}

const std::vector<std::string>& plot_figures() {
  static const std::vector<std::string> ids{"rmse_vs_fdr", "entropy", "sensitivity_vs_fdr",
                                            "stability", "inclusion", "step_refvsdata"};
  return ids;
}

void emit_plotdata(const std::vector<RunRecord>& records, const std::string& figure, std::ostream& out) {
  if (std::find(plot_figures().begin(), plot_figures().end(), figure) == plot_figures().end())
    throw ConfigError("unknown figure id '" + figure + "'");
  const std::vector<Group> groups = group_records(records);
  out << std::setprecision(10);
  auto field = [](const Group& g, const char* k) -> std::string {
    if (!g.fields.contains(k)) return "";
    const json& v = g.fields.at(k);
    return v.is_number_integer() ? std::to_string(v.get<long long>()) : fmt_num(v.get<double>());
  };
  if (figure == "rmse_vs_fdr") {
    out << "fdr,rmse,method,n,rho,se\n";
    for (const Group& g : groups) {
      const Moments r = metric_moments(g, "rmse");
      const Moments f = metric_moments(g, "fdr");
      if (r.count == 0 || f.count == 0) continue;
      out << f.mean << ',' << r.mean << ',' << g.label() << ',' << field(g, "n") << ','
          << field(g, "rho") << ',' << r.sd << '\n';
    }
    return;
  }
  out << "x,y,group,errorbar_lo,errorbar_hi\n";
  for (const Group& g : groups) {
    if (g.runs.empty()) continue;
    const std::string grp = g.label() + "@" + g.scenario;
    if (figure == "entropy") {
      try {
        const double h = inclusion_entropy(selection_matrix(g));
        out << g.scenario << ',' << h << ',' << g.label() << ',' << h << ',' << h << '\n';
      } catch (const Error&) {
      }
    } else if (figure == "sensitivity_vs_fdr") {
      const Moments s = metric_moments(g, "sensitivity");
      const Moments f = metric_moments(g, "fdr");
      if (s.count == 0 || f.count == 0) continue;
      out << f.mean << ',' << s.mean << ',' << grp << ',' << s.mean - s.sd << ',' << s.mean + s.sd << '\n';
    } else if (figure == "stability") {
      try {
        const StabilityEstimate st = stability(selection_matrix(g));
        out << g.scenario << ',' << st.clipped << ',' << g.label() << ',' << std::clamp(st.lo, 0.0, 1.0)
            << ',' << std::clamp(st.hi, 0.0, 1.0) << '\n';
      } catch (const Error&) {
      }
    } else if (figure == "inclusion") {
      const Eigen::VectorXd freq = selection_matrix(g).inclusion_frequency();
      for (Index j = 0; j < freq.size(); ++j)
        out << j + 1 << ',' << freq(j) << ',' << grp << ',' << freq(j) << ',' << freq(j) << '\n';
    } else if (figure == "step_refvsdata") {
      const Moments noisy = metric_moments(g, "n_noisy");
      const Moments r = metric_moments(g, "rmse");
      if (noisy.count == 0 || r.count == 0) continue;
      out << noisy.mean << ',' << r.mean << ',' << grp << ',' << r.mean - r.sd << ',' << r.mean + r.sd << '\n';
    }
  }
}

fs::path emit_plotdata(const fs::path& dir, const std::string& figure) {
  if (std::find(plot_figures().begin(), plot_figures().end(), figure) == plot_figures().end())
    throw ConfigError("unknown figure id '" + figure + "'");
  const fs::path jsonl = dir / "records.jsonl";
  if (!fs::exists(jsonl)) throw DataError("no records.jsonl in " + dir.string());
  const std::vector<RunRecord> records = read_records(jsonl);
  std::ostringstream os;
  emit_plotdata(records, figure, os);
  fs::create_directories(dir / "plotdata");
  const fs::path path = dir / "plotdata" / (figure + ".csv");
  write_csv_file(path, os.str());
  return path;
}

}  // namespace refsel
