#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "refsel/bench_config.hpp"
#include "refsel/errors.hpp"
#include "refsel/experiment.hpp"
#include "test_util.hpp"

using namespace refsel;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("refsel_bench_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

nlohmann::json tiny_json(const fs::path& out) {
  nlohmann::json j = nlohmann::json::parse(R"({
    "preset": "custom", "replications": 3, "seed": 5,
    "methods": ["projpred", "steplm", "lasso", "locfdr"],
    "grid": {"n": [40, 60], "rho": [0.5], "p": [60], "k": [6]},
    "reference": {"warmup": 100, "draws": 100, "keep": 50},
    "projpred": {"folds": 4}, "lasso": {"folds": 4},
    "simulation": {"test_size": 100}
  })");
  j["output_dir"] = out.string();
  return j;
}

const std::vector<std::string> kAggregates{"summary.csv", "inclusion.csv", "models.csv",
                                           "selections.csv"};

void expect_same_aggregates(const fs::path& a, const fs::path& b) {
  for (const std::string& f : kAggregates) EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
}

std::vector<std::string> lines_of(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

int run_cli(const std::string& args) {
  const char* cli = std::getenv("REFSEL_CLI");
  if (!cli) return -1;
  const int status = std::system((std::string(cli) + " " + args + " >/dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -2;
}

}  // namespace

TEST(Config, Defaults) {
  const ExperimentConfig c = config_from_json({{"methods", {"lasso"}}, {"grid", {{"n", {50}}, {"rho", {0.5}}, {"p", {20}}, {"k", {5}}}}});
  EXPECT_EQ(c.replications, 100);
  EXPECT_DOUBLE_EQ(c.alpha, 0.16);
  EXPECT_EQ(c.filter, (std::vector<bool>{false, true}));
  EXPECT_EQ(c.projpred_folds, 10);
  EXPECT_EQ(c.effective_replications(), 100);
}

TEST(Config, FileMissingReplicationsGetsDefault) {
  const fs::path dir = scratch("cfg");
  write_file(dir / "c.json", "// comment\n{ \"preset\": \"sim1\", /* inline */ \"seed\": 9 }\n");
  const ExperimentConfig c = validate_config((dir / "c.json").string());
  EXPECT_EQ(c.replications, 100);
  EXPECT_DOUBLE_EQ(c.alpha, 0.16);
  EXPECT_EQ(c.seed, 9u);
  EXPECT_EQ(c.grid.p, (std::vector<Index>{70}));
}

TEST(Config, RhoOutOfRangeNamesRho) {
  nlohmann::json j = {{"preset", "sim1"}, {"grid", {{"rho", {0.3, 1.2}}}}};
  try {
    config_from_json(j);
    FAIL() << "accepted rho = 1.2";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("rho"), std::string::npos) << e.what();
  }
}

TEST(Config, UnknownKeysAndBadTypesRejected) {
  EXPECT_THROW(config_from_json({{"replicatons", 5}}), ConfigError);
  EXPECT_THROW(config_from_json({{"projpred", {{"fold", 5}}}}), ConfigError);
  EXPECT_THROW(config_from_json({{"replications", "many"}}), ConfigError);
  EXPECT_THROW(config_from_json({{"methods", {"projpred", "magic"}}}), ConfigError);
  EXPECT_THROW(config_from_json({{"scale", 0.0}}), ConfigError);
  EXPECT_THROW(validate_config("/nonexistent/refsel.json"), ConfigError);
}

TEST(Config, PresetsAndScale) {
  EXPECT_EQ(parse_preset("sim2"), Preset::Sim2);
  EXPECT_THROW(parse_preset("sim9"), ConfigError);
  const ExperimentConfig s2 = config_from_json({{"preset", "sim2"}, {"scale", 0.2}});
  EXPECT_EQ(s2.effective_replications(), 20);
  EXPECT_EQ(s2.grid.p, (std::vector<Index>{1000}));
  EXPECT_EQ(s2.grid.k, (std::vector<Index>{100}));
  const ExperimentConfig tiny = config_from_json({{"preset", "sim1"}, {"scale", 0.001}});
  EXPECT_EQ(tiny.effective_replications(), 1);
  EXPECT_EQ(preset_config(Preset::Bodyfat2).methods, (std::vector<std::string>{"steplm"}));
}

TEST(Config, EchoRoundTrips) {
  const ExperimentConfig c = config_from_json({{"preset", "sim2"}, {"seed", 3}, {"alpha", 0.2}});
  EXPECT_EQ(config_from_json(c.to_json()).to_json(), c.to_json());
}

TEST(Experiment, WritesAllOutputs) {
  const fs::path dir = scratch("outputs");
  const ExperimentResult r = run_experiment(config_from_json(tiny_json(dir)));
  for (const char* f : {"records.jsonl", "summary.csv", "inclusion.csv", "models.csv",
                        "selections.csv", "variables.txt", "config.json"})
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  EXPECT_EQ(r.cells_run, 6);
  // projpred runs filtered only; steplm, lasso and locfdr run both variants.
  EXPECT_EQ(r.records.size(), 6u * 7u);
  for (const RunRecord& rec : r.records) {
    EXPECT_TRUE(rec.error.empty()) << rec.label() << ": " << rec.error;
    EXPECT_TRUE(rec.metrics.count("fdr") && rec.metrics.count("sensitivity")) << rec.label();
  }
  const std::vector<std::string> summary = lines_of(slurp(dir / "summary.csv"));
  EXPECT_EQ(summary.at(0), "scenario,method,filtered,metric,estimate,se_or_ci_lo,ci_hi");
}

TEST(Experiment, DeterministicAcrossRuns) {
  const fs::path a = scratch("det_a"), b = scratch("det_b");
  run_experiment(config_from_json(tiny_json(a)));
  run_experiment(config_from_json(tiny_json(b)));
  expect_same_aggregates(a, b);
}

TEST(Experiment, ResumeGivesIdenticalAggregates) {
  const fs::path full = scratch("resume_full"), part = scratch("resume_part");
  run_experiment(config_from_json(tiny_json(full)));
  run_experiment(config_from_json(tiny_json(part)));
  // Simulate an interruption: keep the first records and a torn final line.
  const std::vector<std::string> lines = lines_of(slurp(part / "records.jsonl"));
  std::string kept;
  for (std::size_t i = 0; i < lines.size() / 3; ++i) kept += lines[i] + "\n";
  kept += lines[lines.size() / 3].substr(0, 25);
  write_file(part / "records.jsonl", kept);
  for (const std::string& f : kAggregates) fs::remove(part / f);

  const ExperimentResult r = run_experiment(config_from_json(tiny_json(part)));
  EXPECT_GT(r.cells_skipped, 0);
  EXPECT_GT(r.cells_run, 0);
  expect_same_aggregates(full, part);
}

TEST(Experiment, SerialAndConcurrentAgree) {
  const fs::path a = scratch("jobs1"), b = scratch("jobs3");
  nlohmann::json ja = tiny_json(a), jb = tiny_json(b);
  jb["jobs"] = 3;
  const ExperimentResult ra = run_experiment(config_from_json(ja));
  const ExperimentResult rb = run_experiment(config_from_json(jb));
  expect_same_aggregates(a, b);
  ASSERT_EQ(ra.records.size(), rb.records.size());
  for (std::size_t i = 0; i < ra.records.size(); ++i) {
    EXPECT_EQ(ra.records[i].key(), rb.records[i].key());
    EXPECT_EQ(ra.records[i].selected, rb.records[i].selected);
    EXPECT_EQ(ra.records[i].metrics, rb.records[i].metrics);
  }
}

TEST(Experiment, BodyfatMissingFileIsDataError) {
  nlohmann::json j = {{"preset", "bodyfat2"}, {"replications", 1},
                      {"data", {{"path", "/nonexistent/bodyfat.csv"}}},
                      {"output_dir", scratch("nofile").string()}};
  EXPECT_THROW(run_experiment(config_from_json(j)), DataError);
}

TEST(Plotdata, RmseVsFdrSchemaAndSd) {
  const fs::path dir = scratch("plot");
  const ExperimentResult r = run_experiment(config_from_json(tiny_json(dir)));
  const fs::path csv = emit_plotdata(dir, "rmse_vs_fdr");
  EXPECT_EQ(csv, dir / "plotdata" / "rmse_vs_fdr.csv");
  const std::vector<std::string> lines = lines_of(slurp(csv));
  ASSERT_GT(lines.size(), 1u);
  EXPECT_EQ(lines[0], "fdr,rmse,method,n,rho,se");

  // Error bars are one standard deviation of the per-run RMSE.
  std::vector<double> rmse;
  for (const RunRecord& rec : r.records)
    if (rec.method == "steplm" && !rec.filtered && rec.fields["n"] == 40) rmse.push_back(rec.metrics.at("rmse"));
  ASSERT_EQ(rmse.size(), 3u);
  bool found = false;
  for (const std::string& l : lines) {
    if (l.find(",steplm,40,") == std::string::npos) continue;
    std::vector<std::string> cells;
    std::stringstream ss(l);
    for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
    ASSERT_EQ(cells.size(), 6u);
    EXPECT_NEAR(std::stod(cells[1]), testutil::mean(rmse), 1e-8);
    EXPECT_NEAR(std::stod(cells[5]), testutil::sd(rmse), 1e-8);
    found = true;
  }
  EXPECT_TRUE(found);
}

TEST(Plotdata, OtherFiguresUseTidyColumns) {
  const fs::path dir = scratch("plot_tidy");
  run_experiment(config_from_json(tiny_json(dir)));
  for (const std::string& fig : plot_figures()) {
    if (fig == "rmse_vs_fdr") continue;
    const std::vector<std::string> lines = lines_of(slurp(emit_plotdata(dir, fig)));
    ASSERT_FALSE(lines.empty()) << fig;
    EXPECT_EQ(lines[0], "x,y,group,errorbar_lo,errorbar_hi") << fig;
  }
}

TEST(Plotdata, EmptyInputGivesHeaderOnly) {
  std::ostringstream os;
  emit_plotdata({}, "rmse_vs_fdr", os);
  EXPECT_EQ(os.str(), "fdr,rmse,method,n,rho,se\n");
  std::ostringstream os2;
  emit_plotdata({}, "stability", os2);
  EXPECT_EQ(os2.str(), "x,y,group,errorbar_lo,errorbar_hi\n");
}

TEST(Plotdata, UnknownFigure) {
  std::ostringstream os;
  EXPECT_THROW(emit_plotdata({}, "fig99", os), ConfigError);
}

TEST(Cli, ExitCodes) {
  if (!std::getenv("REFSEL_CLI")) GTEST_SKIP() << "REFSEL_CLI not set";
  const fs::path dir = scratch("cli");
  nlohmann::json ok = tiny_json(dir / "out");
  ok["replications"] = 1;
  ok["grid"]["n"] = {40};
  write_file(dir / "ok.json", ok.dump());
  write_file(dir / "bad.json", R"({"preset": "sim1", "grid": {"rho": [1.2]}})");
  write_file(dir / "nodata.json",
             R"({"preset": "bodyfat2", "replications": 1, "data": {"path": "/nonexistent.csv"}, "output_dir": ")" +
                 (dir / "nodata").string() + "\"}");

  EXPECT_EQ(run_cli("run --config " + (dir / "ok.json").string() + " -q"), 0);
  EXPECT_TRUE(fs::exists(dir / "out" / "summary.csv"));
  EXPECT_EQ(run_cli("run --config " + (dir / "ok.json").string() + " --scale 0.5 --jobs 2 --seed 3 --out " +
                    (dir / "out2").string() + " -q"),
            0);
  EXPECT_TRUE(fs::exists(dir / "out2" / "records.jsonl"));
  EXPECT_EQ(run_cli("run --config " + (dir / "bad.json").string()), 2);
  EXPECT_EQ(run_cli("run --config " + (dir / "nodata.json").string()), 3);
  EXPECT_EQ(run_cli("run"), 2);
  EXPECT_EQ(run_cli("plotdata --figure rmse_vs_fdr --in " + (dir / "out").string()), 0);
  EXPECT_TRUE(fs::exists(dir / "out" / "plotdata" / "rmse_vs_fdr.csv"));
  EXPECT_EQ(run_cli("plotdata --figure nope --in " + (dir / "out").string()), 2);
  EXPECT_EQ(run_cli("--help"), 0);
}
