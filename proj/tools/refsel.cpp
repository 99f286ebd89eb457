// refsel: run selection experiments and emit tidy plot data.
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "refsel/bench_config.hpp"
#include "refsel/errors.hpp"
#include "refsel/experiment.hpp"

namespace {

constexpr int kConfigError = 2;
constexpr int kDataError = 3;

std::string figure_list() {
  std::string s;
  for (const std::string& f : refsel::plot_figures()) s += (s.empty() ? "" : ", ") + f;
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reference-model variable selection experiments"};
  app.footer(refsel::config_keys_help());
  app.require_subcommand(1);

  std::string config_path, preset, out_dir;
  std::optional<double> scale;
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
  bool quiet = false;
  CLI::App* run = app.add_subcommand("run", "Run an experiment and write records plus aggregate CSVs");
  run->add_option("--config", config_path, "Experiment config file")->required();
  run->add_option("--preset", preset, "Override the preset named in the config");
  run->add_option("--scale", scale, "Replication scale factor");
  run->add_option("--out", out_dir, "Output directory");
  run->add_option("--seed", seed, "Master seed");
  run->add_option("--jobs", jobs, "Worker threads");
  run->add_flag("-q,--quiet", quiet, "No per-cell progress on stderr");

  std::string figure, in_dir;
  CLI::App* plot = app.add_subcommand("plotdata", "Write <in>/plotdata/<figure>.csv from a finished run");
  plot->add_option("--figure", figure, "One of: " + figure_list())->required();
  plot->add_option("--in", in_dir, "Directory holding records.jsonl")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kConfigError;
  }

  try {
    if (*run) {
      nlohmann::json j = refsel::read_config_json(config_path);
      if (!preset.empty()) j["preset"] = preset;
      if (scale) j["scale"] = *scale;
      if (!out_dir.empty()) j["output_dir"] = out_dir;
      if (seed) j["seed"] = *seed;
      if (jobs) j["jobs"] = *jobs;
      const refsel::ExperimentConfig cfg = refsel::config_from_json(j);
      std::cerr << "effective config:\n" << cfg.to_json().dump(2) << '\n';
      const refsel::ExperimentResult res = refsel::run_experiment(cfg, quiet ? nullptr : &std::cerr);
      std::size_t errors = 0;
      for (const auto& r : res.records) errors += r.error.empty() ? 0 : 1;
      std::cout << "cells run: " << res.cells_run << ", resumed: " << res.cells_skipped
                << ", records: " << res.records.size() << ", failed records: " << errors << '\n'
                << "results in " << res.out_dir.string() << '\n';
    } else if (*plot) {
      std::cout << refsel::emit_plotdata(in_dir, figure).string() << '\n';
    }
  } catch (const refsel::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const refsel::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kDataError;
  } catch (const refsel::InputError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kDataError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
