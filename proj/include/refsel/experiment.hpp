#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "refsel/bench_config.hpp"
#include "refsel/dataset.hpp"

namespace refsel {

/// One (scenario, method, variant, replication) outcome.
struct RunRecord {
  std::string scenario;       ///< canonical key, e.g. "n=70;rho=0.3;p=1000;k=100"
  nlohmann::json fields;      ///< scenario parameters as values
  std::string method;
  bool filtered = false;
  int replication = 0;
  std::uint64_t seed = 0;
  IndexList selected;
  std::map<std::string, double> metrics;
  double wall_time = 0.0;
  std::string error;          ///< empty on success

  std::string key() const;
  std::string label() const;  ///< method, with "+ref" for filtered variants
  nlohmann::json to_json() const;
  static RunRecord from_json(const nlohmann::json& j);
};

struct ExperimentResult {
  std::vector<RunRecord> records;  ///< canonical order
  std::filesystem::path out_dir;
  int cells_run = 0;
  int cells_skipped = 0;
  std::vector<std::string> variable_names;
};

/// Loads the body-fat CSV named by the config and keeps the configured
/// predictors. Throws DataError when the file or a column is missing.
Dataset load_bodyfat(const DataConfig& data);

/// Runs every cell of the experiment, appending RunRecords to
/// <out>/records.jsonl and skipping cells already present there, then
/// rewrites the aggregate CSVs from the full record set.
ExperimentResult run_experiment(const ExperimentConfig& cfg, std::ostream* log = nullptr);

std::vector<RunRecord> read_records(const std::filesystem::path& jsonl);

/// Writes summary.csv, inclusion.csv, models.csv and selections.csv.
void write_aggregates(const std::vector<RunRecord>& records,
                      const std::vector<std::string>& variable_names,
                      const std::filesystem::path& out_dir);

/// Figure ids accepted by emit_plotdata.
const std::vector<std::string>& plot_figures();

/// Writes <dir>/plotdata/<figure>.csv from <dir>/records.jsonl and returns its path.
std::filesystem::path emit_plotdata(const std::filesystem::path& dir, const std::string& figure);
void emit_plotdata(const std::vector<RunRecord>& records, const std::string& figure,
                   std::ostream& out);

}  // namespace refsel
