#include <algorithm>
#include <fstream>
#include <locale>
#include <sstream>

#include "refsel/datagen.hpp"
#include "refsel/errors.hpp"

namespace refsel {
namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (char c : line) {
    if (c == '"') {
      quoted = !quoted;
    } else if (c == ',' && !quoted) {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  for (auto& s : out) {
    auto b = s.find_first_not_of(" \t");
    auto e = s.find_last_not_of(" \t");
    s = b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
  }
  return out;
}

}  // namespace

Dataset read_csv_dataset(const std::string& path, const CsvSpec& spec) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open data file '" + path + "'");

  std::string line;
  if (!std::getline(in, line)) throw DataError("data file '" + path + "' is empty");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  const auto header = split_line(line);

  Index target_col = -1;
  std::vector<Index> predictor_cols;
  std::vector<std::string> names;
  for (std::size_t j = 0; j < header.size(); ++j) {
    const auto& h = header[j];
    if (h == spec.target) {
      target_col = static_cast<Index>(j);
    } else if (std::find(spec.exclude.begin(), spec.exclude.end(), h) == spec.exclude.end()) {
      predictor_cols.push_back(static_cast<Index>(j));
      names.push_back(h);
    }
  }
  if (target_col < 0)
    throw DataError("target column '" + spec.target + "' not found in '" + path + "'");

  std::vector<std::vector<double>> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = split_line(line);
    if (cells.size() != header.size())
      throw DataError(path + ":" + std::to_string(line_no) + ": expected " +
                      std::to_string(header.size()) + " fields, found " +
                      std::to_string(cells.size()));
    std::vector<double> row(cells.size());
    for (std::size_t j = 0; j < cells.size(); ++j) {
      std::istringstream ss(cells[j]);
      ss.imbue(std::locale::classic());
      double v;
      if (!(ss >> v) || !(ss >> std::ws).eof())
        throw DataError(path + ":" + std::to_string(line_no) + ": non-numeric value '" +
                        cells[j] + "' in column '" + header[j] + "'");
      row[j] = v;
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw DataError("data file '" + path + "' has no data rows");

  Dataset d;
  const Index n = static_cast<Index>(rows.size());
  d.X.resize(n, static_cast<Index>(predictor_cols.size()));
  d.y.resize(n);
  for (Index i = 0; i < n; ++i) {
    d.y(i) = rows[i][target_col];
    for (std::size_t j = 0; j < predictor_cols.size(); ++j)
      d.X(i, static_cast<Index>(j)) = rows[i][predictor_cols[j]];
  }
  d.column_names = std::move(names);
  try {
    d.validate();
  } catch (const InputError& e) {
    throw DataError("data file '" + path + "': " + e.what());
  }
  return d;
}

}  // namespace refsel
