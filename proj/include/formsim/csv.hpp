#pragma once

// Minimal CSV table support for the record streams and figure datasets.
// Numbers are written with round-trip precision so replays are byte-stable.

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "formsim/numerics.hpp"

namespace formsim {

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> columns) : columns_(std::move(columns)) {}

  const std::vector<std::string>& columns() const { return columns_; }

  void add_row(const std::vector<double>& row) {
    if (row.size() != columns_.size())
      throw InvalidArgumentError("CsvWriter: row width mismatch");
    rows_.push_back(row);
  }

  std::string to_string() const {
    std::string out;
    for (size_t c = 0; c < columns_.size(); ++c) {
      out += columns_[c];
      out += (c + 1 < columns_.size()) ? ',' : '\n';
    }
    for (const auto& row : rows_) {
      for (size_t c = 0; c < row.size(); ++c) {
        out += format_double(row[c]);
        out += (c + 1 < row.size()) ? ',' : '\n';
      }
    }
    return out;
  }

  void write(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot write " + path);
    f << to_string();
  }

  size_t row_count() const { return rows_.size(); }

 private:
  std::vector<std::string> columns_;
  std::vector<std::vector<double>> rows_;
};

struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  int column_index(const std::string& name) const {
    for (size_t i = 0; i < columns.size(); ++i)
      if (columns[i] == name) return int(i);
    throw InvalidArgumentError("CsvTable: no column named " + name);
  }

  std::vector<double> column(const std::string& name) const {
    const int idx = column_index(name);
    std::vector<double> v;
    v.reserve(rows.size());
    for (const auto& r : rows) v.push_back(r[idx]);
    return v;
  }
};

inline CsvTable read_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read " + path);
  CsvTable t;
  std::string line;
  if (!std::getline(f, line)) throw ConfigError("empty csv: " + path);
  std::stringstream header(line);
  std::string cell;
  while (std::getline(header, cell, ',')) t.columns.push_back(cell);
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::vector<double> row;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    if (row.size() != t.columns.size()) throw ConfigError("ragged csv row in " + path);
    t.rows.push_back(std::move(row));
  }
  return t;
}

}  // namespace formsim
