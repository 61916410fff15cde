#include "adakd/metrics.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace adakd {

namespace {

void check_cell(const std::string& cell) {
  if (cell.find_first_of(",\"\n\r") != std::string::npos) {
    throw std::invalid_argument("metrics cell contains a separator: \"" + cell +
                                "\"");
  }
}

void write_row(std::ofstream& out, const std::vector<std::string>& cells) {
  for (size_t i = 0; i < cells.size(); ++i) {
    check_cell(cells[i]);
    if (i) out << ',';
    out << cells[i];
  }
  out << '\n';
}

}  // namespace

MetricsWriter::MetricsWriter(const std::string& path,
                             const std::vector<std::string>& columns)
    : path_(path), columns_(columns) {
  if (columns_.empty()) {
    throw std::invalid_argument("metrics file needs at least one column");
  }
  std::ofstream out(path_, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open metrics file " + path_);
  write_row(out, columns_);
  if (!out) throw std::runtime_error("cannot write metrics file " + path_);
}

void MetricsWriter::append(const std::vector<std::string>& cells) {
  if (cells.size() != columns_.size()) {
    throw std::invalid_argument(
        "metrics row has " + std::to_string(cells.size()) + " cells, expected " +
        std::to_string(columns_.size()));
  }
  std::ofstream out(path_, std::ios::app);
  if (!out) throw std::runtime_error("cannot append to metrics file " + path_);
  write_row(out, cells);
  if (!out) throw std::runtime_error("cannot write metrics file " + path_);
}

void MetricsWriter::flush() {
  // rows are appended with open/write/close, so everything already hit the
  // filesystem; kept for interface symmetry
}

std::string MetricsWriter::cell(double value) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

std::string MetricsWriter::cell(long value) { return std::to_string(value); }

int CsvTable::column(const std::string& name) const {
  for (size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return static_cast<int>(i);
  }
  return -1;
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open csv file " + path);
  CsvTable table;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream row(line);
    std::string cell;
    while (std::getline(row, cell, ',')) cells.push_back(cell);
    if (line.back() == ',') cells.push_back("");
    if (first) {
      table.header = std::move(cells);
      first = false;
    } else {
      if (cells.size() != table.header.size()) {
        throw std::runtime_error("csv row width mismatch in " + path);
      }
      table.rows.push_back(std::move(cells));
    }
  }
  if (first) throw std::runtime_error("csv file " + path + " has no header");
  return table;
}

}  // namespace adakd
