#pragma once

#include <string>
#include <vector>

namespace adakd {

/// Append-only CSV with a fixed column set. The header is written on
/// construction; every row must carry exactly one cell per column. Numeric
/// cells use a 17-significant-digit format so parsed values round-trip
/// bitwise. Cells may not contain separators/quotes/newlines (the format is
/// deliberately quote-free).
class MetricsWriter {
 public:
  MetricsWriter(const std::string& path,
                const std::vector<std::string>& columns);

  void append(const std::vector<std::string>& cells);
  void flush();

  const std::string& path() const { return path_; }
  const std::vector<std::string>& columns() const { return columns_; }

  static std::string cell(double value);
  static std::string cell(long value);

 private:
  std::string path_;
  std::vector<std::string> columns_;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const;  // -1 when absent
};

CsvTable read_csv(const std::string& path);

}  // namespace adakd
