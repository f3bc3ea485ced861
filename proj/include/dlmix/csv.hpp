#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace dlmix::csv {

// In-memory numeric table. Missing cells (empty, "NA", "NaN", "nan") are
// stored as quiet NaN; any other non-numeric cell is a DataError naming the
// row and column.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  std::size_t column(const std::string& name) const;  // throws DataError if absent
  bool has_column(const std::string& name) const;
};

Table read_table(const std::filesystem::path& path);

// Row-at-a-time writer with deterministic shortest-round-trip formatting.
class Writer {
 public:
  Writer(const std::filesystem::path& path, const std::vector<std::string>& header);
  void write_row(const std::vector<double>& values);
  // Mixed rows: leading string cells (labels) followed by numeric cells.
  void write_row(const std::vector<std::string>& labels, const std::vector<double>& values);

 private:
  std::ofstream out_;
};

std::string format_double(double v);

}  // namespace dlmix::csv
