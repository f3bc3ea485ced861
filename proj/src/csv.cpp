#include "dlmix/csv.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <limits>

#include "dlmix/error.hpp"

namespace dlmix::csv {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

bool is_missing_token(std::string_view s) {
  if (s.empty()) return true;
  std::string lower(s);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  return lower == "na" || lower == "nan";
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string current;
  bool quoted = false;
  for (char ch : line) {
    if (ch == '"') {
      quoted = !quoted;
    } else if (ch == ',' && !quoted) {
      fields.push_back(current);
      current.clear();
    } else {
      current.push_back(ch);
    }
  }
  fields.push_back(current);
  return fields;
}

}  // namespace

std::size_t Table::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return i;
  throw DataError("missing column '" + name + "'");
}

bool Table::has_column(const std::string& name) const {
  return std::find(header.begin(), header.end(), name) != header.end();
}

Table read_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");

  Table table;
  std::string line;
  if (!std::getline(in, line)) throw DataError("'" + path.string() + "' is empty (header row required)");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  for (const auto& field : split_line(line)) table.header.emplace_back(trim(field));

  std::size_t row_number = 1;  // header is row 1
  while (std::getline(in, line)) {
    ++row_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_line(line);
    if (fields.size() != table.header.size()) {
      throw DataError(fmt::format("'{}' row {}: expected {} fields, found {}", path.string(),
                                  row_number, table.header.size(), fields.size()));
    }
    std::vector<double> row(fields.size());
    for (std::size_t c = 0; c < fields.size(); ++c) {
      const auto cell = trim(fields[c]);
      if (is_missing_token(cell)) {
        row[c] = std::numeric_limits<double>::quiet_NaN();
        continue;
      }
      double value = 0.0;
      const char* begin = cell.data();
      const char* end = cell.data() + cell.size();
      auto [ptr, ec] = std::from_chars(begin, end, value);
      if (ec != std::errc() || ptr != end) {
        throw DataError(fmt::format("'{}' row {} column '{}': cannot parse '{}' as a number",
                                    path.string(), row_number, table.header[c],
                                    std::string(cell)));
      }
      row[c] = value;
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "NA";
  return fmt::format("{}", v);  // shortest round-trip representation
}

Writer::Writer(const std::filesystem::path& path, const std::vector<std::string>& header) {
  std::filesystem::create_directories(path.parent_path());
  out_.open(path);
  if (!out_) throw DataError("cannot write '" + path.string() + "'");
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i) out_ << ',';
    out_ << header[i];
  }
  out_ << '\n';
}

void Writer::write_row(const std::vector<double>& values) {
  write_row({}, values);
}

void Writer::write_row(const std::vector<std::string>& labels, const std::vector<double>& values) {
  bool first = true;
  for (const auto& label : labels) {
    if (!first) out_ << ',';
    out_ << label;
    first = false;
  }
  for (double v : values) {
    if (!first) out_ << ',';
    out_ << format_double(v);
    first = false;
  }
  out_ << '\n';
}

}  // namespace dlmix::csv
