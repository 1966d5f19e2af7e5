// SPDX-License-Identifier: Apache-2.0
#include "warp/evalkit/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <ostream>

#include "warp/errors.hpp"

namespace warp::evalkit {

std::string format_number(double v) {
  if (std::isnan(v)) return "NA";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

void CsvTable::add_row(std::string label, const std::vector<double>& values) {
  std::vector<std::string> row{std::move(label)};
  for (double v : values) row.push_back(format_number(v));
  rows.push_back(std::move(row));
}

void write_csv(std::ostream& os, const CsvTable& table) {
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) os << (i ? "," : "") << cells[i];
    os << '\n';
  };
  line(table.header);
  for (const auto& r : table.rows) {
    require(r.size() == table.header.size(), "write_csv: row width differs from header");
    line(r);
  }
}

void write_csv(const std::filesystem::path& path, const CsvTable& table) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path.string());
  write_csv(os, table);
  if (!os) throw IoError("write failed for " + path.string());
}

CsvTable report_table(const MetricReport& report) {
  CsvTable t;
  t.header.push_back("sequence");
  for (const auto& n : report.names) t.header.push_back(n);
  if (!report.applicable) {
    t.add_row("ALL", std::vector<double>(report.names.size(), std::nan("")));
    return t;
  }
  for (std::size_t i = 0; i < report.per_sequence.size(); ++i) t.add_row(std::to_string(i), report.per_sequence[i]);
  t.add_row("ALL", report.aggregate);
  return t;
}

}  // namespace warp::evalkit
