// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "warp/evalkit/metrics.hpp"

namespace warp::evalkit {

/// Shortest text that reads back to the same double ("%.17g"); NaN prints as "NA".
std::string format_number(double v);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  void add_row(std::string label, const std::vector<double>& values);
};

void write_csv(std::ostream& os, const CsvTable& table);
void write_csv(const std::filesystem::path& path, const CsvTable& table);

/// Header "sequence,<names...>", one row per sequence, then the aggregate row
/// labelled "ALL". An empty window yields only the "ALL" row filled with "NA".
CsvTable report_table(const MetricReport& report);

}  // namespace warp::evalkit
