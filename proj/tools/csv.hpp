#pragma once

#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "errors.hpp"

namespace ctsmooth::cli {

// Comma-separated numeric table. '#' lines before the header carry
// `key = value` metadata; the header row is mandatory.
struct CsvTable {
  std::map<std::string, std::string> meta;
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  // Index of a named column; throws DataError when absent.
  std::size_t column(const std::string& name) const;
  std::vector<double> column_values(const std::string& name) const;
};

CsvTable read_csv(std::istream& in, const std::string& source = "<stream>");
CsvTable read_csv_file(const std::string& path);

// Numbers are written with 17 significant digits so values round-trip.
void write_csv(std::ostream& out, const std::vector<std::pair<std::string, std::string>>& meta,
               const std::vector<std::string>& header, const std::vector<std::vector<double>>& rows);
void write_csv_file(const std::string& path, const std::vector<std::pair<std::string, std::string>>& meta,
                    const std::vector<std::string>& header, const std::vector<std::vector<double>>& rows);

std::string format_number(double v);

}  // namespace ctsmooth::cli
