#include "csv.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace ctsmooth::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

std::size_t CsvTable::column(const std::string& name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw DataError("csv: missing column '" + name + "'");
  return static_cast<std::size_t>(it - header.begin());
}

std::vector<double> CsvTable::column_values(const std::string& name) const {
  const std::size_t c = column(name);
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(r[c]);
  return out;
}

CsvTable read_csv(std::istream& in, const std::string& source) {
  CsvTable t;
  std::string line;
  int lineno = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string text = trim(line);
    if (text.empty()) continue;
    if (!have_header) {
      if (text[0] == '#') {
        const auto eq = text.find('=');
        if (eq != std::string::npos) t.meta[trim(text.substr(1, eq - 1))] = trim(text.substr(eq + 1));
        continue;
      }
      t.header = split(text);
      have_header = true;
      continue;
    }
    const auto cells = split(text);
    const std::string where = source + " row " + std::to_string(t.rows.size() + 1) + " (line " +
                              std::to_string(lineno) + ")";
    if (cells.size() != t.header.size()) {
      throw DataError(where + ": expected " + std::to_string(t.header.size()) + " fields, got " +
                      std::to_string(cells.size()));
    }
    std::vector<double> row(cells.size());
    for (std::size_t i = 0; i < cells.size(); ++i) {
      const std::string& c = cells[i];
      const char* end = c.data() + c.size();
      auto [ptr, ec] = std::from_chars(c.data(), end, row[i]);
      if (c.empty() || ec != std::errc() || ptr != end) {
        throw DataError(where + ": bad number '" + c + "' in column '" + t.header[i] + "'");
      }
    }
    t.rows.push_back(std::move(row));
  }
  if (!have_header) throw DataError(source + ": missing header row");
  return t;
}

CsvTable read_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  return read_csv(in, path);
}

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_csv(std::ostream& out, const std::vector<std::pair<std::string, std::string>>& meta,
               const std::vector<std::string>& header, const std::vector<std::vector<double>>& rows) {
  for (const auto& [k, v] : meta) out << "# " << k << " = " << v << '\n';
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << '\n';
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.size(); ++i) out << (i ? "," : "") << format_number(r[i]);
    out << '\n';
  }
}

void write_csv_file(const std::string& path, const std::vector<std::pair<std::string, std::string>>& meta,
                    const std::vector<std::string>& header, const std::vector<std::vector<double>>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path + "'");
  write_csv(out, meta, header, rows);
  if (!out) throw DataError("write failed for '" + path + "'");
}

}  // namespace ctsmooth::cli
