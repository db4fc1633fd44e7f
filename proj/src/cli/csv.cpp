#include "genriesz/cli.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <sstream>

namespace genriesz::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
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

std::string unquote(const std::string& s) {
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') return s.substr(1, s.size() - 2);
  return s;
}

[[noreturn]] void fail(const std::string& source, Index line, const std::string& what) {
  throw InvalidArgument(source + ":" + std::to_string(line) + ": " + what);
}

}  // namespace

Index CsvTable::column(const std::string& name) const {
  for (std::size_t j = 0; j < header.size(); ++j)
    if (header[j] == name) return static_cast<Index>(j);
  throw InvalidArgument("missing column '" + name + "'");
}

CsvTable parse_csv(std::istream& in, const std::string& source) {
  CsvTable table;
  std::string line;
  Index lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (lineno == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0)
      line.erase(0, 3);
    if (!trim(line).empty()) break;
  }
  if (trim(line).empty()) throw InvalidArgument(source + ": empty file (a header row is required)");
  for (auto& name : split(line)) table.header.push_back(unquote(name));
  for (std::size_t j = 0; j < table.header.size(); ++j) {
    if (table.header[j].empty()) fail(source, lineno, "empty column name");
    for (std::size_t k = 0; k < j; ++k)
      if (table.header[k] == table.header[j])
        fail(source, lineno, "duplicate column '" + table.header[j] + "'");
  }
  const std::size_t cols = table.header.size();

  std::vector<double> cells;
  Index rows = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto fields = split(line);
    if (fields.size() != cols)
      fail(source, lineno,
           "expected " + std::to_string(cols) + " fields, found " + std::to_string(fields.size()));
    for (std::size_t j = 0; j < cols; ++j) {
      const std::string& f = fields[j];
      if (f.empty()) fail(source, lineno, "missing value in column '" + table.header[j] + "'");
      double v = 0.0;
      const char* first = f.data();
      if (*first == '+') ++first;
      const auto [ptr, ec] = std::from_chars(first, f.data() + f.size(), v);
      if (ec != std::errc() || ptr != f.data() + f.size())
        fail(source, lineno, "column '" + table.header[j] + "': cannot parse '" + f + "' as a number");
      if (!std::isfinite(v))
        fail(source, lineno, "column '" + table.header[j] + "': non-finite value '" + f + "'");
      cells.push_back(v);
    }
    table.lines.push_back(lineno);
    ++rows;
  }
  table.values.resize(rows, static_cast<Index>(cols));
  for (Index i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j)
      table.values(i, static_cast<Index>(j)) = cells[static_cast<std::size_t>(i) * cols + j];
  return table;
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open data file '" + path + "'");
  return parse_csv(in, path);
}

}  // namespace genriesz::cli
