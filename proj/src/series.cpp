#include "efric/series.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace efric::cli {

namespace {
constexpr const char* kMagic = "# efric-series v";

bool starts_with(const std::string& s, const std::string& p) { return s.compare(0, p.size(), p) == 0; }
}  // namespace

void SeriesFile::add_row(std::vector<double> row) {
  if (row.size() != columns.size())
    throw SchemaMismatchError("row has " + std::to_string(row.size()) + " values for " +
                              std::to_string(columns.size()) + " columns");
  for (std::size_t i = 0; i < row.size(); ++i)
    if (!std::isfinite(row[i]))
      throw NumericalError("non-finite value in column '" + columns[i].name + "' of row " +
                           std::to_string(rows.size()));
  rows.push_back(std::move(row));
}

std::size_t SeriesFile::column(const std::string& name) const {
  for (std::size_t i = 0; i < columns.size(); ++i)
    if (columns[i].name == name) return i;
  throw SchemaMismatchError("series has no column '" + name + "'");
}

std::vector<double> SeriesFile::values(const std::string& name) const {
  std::size_t c = column(name);
  std::vector<double> v;
  v.reserve(rows.size());
  for (const auto& r : rows) v.push_back(r[c]);
  return v;
}

Column parse_column(const std::string& tag) {
  auto open = tag.find('[');
  if (open == std::string::npos || open == 0 || tag.back() != ']' || open + 2 > tag.size() - 1)
    throw SchemaMismatchError("column '" + tag + "' lacks a unit tag");
  return {tag.substr(0, open), tag.substr(open + 1, tag.size() - open - 2)};
}

std::string format_series(const SeriesFile& s) {
  std::string out = kMagic + std::to_string(s.version) + "\n";
  out += "# manifest_sha256: " + s.manifest_sha256 + "\n# columns:";
  for (const auto& c : s.columns) {
    if (c.name.empty() || c.unit.empty()) throw SchemaMismatchError("every column needs a name and a unit");
    out += " " + c.name + "[" + c.unit + "]";
  }
  out += "\n";
  char buf[32];
  for (const auto& r : s.rows) {
    if (r.size() != s.columns.size()) throw SchemaMismatchError("ragged row");
    for (std::size_t i = 0; i < r.size(); ++i) {
      if (!std::isfinite(r[i])) throw NumericalError("non-finite value in column '" + s.columns[i].name + "'");
      std::snprintf(buf, sizeof buf, "%.17g", r[i]);
      if (i) out += '\t';
      out += buf;
    }
    out += '\n';
  }
  return out;
}

void write_series(const SeriesFile& s, const std::string& path) {
  std::string text = format_series(s);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write '" + path + "'");
  f << text;
  if (!f) throw Error("write failed for '" + path + "'");
}

SeriesFile parse_series(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  SeriesFile s;
  if (!std::getline(in, line) || !starts_with(line, kMagic)) throw SchemaMismatchError("missing series header");
  s.version = std::stoi(line.substr(std::string(kMagic).size()));
  if (s.version != 1) throw SchemaMismatchError("unsupported series version " + std::to_string(s.version));
  const std::string hash_tag = "# manifest_sha256: ";
  if (!std::getline(in, line) || !starts_with(line, hash_tag)) throw SchemaMismatchError("missing manifest hash");
  s.manifest_sha256 = line.substr(hash_tag.size());
  const std::string col_tag = "# columns:";
  if (!std::getline(in, line) || !starts_with(line, col_tag)) throw SchemaMismatchError("missing column list");
  std::istringstream cols(line.substr(col_tag.size()));
  for (std::string t; cols >> t;) s.columns.push_back(parse_column(t));
  long row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    std::vector<double> v;
    std::size_t pos = 0;
    while (pos <= line.size()) {
      std::size_t tab = line.find('\t', pos);
      std::string cell = line.substr(pos, tab == std::string::npos ? std::string::npos : tab - pos);
      char* end = nullptr;
      double d = std::strtod(cell.c_str(), &end);
      if (cell.empty() || *end != '\0') throw SchemaMismatchError("row " + std::to_string(row) + ": bad value '" + cell + "'");
      v.push_back(d);
      if (tab == std::string::npos) break;
      pos = tab + 1;
    }
    s.add_row(std::move(v));
  }
  return s;
}

SeriesFile read_series(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot read series '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_series(ss.str());
}

}  // namespace efric::cli
