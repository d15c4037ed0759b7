// Columnar text series: a versioned header carrying the manifest hash and a
// unit-tagged column list, followed by rows of finite reals.
#pragma once

#include <string>
#include <vector>

#include "efric/core.hpp"

namespace efric::cli {

struct Column {
  std::string name;
  std::string unit;  // "1" for dimensionless
};

struct SeriesFile {
  int version = 1;
  std::string manifest_sha256;
  std::vector<Column> columns;
  std::vector<std::vector<double>> rows;

  void add_row(std::vector<double> row);
  // Index of the named column; throws SchemaMismatchError when absent.
  std::size_t column(const std::string& name) const;
  std::vector<double> values(const std::string& name) const;
};

struct SchemaMismatchError : ConfigError {
  using ConfigError::ConfigError;
};

// Parses "name[unit]".
Column parse_column(const std::string& tag);

// Rejects NaN/Inf and ragged rows.
std::string format_series(const SeriesFile& s);
void write_series(const SeriesFile& s, const std::string& path);
SeriesFile parse_series(const std::string& text);
SeriesFile read_series(const std::string& path);

}  // namespace efric::cli
