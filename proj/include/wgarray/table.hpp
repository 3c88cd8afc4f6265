#pragma once

// Result tables. Doubles are printed in shortest round-trip form, so equal
// values always give equal bytes.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace wgarray {

using Cell = std::variant<std::int64_t, double, std::string>;

struct Table {
  std::string name;  ///< file stem
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;
  std::vector<std::pair<std::string, std::string>> meta;  ///< written as '#' lines

  void add_meta(std::string key, std::string value) {
    meta.emplace_back(std::move(key), std::move(value));
  }
  /// Throws std::logic_error when the row width does not match the header.
  void add_row(std::vector<Cell> row);
};

/// Shortest representation that parses back to the same double; "nan",
/// "inf" and "-inf" for non-finite values.
std::string format_number(double value);
std::string format_cell(const Cell& cell);

void write_csv(const Table& table, std::ostream& out);
void write_json(const Table& table, std::ostream& out);

}  // namespace wgarray
