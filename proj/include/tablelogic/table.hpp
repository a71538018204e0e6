#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace tablelogic {

/// A rectangular table: name, header labels, and data rows of text cells.
///
/// Construct through `Table::make` (or `validate` after aggregate init) to get
/// the rectangularity check. Duplicate header labels are legal; they show up
/// as warnings from `validate`.
struct Table {
  std::string name;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  static Table make(std::string name, std::vector<std::string> header,
                    std::vector<std::vector<std::string>> rows);

  bool operator==(const Table&) const = default;
};

struct CellAddress {
  std::size_t row = 0;  // data rows, header excluded
  std::size_t col = 0;

  bool operator==(const CellAddress&) const = default;
};

/// Checks the table invariants. Throws `TableError` on a hard violation and
/// returns human-readable warnings (duplicate header labels) otherwise.
std::vector<std::string> validate(const Table& table);

/// Dictionary-literal rendering embedded in prompts:
/// {'header': [...], 'rows': [[...], ...], 'name': '...'}
std::string serialize_dict_format(const Table& table);

/// Inverse of `serialize_dict_format`. Also accepts double-quoted strings so
/// that hand-written fixtures in Python repr style load. Throws `TableError`.
Table parse_dict_format(std::string_view text);

std::size_t count_rows(const Table& table);
std::size_t count_columns(const Table& table);

/// Throws `std::out_of_range` naming the offending index.
const std::string& value_lookup(const Table& table, CellAddress addr);

/// Trim + case-fold. No numeric coercion.
std::string normalize_cell(std::string_view value);

/// Sorted, duplicate-free 0-based data-row indices whose cells match `value`.
std::vector<std::size_t> row_find(const Table& table, std::string_view value);

/// Sorted, duplicate-free 0-based column indices whose header label or any
/// cell matches `value`.
std::vector<std::size_t> column_find(const Table& table,
                                     std::string_view value);

/// "The table has R rows and C columns. Columns: A, B."
std::string structure_description(const Table& table);

}  // namespace tablelogic
