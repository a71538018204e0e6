#include "tablelogic/table.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <stdexcept>

#include "tablelogic/errors.hpp"
#include "tablelogic/text.hpp"

namespace tablelogic {

Table Table::make(std::string name, std::vector<std::string> header,
                  std::vector<std::vector<std::string>> rows) {
  Table t{std::move(name), std::move(header), std::move(rows)};
  validate(t);
  return t;
}

std::vector<std::string> validate(const Table& table) {
  if (table.header.empty()) {
    throw TableError("table '" + table.name + "': header is empty");
  }
  for (std::size_t c = 0; c < table.header.size(); ++c) {
    if (text::trim(table.header[c]).empty()) {
      throw TableError("table '" + table.name + "': header label " +
                       std::to_string(c) + " is empty");
    }
  }
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    if (table.rows[r].size() != table.header.size()) {
      throw TableError("table '" + table.name + "': row " + std::to_string(r) +
                       " has " + std::to_string(table.rows[r].size()) +
                       " cells, header has " +
                       std::to_string(table.header.size()));
    }
  }
  std::vector<std::string> warnings;
  std::set<std::string> seen;
  for (const auto& label : table.header) {
    if (!seen.insert(label).second) {
      warnings.push_back("table '" + table.name + "': duplicate header label '" +
                         label + "'");
    }
  }
  return warnings;
}

namespace {

void append_quoted(std::string& out, std::string_view s) {
  out += '\'';
  for (char ch : s) {
    switch (ch) {
      case '\\': out += "\\\\"; break;
      case '\'': out += "\\'"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '\t': out += "\\t"; break;
      default: out += ch;
    }
  }
  out += '\'';
}

void append_list(std::string& out, const std::vector<std::string>& items) {
  out += '[';
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += ", ";
    append_quoted(out, items[i]);
  }
  out += ']';
}

// Recursive-descent reader for the restricted literal grammar produced above.
class DictReader {
 public:
  explicit DictReader(std::string_view src) : src_(src) {}

  Table read() {
    Table t;
    bool have_header = false, have_rows = false, have_name = false;
    expect('{');
    skip_ws();
    if (peek() != '}') {
      for (;;) {
        std::string key = read_string();
        expect(':');
        if (key == "header") {
          t.header = read_string_list();
          have_header = true;
        } else if (key == "rows") {
          expect('[');
          skip_ws();
          if (peek() != ']') {
            for (;;) {
              t.rows.push_back(read_string_list());
              skip_ws();
              if (peek() == ',') { ++pos_; continue; }
              break;
            }
          }
          expect(']');
          have_rows = true;
        } else if (key == "name") {
          t.name = read_string();
          have_name = true;
        } else {
          fail("unexpected key '" + key + "'");
        }
        skip_ws();
        if (peek() == ',') { ++pos_; continue; }
        break;
      }
    }
    expect('}');
    skip_ws();
    if (pos_ != src_.size()) fail("trailing characters");
    if (!have_header || !have_rows || !have_name) {
      fail("missing one of 'header', 'rows', 'name'");
    }
    validate(t);
    return t;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw TableError("dict-format parse error at offset " +
                     std::to_string(pos_) + ": " + what);
  }

  char peek() const { return pos_ < src_.size() ? src_[pos_] : '\0'; }

  void skip_ws() {
    while (pos_ < src_.size() &&
           std::isspace(static_cast<unsigned char>(src_[pos_]))) {
      ++pos_;
    }
  }

  void expect(char ch) {
    skip_ws();
    if (peek() != ch) fail(std::string("expected '") + ch + "'");
    ++pos_;
  }

  std::string read_string() {
    skip_ws();
    char quote = peek();
    if (quote != '\'' && quote != '"') fail("expected string literal");
    ++pos_;
    std::string out;
    while (pos_ < src_.size() && src_[pos_] != quote) {
      char ch = src_[pos_++];
      if (ch == '\\') {
        if (pos_ >= src_.size()) fail("dangling escape");
        char esc = src_[pos_++];
        switch (esc) {
          case 'n': out += '\n'; break;
          case 'r': out += '\r'; break;
          case 't': out += '\t'; break;
          default: out += esc;
        }
      } else {
        out += ch;
      }
    }
    if (pos_ >= src_.size()) fail("unterminated string");
    ++pos_;
    return out;
  }

  std::vector<std::string> read_string_list() {
    std::vector<std::string> items;
    expect('[');
    skip_ws();
    if (peek() != ']') {
      for (;;) {
        items.push_back(read_string());
        skip_ws();
        if (peek() == ',') { ++pos_; continue; }
        break;
      }
    }
    expect(']');
    return items;
  }

  std::string_view src_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_dict_format(const Table& table) {
  std::string out = "{'header': ";
  append_list(out, table.header);
  out += ", 'rows': [";
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    if (r) out += ", ";
    append_list(out, table.rows[r]);
  }
  out += "], 'name': ";
  append_quoted(out, table.name);
  out += '}';
  return out;
}

Table parse_dict_format(std::string_view text) { return DictReader(text).read(); }

std::size_t count_rows(const Table& table) { return table.rows.size(); }

std::size_t count_columns(const Table& table) { return table.header.size(); }

const std::string& value_lookup(const Table& table, CellAddress addr) {
  if (addr.row >= table.rows.size()) {
    throw std::out_of_range("row index " + std::to_string(addr.row) +
                            " out of range (table has " +
                            std::to_string(table.rows.size()) + " rows)");
  }
  if (addr.col >= table.header.size()) {
    throw std::out_of_range("column index " + std::to_string(addr.col) +
                            " out of range (table has " +
                            std::to_string(table.header.size()) + " columns)");
  }
  return table.rows[addr.row][addr.col];
}

std::string normalize_cell(std::string_view value) {
  return text::to_lower(text::trim(value));
}

namespace {

// normalize_cell(cell) == needle, where needle is already normalized.
bool matches_normalized(std::string_view cell, std::string_view needle) {
  cell = text::trim(cell);
  if (cell.size() != needle.size()) return false;
  for (std::size_t i = 0; i < cell.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(cell[i])) !=
        static_cast<unsigned char>(needle[i])) {
      return false;
    }
  }
  return true;
}

}  // namespace

std::vector<std::size_t> row_find(const Table& table, std::string_view value) {
  const std::string needle = normalize_cell(value);
  std::vector<std::size_t> hits;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    if (std::any_of(row.begin(), row.end(), [&](const std::string& cell) {
          return matches_normalized(cell, needle);
        })) {
      hits.push_back(r);
    }
  }
  return hits;
}

std::vector<std::size_t> column_find(const Table& table,
                                     std::string_view value) {
  const std::string needle = normalize_cell(value);
  std::vector<std::size_t> hits;
  for (std::size_t c = 0; c < table.header.size(); ++c) {
    bool match = matches_normalized(table.header[c], needle);
    for (std::size_t r = 0; !match && r < table.rows.size(); ++r) {
      match = matches_normalized(table.rows[r][c], needle);
    }
    if (match) hits.push_back(c);
  }
  return hits;
}

std::string structure_description(const Table& table) {
  std::string out = "The table has " + std::to_string(count_rows(table)) +
                    " rows and " + std::to_string(count_columns(table)) +
                    " columns. Columns: ";
  for (std::size_t c = 0; c < table.header.size(); ++c) {
    if (c) out += ", ";
    out += table.header[c];
  }
  out += '.';
  return out;
}

}  // namespace tablelogic
