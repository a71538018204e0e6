#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "tablelogic/table.hpp"

namespace tablelogic {

/// A synthetic table plus the generator's own record of what it placed where.
/// The record is written during construction and never derived from the
/// table-model operations, so it can serve as ground truth for them.
struct GeneratedTable {
  Table table;
  std::size_t n_rows = 0;
  std::size_t n_cols = 0;
  /// cells[r][c] as placed (independent copy of the table body).
  std::vector<std::vector<std::string>> placed;
  /// A value planted in `planted_rows` at column `planted_col`; every other
  /// cell is globally unique.
  std::string planted_value;
  std::vector<std::size_t> planted_rows;
  std::size_t planted_col = 0;
};

struct GeneratorOptions {
  std::size_t min_rows = 0;
  std::size_t max_rows = 50;
  std::size_t min_cols = 1;
  std::size_t max_cols = 8;
  /// Upper bound on how many rows receive the planted value.
  std::size_t max_plant = 3;
};

/// Deterministic for a given seed. Cell values look like table content
/// (years, counts, names) but carry a unique suffix so that lookups are
/// unambiguous except for the planted value.
GeneratedTable generate_table(std::uint64_t seed,
                              const GeneratorOptions& opts = {});

/// Fixed-shape variant used by round-trip and benchmark code.
GeneratedTable generate_table(std::uint64_t seed, std::size_t rows,
                              std::size_t cols);

}  // namespace tablelogic
