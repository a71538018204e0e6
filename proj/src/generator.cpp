#include "tablelogic/generator.hpp"

#include <algorithm>
#include <array>
#include <numeric>

namespace tablelogic {

namespace {

constexpr std::array<const char*, 12> kHeaderWords = {
    "Year",  "Team",   "Player", "Score",  "City",  "Country",
    "Rank",  "Points", "Venue",  "Result", "Notes", "Total"};

constexpr std::array<const char*, 10> kCellWords = {
    "Alpha", "Bravo", "Delta", "Echo",   "Kilo",
    "Lima",  "Oscar", "Romeo", "Sierra", "Tango"};

std::size_t draw(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  if (hi <= lo) return lo;
  return lo + static_cast<std::size_t>(rng() % (hi - lo + 1));
}

}  // namespace

GeneratedTable generate_table(std::uint64_t seed, std::size_t rows,
                              std::size_t cols) {
  GeneratorOptions opts;
  opts.min_rows = opts.max_rows = rows;
  opts.min_cols = opts.max_cols = std::max<std::size_t>(cols, 1);
  return generate_table(seed, opts);
}

GeneratedTable generate_table(std::uint64_t seed,
                              const GeneratorOptions& opts) {
  std::mt19937_64 rng(seed);
  GeneratedTable g;
  g.n_rows = draw(rng, opts.min_rows, opts.max_rows);
  g.n_cols = draw(rng, std::max<std::size_t>(opts.min_cols, 1),
                  std::max(opts.max_cols, opts.min_cols));

  std::vector<std::string> header;
  header.reserve(g.n_cols);
  for (std::size_t c = 0; c < g.n_cols; ++c) {
    header.push_back(std::string(kHeaderWords[c % kHeaderWords.size()]) +
                     (c >= kHeaderWords.size()
                          ? " " + std::to_string(c / kHeaderWords.size() + 1)
                          : ""));
  }

  g.placed.assign(g.n_rows, std::vector<std::string>(g.n_cols));
  for (std::size_t r = 0; r < g.n_rows; ++r) {
    for (std::size_t c = 0; c < g.n_cols; ++c) {
      // The r/c suffix keeps every cell unique inside this table.
      switch (rng() % 3) {
        case 0:
          g.placed[r][c] = std::to_string(1900 + rng() % 120) + "-r" +
                           std::to_string(r) + "c" + std::to_string(c);
          break;
        case 1:
          g.placed[r][c] = std::string(kCellWords[rng() % kCellWords.size()]) +
                           " " + std::to_string(r) + "." + std::to_string(c);
          break;
        default:
          g.placed[r][c] = "#" + std::to_string(r) + ":" + std::to_string(c) +
                           "/" + std::to_string(rng() % 1000);
      }
    }
  }

  if (g.n_rows > 0) {
    g.planted_value = "needle-" + std::to_string(seed % 100000);
    g.planted_col = draw(rng, 0, g.n_cols - 1);
    std::size_t k = draw(rng, 1, std::min(std::max<std::size_t>(opts.max_plant, 1), g.n_rows));
    std::vector<std::size_t> order(g.n_rows);
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = 0; i < k; ++i) {
      std::swap(order[i], order[draw(rng, i, g.n_rows - 1)]);
    }
    g.planted_rows.assign(order.begin(), order.begin() + static_cast<long>(k));
    std::sort(g.planted_rows.begin(), g.planted_rows.end());
    for (auto r : g.planted_rows) g.placed[r][g.planted_col] = g.planted_value;
  }

  g.table.name = "synthetic_" + std::to_string(seed);
  g.table.header = std::move(header);
  g.table.rows = g.placed;
  return g;
}

}  // namespace tablelogic
