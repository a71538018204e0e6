#include "tablelogic/report.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <tuple>

#include <fmt/format.h>

#include "tablelogic/errors.hpp"
#include "tablelogic/text.hpp"

namespace tablelogic {

namespace fs = std::filesystem;
using nlohmann::json;

double round_to(double value, int decimals) {
  const double scale = std::pow(10.0, decimals);
  // The nudge absorbs representation error such as 0.0779999... for 0.078.
  const double scaled = value * scale;
  const double nudged = scaled + std::copysign(1e-9 * std::max(1.0, std::fabs(scaled)), scaled);
  return std::round(nudged) / scale;
}

std::string format_accuracy(double value) { return fmt::format("{:.3f}", round_to(value, 3)); }

Delta delta_vs_vanilla(double strategy_acc, double vanilla_acc) {
  Delta d;
  d.points = round_to((strategy_acc - vanilla_acc) * 100.0, 1);
  if (d.points == 0.0) d.points = 0.0;  // drop negative zero
  if (d.points > 0) {
    d.direction = Direction::up;
    d.label = fmt::format("↑{:.1f}%", d.points);
  } else if (d.points < 0) {
    d.direction = Direction::down;
    d.label = fmt::format("↓{:.1f}%", -d.points);
  } else {
    d.label = "0.0%";
  }
  return d;
}

GroupGap group_average_and_gap(const std::vector<double>& bigger,
                               const std::vector<double>& smaller) {
  if (bigger.empty() || smaller.empty()) {
    throw EvalError("group_average_and_gap needs non-empty groups");
  }
  auto mean = [](const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  };
  GroupGap g;
  g.bigger_avg = round_to(mean(bigger), 3);
  g.smaller_avg = round_to(mean(smaller), 3);
  g.gap = round_to(g.bigger_avg - g.smaller_avg, 3);
  return g;
}

// ---------------------------------------------------------------------------

namespace {

using Key3 = std::tuple<std::string, std::string, std::string>;

std::map<Key3, double> index_accuracy(const std::vector<AccuracyReport>& reports) {
  std::map<Key3, double> idx;
  for (const auto& r : reports) {
    if (auto a = r.accuracy()) idx[{r.dataset_id, r.model, r.strategy}] = *a;
  }
  return idx;
}

std::string md_row(const std::vector<std::string>& cells) {
  std::string out = "|";
  for (const auto& c : cells) out += " " + c + " |";
  return out + "\n";
}

std::string md_rule(std::size_t n) {
  std::string out = "|";
  for (std::size_t i = 0; i < n; ++i) out += " --- |";
  return out + "\n";
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::string> parse_csv_line(std::string_view line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

constexpr std::string_view kCsvHeader =
    "dataset,model,strategy,variant,n_total,n_correct,n_unevaluated,accuracy";

}  // namespace

std::string strategy_table_markdown(const std::vector<AccuracyReport>& reports,
                                    const StrategyTableSpec& spec) {
  const auto acc = index_accuracy(reports);
  std::vector<std::string> head = {"Dataset"};
  for (const auto& m : spec.models) {
    for (const auto& s : spec.strategies) head.push_back(m + " " + s);
  }
  std::string out = md_row(head) + md_rule(head.size());
  for (const auto& d : spec.datasets) {
    std::vector<std::string> row = {d};
    for (const auto& m : spec.models) {
      std::optional<double> base;
      if (!spec.strategies.empty()) {
        if (auto it = acc.find({d, m, spec.strategies.front()}); it != acc.end()) base = it->second;
      }
      for (std::size_t i = 0; i < spec.strategies.size(); ++i) {
        auto it = acc.find({d, m, spec.strategies[i]});
        if (it == acc.end()) {
          row.push_back("-");
          continue;
        }
        std::string cell = format_accuracy(it->second);
        if (i > 0 && base) cell += " " + delta_vs_vanilla(it->second, *base).label;
        row.push_back(std::move(cell));
      }
    }
    out += md_row(row);
  }
  return out;
}

std::string augmentation_table_markdown(const std::vector<AccuracyReport>& reports,
                                        const std::vector<std::string>& datasets,
                                        const std::vector<std::string>& models) {
  static const std::vector<std::pair<std::string, std::string>> kColumns = {
      {"vanilla", "Vanilla"},
      {"vanilla_with_structure", "With Table Structure"},
      {"vanilla_with_column_row", "With Column and Row"},
      {"vanilla_with_aggregation", "With Aggregation"}};
  const auto acc = index_accuracy(reports);
  std::vector<std::string> head = {"Dataset", "Model"};
  for (const auto& [_, title] : kColumns) head.push_back(title);
  std::string out = md_row(head) + md_rule(head.size());
  for (const auto& d : datasets) {
    for (const auto& m : models) {
      std::vector<std::string> row = {d, m};
      for (const auto& [strategy, _] : kColumns) {
        auto it = acc.find({d, m, strategy});
        row.push_back(it == acc.end() ? "-" : format_accuracy(it->second));
      }
      out += md_row(row);
    }
  }
  return out;
}

std::string gap_table_markdown(const std::vector<GapRow>& rows) {
  std::vector<std::string> head = {""};
  std::vector<std::string> big = {"Bigger LMs"}, small = {"Smaller LMs"}, gaps = {"Gaps"};
  for (const auto& r : rows) {
    head.push_back(r.task);
    big.push_back(format_accuracy(r.gap.bigger_avg));
    small.push_back(format_accuracy(r.gap.smaller_avg));
    gaps.push_back(format_accuracy(r.gap.gap));
  }
  return md_row(head) + md_rule(head.size()) + md_row(big) + md_row(small) + md_row(gaps);
}

// ---------------------------------------------------------------------------

ReportFormat parse_report_format(std::string_view s) {
  if (s == "markdown" || s == "md") return ReportFormat::markdown;
  if (s == "csv") return ReportFormat::csv;
  if (s == "structured" || s == "json") return ReportFormat::structured;
  throw EvalError("unknown report format '" + std::string(s) + "'");
}

std::string_view report_format_extension(ReportFormat f) {
  switch (f) {
    case ReportFormat::markdown: return ".md";
    case ReportFormat::csv: return ".csv";
    case ReportFormat::structured: return ".json";
  }
  return ".txt";
}

json reports_to_json(const std::vector<AccuracyReport>& reports) {
  json arr = json::array();
  for (const auto& r : reports) {
    auto a = r.accuracy();
    arr.push_back({{"dataset", r.dataset_id},
                   {"model", r.model},
                   {"strategy", r.strategy},
                   {"variant", r.variant},
                   {"n_total", r.n_total},
                   {"n_correct", r.n_correct},
                   {"n_unevaluated", r.n_unevaluated},
                   {"accuracy", a ? json(round_to(*a, 6)) : json(nullptr)}});
  }
  return arr;
}

std::vector<AccuracyReport> reports_from_json(const json& j) {
  std::vector<AccuracyReport> out;
  for (const auto& e : j) {
    AccuracyReport r;
    r.dataset_id = e.at("dataset").get<std::string>();
    r.model = e.at("model").get<std::string>();
    r.strategy = e.at("strategy").get<std::string>();
    r.variant = e.value("variant", std::string{});
    r.n_total = e.at("n_total").get<std::size_t>();
    r.n_correct = e.at("n_correct").get<std::size_t>();
    r.n_unevaluated = e.at("n_unevaluated").get<std::size_t>();
    out.push_back(std::move(r));
  }
  return out;
}

std::string render_reports(const std::vector<AccuracyReport>& reports, ReportFormat format) {
  switch (format) {
    case ReportFormat::structured:
      return reports_to_json(reports).dump(2) + "\n";
    case ReportFormat::csv: {
      std::string out = std::string(kCsvHeader) + "\n";
      for (const auto& r : reports) {
        auto a = r.accuracy();
        out += fmt::format("{},{},{},{},{},{},{},{}\n", csv_field(r.dataset_id),
                           csv_field(r.model), csv_field(r.strategy), csv_field(r.variant),
                           r.n_total, r.n_correct, r.n_unevaluated,
                           a ? format_accuracy(*a) : std::string());
      }
      return out;
    }
    case ReportFormat::markdown: {
      std::vector<std::string> head = {"Dataset", "Model",     "Strategy",    "Variant",
                                       "Total",   "Correct",   "Unevaluated", "Accuracy"};
      std::string out = md_row(head) + md_rule(head.size());
      for (const auto& r : reports) {
        auto a = r.accuracy();
        out += md_row({r.dataset_id, r.model, r.strategy, r.variant.empty() ? "-" : r.variant,
                       std::to_string(r.n_total), std::to_string(r.n_correct),
                       std::to_string(r.n_unevaluated), a ? format_accuracy(*a) : "n/a"});
      }
      return out;
    }
  }
  return {};
}

std::vector<AccuracyReport> reports_from_csv(std::string_view csv) {
  std::vector<AccuracyReport> out;
  bool header = true;
  for (const auto& line : text::split(csv, '\n')) {
    if (text::trim(line).empty()) continue;
    if (header) {
      header = false;
      if (line != kCsvHeader) throw EvalError("unexpected report csv header");
      continue;
    }
    auto f = parse_csv_line(line);
    if (f.size() != 8) throw EvalError("report csv row needs 8 fields: " + line);
    AccuracyReport r;
    r.dataset_id = f[0];
    r.model = f[1];
    r.strategy = f[2];
    r.variant = f[3];
    r.n_total = std::stoull(f[4]);
    r.n_correct = std::stoull(f[5]);
    r.n_unevaluated = std::stoull(f[6]);
    out.push_back(std::move(r));
  }
  return out;
}

void write_text_file(const fs::path& path, std::string_view content) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << content;
  out.flush();
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

void emit(const std::vector<AccuracyReport>& reports, ReportFormat format,
          const fs::path& path) {
  write_text_file(path, render_reports(reports, format));
}

}  // namespace tablelogic
