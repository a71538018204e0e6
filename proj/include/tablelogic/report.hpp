#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "tablelogic/evaluator.hpp"

namespace tablelogic {

enum class Direction { up, down, flat };

struct Delta {
  double points = 0.0;  // absolute percentage points, one decimal
  Direction direction = Direction::flat;
  std::string label;    // "↑7.8%", "↓11.0%" or "0.0%"
};

/// (strategy - vanilla) * 100, rounded to one decimal.
Delta delta_vs_vanilla(double strategy_acc, double vanilla_acc);

struct GroupGap {
  double bigger_avg = 0.0;
  double smaller_avg = 0.0;
  double gap = 0.0;
};

/// Means rounded to three decimals; gap = bigger_avg - smaller_avg. Throws
/// `EvalError` when either list is empty.
GroupGap group_average_and_gap(const std::vector<double>& bigger,
                               const std::vector<double>& smaller);

/// Rounds half away from zero at `decimals` places.
double round_to(double value, int decimals);
/// Fixed three-decimal rendering used for every accuracy cell.
std::string format_accuracy(double value);

// ---------------------------------------------------------------------------
// Layouts

/// Strategy comparison: one row per dataset, one column block per model, each
/// non-vanilla cell labelled with its delta against the same model's vanilla.
struct StrategyTableSpec {
  std::vector<std::string> datasets;    // row order
  std::vector<std::string> models;      // column block order
  std::vector<std::string> strategies;  // first one is the baseline
};

std::string strategy_table_markdown(const std::vector<AccuracyReport>& reports,
                                    const StrategyTableSpec& spec);

/// Augmentation comparison: rows (dataset, model), columns per strategy.
std::string augmentation_table_markdown(const std::vector<AccuracyReport>& reports,
                                        const std::vector<std::string>& datasets,
                                        const std::vector<std::string>& models);

struct GapRow {
  std::string task;
  GroupGap gap;
};

std::string gap_table_markdown(const std::vector<GapRow>& rows);

// ---------------------------------------------------------------------------
// Emission

enum class ReportFormat { markdown, csv, structured };

ReportFormat parse_report_format(std::string_view s);
std::string_view report_format_extension(ReportFormat f);

/// Flat listing of reports. Markdown and csv have a fixed header line; an
/// empty list yields the header alone (or "[]" for structured).
std::string render_reports(const std::vector<AccuracyReport>& reports, ReportFormat format);

std::vector<AccuracyReport> reports_from_csv(std::string_view csv);
std::vector<AccuracyReport> reports_from_json(const nlohmann::json& j);
nlohmann::json reports_to_json(const std::vector<AccuracyReport>& reports);

/// Writes `content` to `path`, creating parent directories. Throws
/// `std::runtime_error` naming the path on failure.
void write_text_file(const std::filesystem::path& path, std::string_view content);

/// Writes `render_reports(reports, format)` to `path`.
void emit(const std::vector<AccuracyReport>& reports, ReportFormat format,
          const std::filesystem::path& path);

}  // namespace tablelogic
