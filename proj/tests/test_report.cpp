#include <gtest/gtest.h>

#include <nlohmann/json.hpp>

#include "reference_tables.hpp"
#include "tablelogic/errors.hpp"
#include "tablelogic/report.hpp"
#include "test_util.hpp"

using namespace tablelogic;
using testutil::TempDir;

namespace {

AccuracyReport rep(std::string ds, std::string model, std::string strategy, std::size_t n,
                   std::size_t correct, std::size_t unevaluated = 0) {
  AccuracyReport r;
  r.dataset_id = std::move(ds);
  r.model = std::move(model);
  r.strategy = std::move(strategy);
  r.n_total = n;
  r.n_correct = correct;
  r.n_unevaluated = unevaluated;
  return r;
}

}  // namespace

TEST(Delta, ReproducesAllReferenceLabels) {
  int checked = 0;
  for (const auto& row : testutil::kStrategyRows) {
    EXPECT_EQ(delta_vs_vanilla(row.self_aug, row.vanilla).label, row.sa_label)
        << row.model << " " << row.dataset;
    EXPECT_EQ(delta_vs_vanilla(row.table_logic, row.vanilla).label, row.tl_label)
        << row.model << " " << row.dataset;
    checked += 2;
  }
  EXPECT_EQ(checked, 36);
}

TEST(Delta, SignAndZero) {
  EXPECT_EQ(delta_vs_vanilla(0.5, 0.5).label, "0.0%");
  EXPECT_EQ(delta_vs_vanilla(0.5, 0.5).direction, Direction::flat);
  EXPECT_EQ(delta_vs_vanilla(0.5004, 0.5).label, "0.0%");
  EXPECT_EQ(delta_vs_vanilla(0.4, 0.5).direction, Direction::down);
  EXPECT_DOUBLE_EQ(delta_vs_vanilla(0.823, 0.745).points, 7.8);
}

TEST(Gap, ReproducesReferenceGaps) {
  for (const auto& c : testutil::kGapCases) {
    GroupGap g = group_average_and_gap({c.bigger}, {c.smaller});
    EXPECT_EQ(format_accuracy(g.gap), format_accuracy(c.gap)) << c.task;
    EXPECT_DOUBLE_EQ(g.gap, c.gap) << c.task;
  }
}

TEST(Gap, AveragesRoundBeforeSubtracting) {
  GroupGap g = group_average_and_gap({0.5, 0.4865}, {0.1, 0.2});
  EXPECT_DOUBLE_EQ(g.bigger_avg, 0.493);
  EXPECT_DOUBLE_EQ(g.smaller_avg, 0.15);
  EXPECT_DOUBLE_EQ(g.gap, 0.343);
  EXPECT_THROW(group_average_and_gap({}, {0.1}), EvalError);
}

TEST(Rounding, HalfAwayFromZero) {
  EXPECT_DOUBLE_EQ(round_to(0.0785, 3), 0.079);
  EXPECT_DOUBLE_EQ(round_to(-0.25, 1), -0.3);
  EXPECT_EQ(format_accuracy(0.8), "0.800");
}

TEST(StrategyTable, CellsCarryDeltaLabels) {
  std::vector<AccuracyReport> reports = {
      rep("HybridQA", "Llama-3-70B", "vanilla", 1000, 745),
      rep("HybridQA", "Llama-3-70B", "self_augmentation", 1000, 816),
      rep("HybridQA", "Llama-3-70B", "table_logic", 1000, 823),
  };
  std::string md = strategy_table_markdown(
      reports, {{"HybridQA"}, {"Llama-3-70B"}, {"vanilla", "self_augmentation", "table_logic"}});
  EXPECT_NE(md.find("0.745"), std::string::npos);
  EXPECT_NE(md.find("0.816 ↑7.1%"), std::string::npos);
  EXPECT_NE(md.find("0.823 ↑7.8%"), std::string::npos);
}

TEST(StrategyTable, MissingCellsAreDashes) {
  std::string md = strategy_table_markdown(
      {rep("D", "M", "vanilla", 10, 5)}, {{"D"}, {"M"}, {"vanilla", "table_logic"}});
  EXPECT_NE(md.find("| -"), std::string::npos);
}

TEST(AugmentationTable, HasAllColumns) {
  std::string md = augmentation_table_markdown({rep("D", "M", "vanilla", 10, 5)}, {"D"}, {"M"});
  EXPECT_NE(md.find("With Table Structure"), std::string::npos);
  EXPECT_NE(md.find("With Column and Row"), std::string::npos);
  EXPECT_NE(md.find("With Aggregation"), std::string::npos);
}

TEST(GapTable, Layout) {
  std::string md = gap_table_markdown({{"count_rows", {0.493, 0.173, 0.320}}});
  EXPECT_NE(md.find("count_rows"), std::string::npos);
  EXPECT_NE(md.find("0.320"), std::string::npos);
}

TEST(Emit, CsvRoundTripAndEmptyHeaders) {
  std::vector<AccuracyReport> reports = {rep("D", "M", "vanilla", 10, 7, 1),
                                         rep("D", "M", "table_logic", 3, 0, 3)};
  std::string csv = render_reports(reports, ReportFormat::csv);
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "dataset,model,strategy,variant,n_total,n_correct,n_unevaluated,accuracy");
  EXPECT_EQ(reports_from_csv(csv), reports);
  EXPECT_EQ(reports_from_json(reports_to_json(reports)), reports);

  EXPECT_EQ(render_reports({}, ReportFormat::csv),
            "dataset,model,strategy,variant,n_total,n_correct,n_unevaluated,accuracy\n");
  EXPECT_EQ(nlohmann::json::parse(render_reports({}, ReportFormat::structured)),
            nlohmann::json::array());
  EXPECT_FALSE(render_reports({}, ReportFormat::markdown).empty());
}

TEST(Emit, UnwritablePathNamesPath) {
  try {
    write_text_file("/proc/definitely/not/writable.md", "x");
    FAIL();
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("/proc/definitely/not/writable.md"), std::string::npos);
  }
}

TEST(Emit, WritesFile) {
  TempDir dir("emit");
  emit({rep("D", "M", "vanilla", 4, 2)}, ReportFormat::markdown, dir / "sub/t.md");
  EXPECT_NE(testutil::read_file(dir / "sub/t.md").find("0.500"), std::string::npos);
}

TEST(Formats, Parse) {
  EXPECT_EQ(parse_report_format("md"), ReportFormat::markdown);
  EXPECT_EQ(parse_report_format("json"), ReportFormat::structured);
  EXPECT_EQ(report_format_extension(ReportFormat::csv), ".csv");
  EXPECT_THROW(parse_report_format("xlsx"), EvalError);
}
