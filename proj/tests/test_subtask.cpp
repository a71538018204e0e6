#include <gtest/gtest.h>

#include <map>

#include "tablelogic/chain.hpp"
#include "tablelogic/errors.hpp"
#include "tablelogic/generator.hpp"
#include "tablelogic/subtask.hpp"
#include "test_util.hpp"

using namespace tablelogic;
using testutil::TempDir;

namespace {

std::vector<Table> tables(std::size_t n) {
  std::vector<Table> out;
  GeneratorOptions o;
  o.min_rows = 2;
  o.max_rows = 12;
  o.min_cols = 2;
  o.max_cols = 6;
  for (std::size_t i = 0; i < n; ++i) out.push_back(generate_table(100 + i, o).table);
  return out;
}

std::string index_list(const std::vector<std::size_t>& v) {
  std::string s;
  for (auto i : v) s += (s.empty() ? "" : ", ") + std::to_string(i);
  return s;
}

}  // namespace

TEST(Structural, DeterministicAndPerKindCounts) {
  auto ts = tables(30);
  auto a = generate_structural(ts, 10, 5);
  auto b = generate_structural(ts, 10, 5);
  EXPECT_EQ(a, b);
  std::map<SubTaskKind, int> counts;
  for (const auto& i : a) counts[i.kind]++;
  for (auto k : oracle_kinds()) EXPECT_EQ(counts[k], 10) << subtask_name(k);
  EXPECT_NE(generate_structural(ts, 10, 6), a);
}

TEST(Structural, GoldMatchesRecomputation) {
  for (auto targets : {FindingTargets::existing_cells, FindingTargets::planted}) {
    StructuralOptions opts;
    opts.targets = targets;
    opts.multi_match_rate = 0.3;
    for (const auto& inst : generate_structural(tables(40), 25, 11, opts)) {
      auto [text, idx] = recompute_gold(inst);
      EXPECT_EQ(text, inst.gold_text) << inst.instance_id;
      EXPECT_EQ(idx, inst.gold_indices) << inst.instance_id;
    }
  }
}

TEST(Structural, QuestionsStateOneBasedConvention) {
  for (const auto& inst : generate_structural(tables(10), 3, 1)) {
    if (inst.kind == SubTaskKind::value_lookup || inst.kind == SubTaskKind::row_finding) {
      EXPECT_NE(inst.question.find("numbered from 1"), std::string::npos) << inst.question;
    }
  }
}

TEST(Structural, OracleAnswersScoreCorrect) {
  for (const auto& inst : generate_structural(tables(20), 10, 2)) {
    std::string answer;
    switch (inst.kind) {
      case SubTaskKind::row_finding:
      case SubTaskKind::column_finding:
        answer = index_list(inst.gold_indices);
        break;
      default:
        answer = inst.gold_text;
    }
    EXPECT_EQ(score_structural(inst, answer), Verdict::correct) << inst.instance_id;
  }
}

TEST(Structural, ScoringRules) {
  SubTaskInstance count;
  count.kind = SubTaskKind::count_rows;
  count.gold_text = "7";
  EXPECT_EQ(score_structural(count, "The table has 7 rows."), Verdict::correct);
  EXPECT_EQ(score_structural(count, "8"), Verdict::incorrect);
  EXPECT_EQ(score_structural(count, "seven"), Verdict::incorrect);

  SubTaskInstance find;
  find.kind = SubTaskKind::row_finding;
  find.gold_indices = {3};
  EXPECT_EQ(score_structural(find, "Row 3"), Verdict::correct);
  EXPECT_EQ(score_structural(find, "Row 2"), Verdict::incorrect);

  SubTaskInstance lookup;
  lookup.kind = SubTaskKind::value_lookup;
  lookup.gold_text = "Oslo";
  EXPECT_EQ(score_structural(lookup, "oslo."), Verdict::correct);

  SubTaskInstance repl;
  repl.kind = SubTaskKind::critical_replacement;
  EXPECT_THROW(score_structural(repl, "x"), EvalError);
}

TEST(Structural, SuiteFileRoundTrip) {
  TempDir dir("suite");
  auto suite = generate_structural(tables(10), 4, 3);
  write_suite(dir / "s.jsonl", suite);
  EXPECT_EQ(read_suite(dir / "s.jsonl"), suite);
}

TEST(Structural, ProbePromptCarriesTableAndQuestion) {
  auto inst = generate_structural(tables(3), 1, 3).front();
  std::string p = probe_prompt(inst);
  EXPECT_NE(p.find(serialize_dict_format(inst.table)), std::string::npos);
  EXPECT_NE(p.find(inst.question), std::string::npos);
}

TEST(Structural, RunProbeScoresResponse) {
  auto suite = generate_structural(tables(5), 1, 4);
  const auto& inst = suite.front();
  ASSERT_EQ(inst.kind, SubTaskKind::count_rows);
  ScriptedBackend b("s", {}, inst.gold_text);
  ChainOptions opts;
  opts.model = "m";
  auto r = run_probe(inst, b, opts);
  EXPECT_EQ(r.verdict, Verdict::correct);
  auto o = to_outcome(r, "synthetic");
  EXPECT_EQ(o.method, ScoreMethod::oracle);
  EXPECT_EQ(o.strategy, "count_rows");
}

TEST(Replacement, JoinsOnDatasetAndRecord) {
  QARecord r1;
  r1.record_id = "1";
  r1.dataset_id = "d";
  r1.question = "q";
  r1.gold_answers = {"a"};
  r1.table = Table::make("t", {"A"}, {{"x"}});
  QARecord r2 = r1;
  r2.record_id = "2";

  ChainTrace t;
  t.record_id = "1";
  t.dataset_id = "d";
  t.model = "small";
  t.strategy = StrategyKind::table_logic;
  t.steps.resize(4);
  t.intermediates.column = "C";
  t.intermediates.row = "R";
  t.intermediates.aggregation = "A";
  ChainTrace other_ds = t;
  other_ds.dataset_id = "e";
  other_ds.record_id = "2";

  auto crit = build_replacement_suite({r1, r2}, {t, other_ds}, SubTaskKind::critical_replacement);
  ASSERT_EQ(crit.pairs.size(), 1u);
  EXPECT_EQ(crit.skipped, 1u);
  EXPECT_EQ(crit.pairs[0].payload.column, "C");
  EXPECT_FALSE(crit.pairs[0].payload.aggregation);
  auto agg = build_replacement_suite({r1}, {t}, SubTaskKind::aggregation_replacement);
  EXPECT_EQ(agg.pairs[0].payload.aggregation, "A");
  EXPECT_FALSE(agg.pairs[0].payload.column);
  EXPECT_THROW(build_replacement_suite({r1}, {t}, SubTaskKind::count_rows), EvalError);
}

TEST(SubTaskNames, RoundTrip) {
  for (auto k : all_subtasks()) EXPECT_EQ(parse_subtask(subtask_name(k)), k);
  EXPECT_EQ(all_subtasks().size(), 7u);
  EXPECT_EQ(oracle_kinds().size(), 5u);
}
