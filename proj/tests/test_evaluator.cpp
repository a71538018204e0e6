#include <gtest/gtest.h>

#include <map>
#include <random>
#include <tuple>

#include "judge_cases.hpp"
#include "tablelogic/chain.hpp"
#include "tablelogic/errors.hpp"
#include "tablelogic/evaluator.hpp"
#include "test_util.hpp"

using namespace tablelogic;
using testutil::TempDir;

namespace {

// Replays a fixed list of replies, then repeats the last one.
class SequenceBackend : public Backend {
 public:
  explicit SequenceBackend(std::vector<std::string> replies) : replies_(std::move(replies)) {}
  CompletionResult complete(const CompletionRequest& r, const CallOptions&) override {
    prompts.push_back(r.prompt);
    const auto& text = replies_[std::min(prompts.size() - 1, replies_.size() - 1)];
    return {text, {}, false, "seq"};
  }
  std::string id() const override { return "seq"; }
  std::vector<std::string> prompts;

 private:
  std::vector<std::string> replies_;
};

class ThrowingBackend : public Backend {
 public:
  CompletionResult complete(const CompletionRequest&, const CallOptions&) override {
    throw TransportError("down");
  }
  std::string id() const override { return "throwing"; }
};

}  // namespace

TEST(JudgeParser, ThirtyCaseSuite) {
  int deviations = 0;
  for (const auto& c : testutil::kJudgeCases) {
    if (parse_judge_response(c.raw) != c.expected) {
      ++deviations;
      ADD_FAILURE() << "case '" << c.raw << "'";
    }
  }
  EXPECT_EQ(deviations, 0);
}

TEST(Judge, PromptJoinsGoldAnswers) {
  std::string p = render_judge_prompt("Q?", {"a", "b"}, "a");
  EXPECT_NE(p.find("Gold Answer: a | b"), std::string::npos);
  EXPECT_NE(p.find("Predicted Answer: a"), std::string::npos);
  EXPECT_NE(p.find("give only a Yes or No"), std::string::npos);
}

TEST(Judge, YesNoMapping) {
  SequenceBackend yes({"Yes"}), no({"No."});
  EXPECT_EQ(judge("q", {"g"}, "p", yes).verdict, Verdict::correct);
  EXPECT_EQ(judge("q", {"g"}, "p", no).verdict, Verdict::incorrect);
  EXPECT_EQ(yes.prompts.size(), 1u);
}

TEST(Judge, AmbiguousRetriesOnce) {
  SequenceBackend later_yes({"maybe", "Yes"});
  auto o = judge("q", {"g"}, "p", later_yes);
  EXPECT_EQ(o.verdict, Verdict::correct);
  EXPECT_EQ(later_yes.prompts.size(), 2u);

  SequenceBackend never({"hmm"});
  auto u = judge("q", {"g"}, "p", never);
  EXPECT_EQ(u.verdict, Verdict::unevaluated);
  EXPECT_EQ(never.prompts.size(), 2u);
  EXPECT_EQ(u.judge_raw, "hmm");
}

TEST(Judge, BackendFailureIsUnevaluated) {
  ThrowingBackend b;
  auto o = judge("q", {"g"}, "p", b);
  EXPECT_EQ(o.verdict, Verdict::unevaluated);
  EXPECT_NE(o.judge_raw->find("backend error"), std::string::npos);
}

TEST(ExactMatch, FiftyCaseFixture) {
  struct Case {
    const char* gold;
    const char* pred;
    bool match;
  };
  const Case cases[] = {
      {"Norway", "Norway", true},         {"Norway", "norway", true},
      {"Norway", " Norway ", true},       {"Norway", "Norway.", true},
      {"Norway", "NORWAY!", true},        {"Norway", "Norway?", true},
      {"New York", "new  york", true},    {"New York", "New\tYork", true},
      {"New York", "New York City", false},
      {"12", "12", true},                 {"12", "12.", true},
      {"12", "12.0", false},              {"12", "twelve", false},
      {"3.5", "3.5", true},               {"3.5", "3.50", false},
      {"1,000", "1,000", true},           {"1,000", "1000", false},
      {"yes", "Yes", true},               {"yes", "yes;", true},
      {"no", "No:", true},                {"Paris", "Lyon", false},
      {"Paris", "", false},               {"Paris", "Paris, France", false},
      {"A.B.", "a.b", true},              {"U.S.", "U.S", true},
      {"2019", " 2019\n", true},          {"$10 million", "$10 Million", true},
      {"$10 million", "10 million", false},
      {"-5", "-5", true},                 {"-5", "5", false},
      {"St. Louis", "st. louis", true},   {"St. Louis", "St Louis", false},
      {"O'Brien", "o'brien", true},       {"O'Brien", "OBrien", false},
      {"two words", "two words!!", true}, {"two words", "twowords", false},
      {"Real Madrid", "real madrid.", true},
      {"Real Madrid", "Madrid", false},   {"1998-1999", "1998-1999", true},
      {"1998-1999", "1998 - 1999", false},
      {"Ünïcode", "Ünïcode", true},       {"50%", "50%", true},
      {"50%", "50", false},               {"first", "First.", true},
      {"first", "1st", false},            {"x", "x ", true},
      {"x", " x", true},                  {"x", "y", false},
      {"a b c", "a  b   c", true},        {"end.", "end", true},
  };
  static_assert(sizeof(cases) / sizeof(cases[0]) == 50);
  for (const auto& c : cases) {
    EXPECT_EQ(exact_match(std::string_view(c.gold), c.pred) == Verdict::correct, c.match)
        << "'" << c.gold << "' vs '" << c.pred << "'";
  }
}

TEST(ExactMatch, AnyGoldCounts) {
  EXPECT_EQ(exact_match(std::vector<std::string>{"10", "10 million"}, "10 Million"),
            Verdict::correct);
  EXPECT_EQ(exact_match(std::vector<std::string>{"10"}, "11"), Verdict::incorrect);
}

TEST(Agreement, WorkedExample) {
  using V = Verdict;
  EXPECT_DOUBLE_EQ(agreement({V::correct, V::correct, V::incorrect, V::incorrect},
                             {V::correct, V::incorrect, V::incorrect, V::incorrect}),
                   0.75);
}

TEST(Agreement, ErrorsAndUnevaluated) {
  using V = Verdict;
  EXPECT_THROW(agreement({V::correct}, {}), EvalError);
  EXPECT_THROW(agreement({V::unevaluated}, {V::correct}), EvalError);
  EXPECT_DOUBLE_EQ(agreement({V::correct, V::unevaluated}, {V::correct, V::incorrect}), 1.0);
}

TEST(Agreement, MatchesBruteForce) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    std::size_t n = 1 + rng() % 30;
    std::vector<Verdict> a(n), b(n);
    std::size_t comp = 0, same = 0;
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = static_cast<Verdict>(rng() % 3);
      b[i] = static_cast<Verdict>(rng() % 3);
      if (a[i] != Verdict::unevaluated && b[i] != Verdict::unevaluated) {
        ++comp;
        same += a[i] == b[i];
      }
    }
    if (comp == 0) {
      EXPECT_THROW(agreement(a, b), EvalError);
    } else {
      EXPECT_DOUBLE_EQ(agreement(a, b), static_cast<double>(same) / comp);
    }
  }
}

TEST(Aggregate, MatchesBruteForce) {
  std::mt19937_64 rng(9);
  std::vector<EvalOutcome> outcomes;
  using Key = std::tuple<std::string, std::string, std::string, std::string>;
  std::map<Key, std::array<std::size_t, 3>> expected;  // total, correct, unevaluated
  for (int i = 0; i < 500; ++i) {
    EvalOutcome o;
    o.record_id = std::to_string(i);
    o.dataset_id = "d" + std::to_string(rng() % 3);
    o.model = "m" + std::to_string(rng() % 2);
    o.strategy = rng() % 2 ? "vanilla" : "table_logic";
    o.variant = rng() % 4 == 0 ? "v" : "";
    o.verdict = static_cast<Verdict>(rng() % 3);
    auto& e = expected[{o.dataset_id, o.model, o.strategy, o.variant}];
    e[0]++;
    e[1] += o.verdict == Verdict::correct;
    e[2] += o.verdict == Verdict::unevaluated;
    outcomes.push_back(o);
  }
  auto reports = aggregate(outcomes);
  ASSERT_EQ(reports.size(), expected.size());
  auto it = expected.begin();
  for (const auto& r : reports) {
    EXPECT_EQ((Key{r.dataset_id, r.model, r.strategy, r.variant}), it->first);
    EXPECT_EQ(r.n_total, it->second[0]);
    EXPECT_EQ(r.n_correct, it->second[1]);
    EXPECT_EQ(r.n_unevaluated, it->second[2]);
    ++it;
  }

  GroupKeys pooled;
  pooled.dataset = false;
  std::size_t total = 0;
  for (const auto& r : aggregate(outcomes, pooled)) {
    EXPECT_EQ(r.dataset_id, "");
    total += r.n_total;
  }
  EXPECT_EQ(total, outcomes.size());
}

TEST(Aggregate, AllUnevaluatedHasNoAccuracy) {
  EvalOutcome o;
  o.verdict = Verdict::unevaluated;
  auto r = aggregate({o, o});
  ASSERT_EQ(r.size(), 1u);
  EXPECT_FALSE(r[0].accuracy().has_value());
}

TEST(EvaluateTrace, FailedTraceIsUnevaluatedWithoutJudge) {
  ChainTrace t;
  t.record_id = "r";
  t.status = TraceStatus::failed;
  SequenceBackend judge_backend({"Yes"});
  auto o = evaluate_trace(t, ScoreMethod::judge, &judge_backend);
  EXPECT_EQ(o.verdict, Verdict::unevaluated);
  EXPECT_TRUE(judge_backend.prompts.empty());
}

TEST(EvaluateTrace, CopiesIdentity) {
  ChainTrace t;
  t.record_id = "r";
  t.dataset_id = "d";
  t.model = "m";
  t.strategy = StrategyKind::table_logic;
  t.gold_answers = {"x"};
  t.final_prediction = "X";
  auto o = evaluate_trace(t, ScoreMethod::exact_match, nullptr);
  EXPECT_EQ(o.verdict, Verdict::correct);
  EXPECT_EQ(o.strategy, "table_logic");
  EXPECT_EQ(o.model, "m");
  EXPECT_THROW(evaluate_trace(t, ScoreMethod::judge, nullptr), EvalError);
}

TEST(Outcomes, FileRoundTrip) {
  TempDir dir("outcomes");
  EvalOutcome a;
  a.record_id = "1";
  a.verdict = Verdict::correct;
  a.method = ScoreMethod::judge;
  a.judge_raw = "Yes";
  EvalOutcome b;
  b.record_id = "2";
  write_outcomes(dir / "o.jsonl", {a, b});
  EXPECT_EQ(read_outcomes(dir / "o.jsonl"), (std::vector<EvalOutcome>{a, b}));
  EXPECT_EQ(parse_verdict("C"), Verdict::correct);
  EXPECT_EQ(parse_verdict("no"), Verdict::incorrect);
}
