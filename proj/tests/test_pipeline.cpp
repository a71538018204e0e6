#include <gtest/gtest.h>

#include <cstdlib>
#include <sstream>

#include "tablelogic/chain.hpp"
#include "tablelogic/config.hpp"
#include "tablelogic/errors.hpp"
#include "tablelogic/pipeline.hpp"
#include "test_util.hpp"

using namespace tablelogic;
namespace fs = std::filesystem;
using testutil::TempDir;

namespace {

const fs::path kData = TEST_DATA_DIR;

std::string base_config(const std::string& extra_run = "") {
  return R"([datasets]
fixture = qa20.jsonl

[backends]
big.kind = scripted
big.model = big-70b
big.rules = rules_big.json
small.kind = scripted
small.model = small-7b
small.rules = rules_small.json
judge.kind = scripted
judge.rules = rules_judge.json

[sampling]
per_dataset_count = 6
seed = 1

[run]
models = big, small
judge = judge
bigger = big
smaller = small
bench_per_kind = 3
)" + extra_run;
}

pipeline::StageContext context(const RunConfig& cfg, const fs::path& run_dir,
                               std::ostream* log = nullptr) {
  pipeline::StageContext ctx;
  ctx.config = cfg;
  ctx.run_dir = run_dir;
  ctx.log = log;
  return ctx;
}

// Snapshot of every file under `dir`: relative path -> contents.
std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) {
      out[fs::relative(e.path(), dir).generic_string()] = testutil::read_file(e.path());
    }
  }
  return out;
}

}  // namespace

TEST(Config, ParsesFixture) {
  RunConfig cfg = load_config(kData / "fixture.ini");
  ASSERT_EQ(cfg.datasets.size(), 1u);
  EXPECT_EQ(cfg.datasets[0].path, kData / "qa20.jsonl");
  EXPECT_EQ(cfg.backends.at("big").model, "big-70b");
  EXPECT_EQ(cfg.backends.at("judge").rules, kData / "rules_judge.json");
  EXPECT_EQ(cfg.models, (std::vector<std::string>{"big", "small"}));
  EXPECT_EQ(cfg.strategies.size(), 3u);
  EXPECT_EQ(cfg.workers, 2);
  EXPECT_EQ(cfg.sampling.per_dataset_count, 20u);
}

TEST(Config, Defaults) {
  RunConfig cfg = parse_config("[backends]\na.kind = scripted\na.rules = r.json\n", "/base");
  EXPECT_EQ(cfg.models, std::vector<std::string>{"a"});
  EXPECT_EQ(cfg.strategies.size(), 3u);
  EXPECT_EQ(cfg.decoding.temperature, 0.0);
  EXPECT_TRUE(cfg.use_cache);
  EXPECT_FALSE(cfg.include_passages);
}

TEST(Config, Rejections) {
  const std::string ok_backend = "[backends]\na.kind = scripted\na.rules = r.json\n";
  EXPECT_THROW(parse_config("[mystery]\nx = 1\n", "/"), ConfigError);
  EXPECT_THROW(parse_config(ok_backend + "[run]\nbogus = 1\n", "/"), ConfigError);
  EXPECT_THROW(parse_config(ok_backend + "[run]\nuse_cache = maybe\n", "/"), ConfigError);
  EXPECT_THROW(parse_config(ok_backend + "[run]\nworkers = many\n", "/"), ConfigError);
  EXPECT_THROW(parse_config(ok_backend + "[run]\nworkers = 0\n", "/"), ConfigError);
  EXPECT_THROW(parse_config(ok_backend + "[run]\njudge = nobody\n", "/"), ConfigError);
  EXPECT_THROW(parse_config(ok_backend + "[strategies]\nrun = vanilla, magic\n", "/"),
               ConfigError);
  EXPECT_THROW(parse_config(ok_backend + "[sampling]\nper_dataset_count = 0\n", "/"), ConfigError);
  EXPECT_THROW(parse_config(ok_backend + "[sampling]\nseed = -4\n", "/"), ConfigError);
  EXPECT_THROW(parse_config("[backends]\na.kind = openai\na.api_key = sk-123\n", "/"), ConfigError);
  EXPECT_THROW(parse_config("[backends]\na.kind = telepathy\n", "/"), ConfigError);
  EXPECT_THROW(parse_config("[backends]\na.kind = scripted\n", "/"), ConfigError);
  EXPECT_THROW(parse_config("[backends]\nnodot = 1\n", "/"), ConfigError);
}

TEST(Config, ResolvedTextIsStableAndRelative) {
  RunConfig cfg = load_config(kData / "fixture.ini");
  std::string a = resolved_config_text(cfg);
  EXPECT_EQ(a, resolved_config_text(load_config(kData / "fixture.ini")));
  EXPECT_NE(a.find("fixture = qa20.jsonl"), std::string::npos);
  EXPECT_EQ(a.find(kData.string()), std::string::npos);
}

TEST(Pipeline, MissingCredentialsFailBeforeAnyBackendIsBuilt) {
  TempDir dir("creds");
  RunConfig cfg = parse_config(base_config() + "", kData);
  cfg.backends["remote"].name = "remote";
  cfg.backends["remote"].kind = "openai";
  cfg.backends["remote"].remote.api_key_env = "TABLELOGIC_TEST_NO_SUCH_KEY";
  ::unsetenv("TABLELOGIC_TEST_NO_SUCH_KEY");
  cfg.models = {"big", "remote"};
  auto ctx = context(cfg, dir.path());
  int built = 0;
  ctx.factory = [&](const BackendConfig& b) {
    ++built;
    return make_backend(b);
  };
  EXPECT_THROW(pipeline::run(ctx), CredentialError);
  EXPECT_EQ(built, 0);
  EXPECT_FALSE(fs::exists(dir / "run/traces"));
}

TEST(Pipeline, DryRunCountsCalls) {
  RunConfig cfg = parse_config(base_config(), kData);
  auto plan = pipeline::plan_run(context(cfg, "/unused"));
  EXPECT_EQ(plan.chain_calls, 6u * (1 + 2 + 4) * 2);
  EXPECT_EQ(plan.judge_calls, 6u * 3 * 2);
  EXPECT_EQ(plan.groups.size(), 6u);
  EXPECT_NE(pipeline::describe_plan(plan).find("chain_calls=84"), std::string::npos);
}

TEST(Pipeline, EndToEndAndIdempotentRerun) {
  TempDir dir("e2e");
  RunConfig cfg = parse_config(base_config(), kData);
  std::ostringstream log;
  auto ctx = context(cfg, dir.path(), &log);

  auto run1 = pipeline::run(ctx);
  EXPECT_EQ(run1.backend_calls, 6u * 7 * 2);
  EXPECT_EQ(run1.items, 6u * 3 * 2);
  EXPECT_EQ(run1.failed, 0u);
  auto bench = pipeline::bench(ctx);
  EXPECT_EQ(bench.items, 2u * 5 * 3);
  auto repl = pipeline::replace(ctx);
  // critical: aggregation + answer are new; aggregation: columns and rows replay
  // from the run-stage cache, only the answer is new.
  EXPECT_EQ(repl.backend_calls, 6u * (2 + 1)) << log.str();
  auto ev = pipeline::eval(ctx);
  EXPECT_EQ(ev.items, 6u * 3 * 2 + 6u * 2);
  pipeline::report(ctx);

  for (const char* f : {"report/table1.md", "report/table1.csv", "report/table1.json",
                        "report/table2.md", "report/table3.md", "report/table3.csv",
                        "report/figure3.json", "report/figure4.json", "report/manifest.json",
                        "report/accuracy.csv", "run/config.resolved.ini",
                        "run/traces/big/fixture/table_logic.jsonl",
                        "replace/traces/small__big/fixture/critical_replacement.jsonl",
                        "eval/outcomes/run/big/fixture/vanilla.jsonl"}) {
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  }
  for (const auto& t : read_traces(dir / "run/traces/big/fixture/table_logic.jsonl")) {
    EXPECT_TRUE(splice_violations(t).empty());
    EXPECT_EQ(t.backend_calls(), 4u);
  }
  EXPECT_NE(testutil::read_file(dir / "report/table3.md").find("critical_replacement"),
            std::string::npos);

  const auto before = snapshot(dir.path());
  EXPECT_EQ(pipeline::run(ctx).backend_calls, 0u);
  EXPECT_EQ(pipeline::replace(ctx).backend_calls, 0u);
  EXPECT_EQ(pipeline::eval(ctx).backend_calls, 0u);
  EXPECT_EQ(pipeline::bench(ctx).backend_calls, 0u);
  pipeline::report(ctx);
  EXPECT_EQ(snapshot(dir.path()), before);
}

TEST(Pipeline, ResumesAfterInterruption) {
  TempDir dir("resume");
  RunConfig cfg = parse_config(base_config(), kData);
  cfg.models = {"big"};
  cfg.strategies = {StrategyKind::table_logic};
  cfg.use_cache = false;
  cfg.workers = 1;

  // First attempt loses the connection after 9 calls.
  auto ctx = context(cfg, dir.path());
  auto calls = std::make_shared<int>(0);
  ctx.factory = [calls](const BackendConfig& b) -> std::shared_ptr<Backend> {
    struct Flaky : Backend {
      std::shared_ptr<Backend> inner;
      std::shared_ptr<int> n;
      CompletionResult complete(const CompletionRequest& r, const CallOptions& o) override {
        if (++*n > 9) throw TransportError("connection lost");
        return inner->complete(r, o);
      }
      std::string id() const override { return "flaky"; }
    };
    auto f = std::make_shared<Flaky>();
    f->inner = make_backend(b);
    f->n = calls;
    return f;
  };
  auto first = pipeline::run(ctx);
  EXPECT_EQ(first.items, 6u);
  EXPECT_EQ(first.failed, 4u);  // two complete chains, then the 9th call ends record 3 early

  ctx.factory = {};
  auto second = pipeline::run(ctx);
  EXPECT_EQ(second.skipped, 2u);
  EXPECT_EQ(second.items, 4u);
  EXPECT_EQ(second.backend_calls, 4u * 4);

  RunConfig fresh_cfg = cfg;
  TempDir fresh("resume-fresh");
  pipeline::run(context(fresh_cfg, fresh.path()));
  auto latest = [](const fs::path& p) {
    std::map<std::string, ChainTrace> m;
    for (auto& t : read_traces(p)) m[t.record_id] = t;
    return m;
  };
  EXPECT_EQ(latest(dir / "run/traces/big/fixture/table_logic.jsonl"),
            latest(fresh / "run/traces/big/fixture/table_logic.jsonl"));
}

TEST(Pipeline, AugmentedStrategiesUseSourceIntermediates) {
  TempDir dir("aug");
  RunConfig cfg = parse_config(base_config("augment_source = big\n"), kData);
  cfg.strategies = {StrategyKind::vanilla, StrategyKind::vanilla_with_structure,
                    StrategyKind::vanilla_with_column_row, StrategyKind::vanilla_with_aggregation};
  cfg.models = {"small", "big"};
  auto ctx = context(cfg, dir.path());
  auto st = pipeline::run(ctx);
  EXPECT_EQ(st.failed, 0u);
  auto big_tl = read_traces(dir / "run/traces/big/fixture/table_logic.jsonl");
  auto small_cr = read_traces(dir / "run/traces/small/fixture/vanilla_with_column_row.jsonl");
  ASSERT_EQ(big_tl.size(), small_cr.size());
  for (std::size_t i = 0; i < big_tl.size(); ++i) {
    EXPECT_NE(small_cr[i].steps[0].prompt.find(*big_tl[i].intermediates.column), std::string::npos);
  }
  pipeline::eval(ctx, ScoreMethod::exact_match);
  pipeline::report(ctx);
  EXPECT_NE(testutil::read_file(dir / "report/table2.md").find("With Aggregation"),
            std::string::npos);
}

TEST(Pipeline, ExactMatchNeedsNoJudge) {
  TempDir dir("em");
  RunConfig cfg = parse_config(base_config(), kData);
  cfg.judge.clear();
  cfg.eval_method = "exact_match";
  auto ctx = context(cfg, dir.path());
  pipeline::run(ctx);
  auto ev = pipeline::eval(ctx);
  EXPECT_EQ(ev.backend_calls, 0u);
  EXPECT_THROW(pipeline::eval(ctx, ScoreMethod::judge), ConfigError);
}

TEST(Pipeline, ConvertAndAgree) {
  TempDir dir("convert");
  auto r = pipeline::convert(kData / "qa10.jsonl", DatasetSchema::normalized, {}, dir / "out.jsonl",
                             "renamed");
  EXPECT_EQ(r.records, 10u);
  auto loaded = load_normalized(dir / "out.jsonl").records;
  EXPECT_EQ(loaded.front().dataset_id, "renamed");

  EvalOutcome a, b;
  a.record_id = b.record_id = "1";
  a.verdict = Verdict::correct;
  b.verdict = Verdict::incorrect;
  EvalOutcome a2 = a, b2 = a;
  a2.record_id = b2.record_id = "2";
  write_outcomes(dir / "a.jsonl", {a, a2});
  write_outcomes(dir / "b.jsonl", {b, b2});
  auto ag = pipeline::agree(dir / "a.jsonl", dir / "b.jsonl");
  EXPECT_EQ(ag.paired, 2u);
  EXPECT_DOUBLE_EQ(ag.agreement, 0.5);
}
