// Serial reference vs OpenMP kernels. Threads default to max_workers();
// the parallel variants take the worker count as their range argument.
#include <benchmark/benchmark.h>

#include "tablelogic/kernels.hpp"

using namespace tablelogic;

namespace {

const std::vector<GeneratedTable>& tables() {
  static const auto ts = [] {
    std::vector<GeneratedTable> out;
    for (std::uint64_t s = 0; s < 400; ++s) out.push_back(generate_table(s));
    return out;
  }();
  return ts;
}

const std::vector<QARecord>& records() {
  static const auto rs = [] {
    std::vector<QARecord> out;
    for (std::size_t i = 0; i < 200; ++i) {
      QARecord r;
      r.record_id = "r" + std::to_string(i);
      r.dataset_id = "bench";
      r.question = "How many rows are in table " + std::to_string(i) + "?";
      r.gold_answers = {"1"};
      r.table = tables()[i].table;
      out.push_back(std::move(r));
    }
    return out;
  }();
  return rs;
}

struct Scoring {
  std::vector<SubTaskInstance> suite;
  std::vector<std::string> preds;
};

const Scoring& scoring() {
  static const Scoring s = [] {
    std::vector<Table> pool;
    for (const auto& g : tables()) {
      if (g.n_rows > 0) pool.push_back(g.table);
    }
    Scoring out;
    out.suite = generate_structural(pool, 400, 11);
    for (std::size_t i = 0; i < out.suite.size(); ++i) {
      out.preds.push_back(i % 4 ? out.suite[i].gold_text : "none of them");
    }
    return out;
  }();
  return s;
}

kernels::RecordTask chain_task() {
  static ScriptedBackend backend("bench", {}, "1");
  static const auto spec = strategy_spec(StrategyKind::table_logic);
  ChainOptions opts;
  opts.model = "bench";
  return [opts](const QARecord& r) { return run_chain(r, spec, backend, opts); };
}

void BM_RunRecordsSerial(benchmark::State& state) {
  auto task = chain_task();
  for (auto _ : state) benchmark::DoNotOptimize(kernels::run_records_serial(records(), task));
}

void BM_RunRecordsParallel(benchmark::State& state) {
  auto task = chain_task();
  const int workers = static_cast<int>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(kernels::run_records_parallel(records(), task, workers));
  }
}

void BM_VerifyOraclesSerial(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(kernels::verify_oracles_serial(tables()));
}

void BM_VerifyOraclesParallel(benchmark::State& state) {
  const int workers = static_cast<int>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(kernels::verify_oracles_parallel(tables(), workers));
  }
}

void BM_ScoreStructuralSerial(benchmark::State& state) {
  const auto& s = scoring();
  for (auto _ : state) benchmark::DoNotOptimize(kernels::score_structural_serial(s.suite, s.preds));
}

void BM_ScoreStructuralParallel(benchmark::State& state) {
  const auto& s = scoring();
  const int workers = static_cast<int>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(kernels::score_structural_parallel(s.suite, s.preds, workers));
  }
}

void worker_args(benchmark::internal::Benchmark* b) {
  for (int w = 1; w <= kernels::max_workers(); w *= 2) b->Arg(w);
  if ((kernels::max_workers() & (kernels::max_workers() - 1)) != 0) b->Arg(kernels::max_workers());
}

}  // namespace

BENCHMARK(BM_RunRecordsSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_RunRecordsParallel)->Apply(worker_args)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_VerifyOraclesSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_VerifyOraclesParallel)->Apply(worker_args)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ScoreStructuralSerial)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_ScoreStructuralParallel)->Apply(worker_args)->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
