#include "tablelogic/kernels.hpp"

#include <algorithm>
#include <exception>
#include <map>
#include <mutex>
#include <optional>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "tablelogic/errors.hpp"

namespace tablelogic::kernels {

int max_workers() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

std::vector<ChainTrace> run_records_serial(const std::vector<QARecord>& records,
                                           const RecordTask& task, const TraceSink& sink) {
  std::vector<ChainTrace> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    out.push_back(task(r));
    if (sink) sink(out.back());
  }
  return out;
}

namespace {

// Holds finished traces until every earlier index has been flushed.
class OrderedFlush {
 public:
  OrderedFlush(std::vector<std::optional<ChainTrace>>& slots, const TraceSink& sink)
      : slots_(slots), sink_(sink) {}

  void done(std::size_t i, ChainTrace trace) {
    std::lock_guard lock(mu_);
    slots_[i] = std::move(trace);
    while (next_ < slots_.size() && slots_[next_]) {
      if (sink_) sink_(*slots_[next_]);
      ++next_;
    }
  }

 private:
  std::vector<std::optional<ChainTrace>>& slots_;
  const TraceSink& sink_;
  std::mutex mu_;
  std::size_t next_ = 0;
};

}  // namespace

std::vector<ChainTrace> run_records_parallel(const std::vector<QARecord>& records,
                                             const RecordTask& task, int workers,
                                             const TraceSink& sink) {
  const long n = static_cast<long>(records.size());
  std::vector<std::optional<ChainTrace>> slots(records.size());
  OrderedFlush flush(slots, sink);
  std::exception_ptr error;
  std::mutex error_mu;
  workers = std::max(workers, 1);

#pragma omp parallel for schedule(dynamic, 1) num_threads(workers)
  for (long i = 0; i < n; ++i) {
    {
      std::lock_guard lock(error_mu);
      if (error) continue;
    }
    try {
      flush.done(static_cast<std::size_t>(i), task(records[static_cast<std::size_t>(i)]));
    } catch (...) {
      std::lock_guard lock(error_mu);
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);

  std::vector<ChainTrace> out;
  out.reserve(slots.size());
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

namespace {

// Checks one generated table; appends failure messages to `msgs`.
std::size_t check_table(const GeneratedTable& g, std::size_t& checks,
                        std::vector<std::string>& msgs) {
  std::size_t failures = 0;
  auto fail = [&](std::string m) {
    ++failures;
    msgs.push_back(g.table.name + ": " + std::move(m));
  };
  ++checks;
  if (count_rows(g.table) != g.n_rows) fail("count_rows");
  ++checks;
  if (count_columns(g.table) != g.n_cols) fail("count_columns");

  for (std::size_t r = 0; r < g.n_rows; ++r) {
    for (std::size_t c = 0; c < g.n_cols; ++c) {
      ++checks;
      const std::string& v = value_lookup(g.table, {r, c});
      if (v != g.placed[r][c]) {
        fail("value_lookup(" + std::to_string(r) + "," + std::to_string(c) + ")");
        continue;
      }
      if (v == g.planted_value) continue;
      // Every other cell is unique, so the finders must return exactly it.
      ++checks;
      if (row_find(g.table, v) != std::vector<std::size_t>{r}) {
        fail("row_find(" + v + ")");
      }
      ++checks;
      auto cols = column_find(g.table, v);
      if (cols != std::vector<std::size_t>{c}) fail("column_find(" + v + ")");
    }
  }
  if (!g.planted_value.empty()) {
    ++checks;
    if (row_find(g.table, g.planted_value) != g.planted_rows) fail("row_find(planted)");
    ++checks;
    if (column_find(g.table, g.planted_value) != std::vector<std::size_t>{g.planted_col}) {
      fail("column_find(planted)");
    }
  }
  ++checks;
  if (!row_find(g.table, "absent-value-xyz").empty() ||
      !column_find(g.table, "absent-value-xyz").empty()) {
    fail("absent value matched");
  }
  return failures;
}

void merge(OracleCheck& into, std::size_t checks, std::size_t failures,
           std::vector<std::string>& msgs) {
  into.checks += checks;
  into.failures += failures;
  for (auto& m : msgs) {
    if (into.first_failures.size() < 10) into.first_failures.push_back(std::move(m));
  }
}

}  // namespace

OracleCheck verify_oracles_serial(const std::vector<GeneratedTable>& tables) {
  OracleCheck out;
  out.tables = tables.size();
  for (const auto& g : tables) {
    std::size_t checks = 0;
    std::vector<std::string> msgs;
    std::size_t f = check_table(g, checks, msgs);
    merge(out, checks, f, msgs);
  }
  return out;
}

OracleCheck verify_oracles_parallel(const std::vector<GeneratedTable>& tables, int workers) {
  const long n = static_cast<long>(tables.size());
  std::vector<std::size_t> checks(tables.size()), failures(tables.size());
  std::vector<std::vector<std::string>> msgs(tables.size());

#pragma omp parallel for schedule(dynamic, 8) num_threads(std::max(workers, 1))
  for (long i = 0; i < n; ++i) {
    auto k = static_cast<std::size_t>(i);
    failures[k] = check_table(tables[k], checks[k], msgs[k]);
  }

  // Merge in table order so the failure list matches the serial kernel.
  OracleCheck out;
  out.tables = tables.size();
  for (std::size_t k = 0; k < tables.size(); ++k) merge(out, checks[k], failures[k], msgs[k]);
  return out;
}

std::vector<Verdict> score_structural_serial(const std::vector<SubTaskInstance>& suite,
                                             const std::vector<std::string>& predictions) {
  if (suite.size() != predictions.size()) throw EvalError("suite/prediction size mismatch");
  std::vector<Verdict> out(suite.size());
  for (std::size_t i = 0; i < suite.size(); ++i) out[i] = score_structural(suite[i], predictions[i]);
  return out;
}

std::vector<Verdict> score_structural_parallel(const std::vector<SubTaskInstance>& suite,
                                               const std::vector<std::string>& predictions,
                                               int workers) {
  if (suite.size() != predictions.size()) throw EvalError("suite/prediction size mismatch");
  const long n = static_cast<long>(suite.size());
  std::vector<Verdict> out(suite.size());
#pragma omp parallel for schedule(static) num_threads(std::max(workers, 1))
  for (long i = 0; i < n; ++i) {
    auto k = static_cast<std::size_t>(i);
    out[k] = score_structural(suite[k], predictions[k]);
  }
  return out;
}

}  // namespace tablelogic::kernels
