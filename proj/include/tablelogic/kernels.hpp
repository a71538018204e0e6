#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "tablelogic/chain.hpp"
#include "tablelogic/dataset.hpp"
#include "tablelogic/generator.hpp"
#include "tablelogic/subtask.hpp"

// Batch kernels. Each has a serial reference and an OpenMP version that must
// return identical results; tests compare the two.
namespace tablelogic::kernels {

using RecordTask = std::function<ChainTrace(const QARecord&)>;
/// Receives finished traces in input order, one at a time.
using TraceSink = std::function<void(const ChainTrace&)>;

std::vector<ChainTrace> run_records_serial(const std::vector<QARecord>& records,
                                           const RecordTask& task, const TraceSink& sink = {});

/// Records run concurrently on up to `workers` threads; one record's chain
/// stays sequential. The sink still sees traces in input order.
std::vector<ChainTrace> run_records_parallel(const std::vector<QARecord>& records,
                                             const RecordTask& task, int workers,
                                             const TraceSink& sink = {});

/// Per-table oracle check against the generator's placement record.
struct OracleCheck {
  std::size_t tables = 0;
  std::size_t checks = 0;
  std::size_t failures = 0;
  std::vector<std::string> first_failures;  // capped at 10

  bool operator==(const OracleCheck&) const = default;
};

OracleCheck verify_oracles_serial(const std::vector<GeneratedTable>& tables);
OracleCheck verify_oracles_parallel(const std::vector<GeneratedTable>& tables, int workers);

std::vector<Verdict> score_structural_serial(const std::vector<SubTaskInstance>& suite,
                                             const std::vector<std::string>& predictions);
std::vector<Verdict> score_structural_parallel(const std::vector<SubTaskInstance>& suite,
                                               const std::vector<std::string>& predictions,
                                               int workers);

/// Number of OpenMP threads available (1 when built without OpenMP).
int max_workers();

}  // namespace tablelogic::kernels
