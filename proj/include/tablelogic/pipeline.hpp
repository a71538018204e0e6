#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "tablelogic/backend.hpp"
#include "tablelogic/config.hpp"
#include "tablelogic/dataset.hpp"
#include "tablelogic/evaluator.hpp"
#include "tablelogic/report.hpp"

// Stage drivers behind the command-line tool. Each stage owns one
// subdirectory of the run directory and only reads the others:
//
//   <run>/run/      records/<dataset>.jsonl, traces/<model>/<dataset>/<strategy>.jsonl
//   <run>/bench/    suites/<dataset>.jsonl, outcomes/<model>/<dataset>.jsonl
//   <run>/replace/  traces/<small>__<big>/<dataset>/<kind>.jsonl
//   <run>/eval/     outcomes/{run,replace}/... mirroring the trace files
//   <run>/report/   table1..3, accuracy, figure3/4, manifest.json
//   <run>/cache/    response cache (unless run.cache_dir says otherwise)
//
// Every stage directory also gets config.resolved.ini.
namespace tablelogic::pipeline {

using BackendFactory = std::function<std::shared_ptr<Backend>(const BackendConfig&)>;

struct StageContext {
  RunConfig config;
  std::filesystem::path run_dir;
  std::ostream* log = nullptr;  // one summary line per group; may be null
  bool wall_clock = false;      // real step timestamps instead of 0
  BackendFactory factory;       // defaults to make_backend
};

struct StageStats {
  std::size_t backend_calls = 0;  // calls that went past the cache
  std::size_t items = 0;          // traces, probes or outcomes produced
  std::size_t skipped = 0;        // already complete from an earlier run
  std::size_t failed = 0;
};

struct ConvertResult {
  std::size_t records = 0;
  std::vector<RecordError> errors;
  std::vector<std::string> warnings;
};

/// Native dataset file -> normalized jsonl. `dataset_id` overrides the id
/// stored in each record when non-empty.
ConvertResult convert(const std::filesystem::path& input, DatasetSchema schema,
                      const std::filesystem::path& root, const std::filesystem::path& output,
                      const std::string& dataset_id = {});

struct PlannedGroup {
  std::string dataset;
  std::string model;
  std::string strategy;
  std::size_t records = 0;
  std::size_t calls = 0;
  std::size_t prompt_bytes = 0;  // lower bound: table text repeated per call
};

struct RunPlan {
  std::vector<PlannedGroup> groups;
  std::size_t chain_calls = 0;
  std::size_t judge_calls = 0;  // one per trace; ambiguous replies add a retry
  std::size_t prompt_bytes = 0;
};

/// What `run` would do, without building backends or touching disk beyond
/// reading the datasets.
RunPlan plan_run(const StageContext& ctx);
std::string describe_plan(const RunPlan& plan);

/// Executes every (dataset, model, strategy). Records with a completed trace
/// in the output file are skipped, so a rerun after an interruption only
/// finishes the rest.
StageStats run(const StageContext& ctx);

/// Structural sub-task probes for every configured model.
StageStats bench(const StageContext& ctx);

/// Smaller-model intermediates spliced into bigger-model chains for each
/// (smaller, bigger) pair. Needs the run stage's table_logic traces.
StageStats replace(const StageContext& ctx);

/// Scores every trace file from run and replace. `method` overrides
/// run.eval_method when set.
StageStats eval(const StageContext& ctx, std::optional<ScoreMethod> method = {});

/// Writes the report directory.
StageStats report(const StageContext& ctx, const std::vector<ReportFormat>& formats = {
    ReportFormat::markdown, ReportFormat::csv, ReportFormat::structured});

/// Pairs two outcome files by record id (and model, strategy, variant) and
/// returns their agreement. Throws `EvalError` when nothing pairs up.
struct AgreementResult {
  std::size_t paired = 0;
  std::size_t comparable = 0;
  double agreement = 0.0;
};
AgreementResult agree(const std::filesystem::path& a, const std::filesystem::path& b);

}  // namespace tablelogic::pipeline
