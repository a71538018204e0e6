#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <fstream>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tablelogic/backend.hpp"
#include "tablelogic/dataset.hpp"
#include "tablelogic/prompt.hpp"

namespace tablelogic {

inline constexpr std::string_view kTraceSchema = "tablelogic.trace/1";

struct StepRecord {
  std::string template_id;
  std::string prompt;    // empty for substituted steps
  std::string response;  // raw model text, or the injected text
  std::int64_t timestamp_ms = 0;
  bool cached = false;
  /// Set when the step was not generated but taken from another model's run.
  std::string substituted_from;

  bool substituted() const { return !substituted_from.empty(); }
  bool operator==(const StepRecord&) const = default;
};

struct Intermediates {
  std::optional<std::string> column;
  std::optional<std::string> row;
  std::optional<std::string> aggregation;
  std::optional<std::string> knowledge;

  bool operator==(const Intermediates&) const = default;
};

enum class TraceStatus { ok, failed };

struct ChainTrace {
  std::string record_id;
  std::string dataset_id;
  std::string model;  // configured model label
  StrategyKind strategy = StrategyKind::vanilla;
  std::string question;
  std::vector<std::string> gold_answers;
  std::vector<StepRecord> steps;
  Intermediates intermediates;
  std::string final_prediction;
  TraceStatus status = TraceStatus::ok;
  std::string error;  // failure marker text when status == failed
  /// "<small model>-><big model>" style tag for replacement runs.
  std::string variant;

  bool ok() const { return status == TraceStatus::ok; }
  /// Steps that actually reached a backend.
  std::size_t backend_calls() const;
  bool operator==(const ChainTrace&) const = default;
};

nlohmann::json to_json(const ChainTrace& trace);
/// Throws `ChainError` on schema mismatch or missing fields.
ChainTrace trace_from_json(const nlohmann::json& j);

/// Intermediate texts taken from one run, to be spliced into another.
struct InjectionPayload {
  std::string source_model;
  std::optional<std::string> column;
  std::optional<std::string> row;
  std::optional<std::string> aggregation;

  bool empty() const { return !column && !row && !aggregation; }
  bool operator==(const InjectionPayload&) const = default;
};

nlohmann::json to_json(const InjectionPayload& payload);
InjectionPayload payload_from_json(const nlohmann::json& j);

struct ChainOptions {
  const TemplateSet* templates = &TemplateSet::builtin();
  std::string model;     // label recorded in the trace
  std::string model_id;  // id sent with each request
  Decoding decoding;
  /// Appends the record's passages to the {table} text.
  bool include_passages = false;
  /// Step timestamps. Unset means a logical clock that always reads 0, which
  /// keeps traces byte-stable across runs.
  std::function<std::int64_t()> clock;
};

/// The {table} text for a record: dict-format table, plus passages when asked.
std::string table_text(const QARecord& record, bool include_passages);

/// Runs `strategy` over `record`. A `BackendError` at step k yields a failed
/// trace holding the k-1 completed steps. The vanilla_with_column_row and
/// vanilla_with_aggregation variants read their extra block from `augment`
/// and throw `ChainError` without it.
ChainTrace run_chain(const QARecord& record, const StrategySpec& strategy,
                     Backend& backend, const ChainOptions& opts,
                     const InjectionPayload* augment = nullptr);

/// Table-Logic with each populated payload field replacing the step that
/// would have generated it. Throws `ChainError` for an empty payload.
ChainTrace run_with_injection(const QARecord& record,
                              const InjectionPayload& payload, Backend& backend,
                              const ChainOptions& opts);

/// Throws `ChainError` unless the trace is a completed table_logic run.
InjectionPayload harvest_intermediates(const ChainTrace& trace);

/// Human-readable splice-integrity violations; empty means the trace is sound.
std::vector<std::string> splice_violations(const ChainTrace& trace);

// ---------------------------------------------------------------------------
// Trace store: one JSON object per line.

class TraceWriter {
 public:
  /// Appends to an existing file unless `truncate`.
  explicit TraceWriter(const std::filesystem::path& path, bool truncate = false);

  void append(const ChainTrace& trace);
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::mutex mu_;
  std::ofstream out_;
};

/// Reads a trace file. A torn final line (interrupted run) is dropped.
std::vector<ChainTrace> read_traces(const std::filesystem::path& path);

}  // namespace tablelogic
