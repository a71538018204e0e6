#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "tablelogic/backend.hpp"
#include "tablelogic/chain.hpp"
#include "tablelogic/dataset.hpp"
#include "tablelogic/evaluator.hpp"
#include "tablelogic/table.hpp"

namespace tablelogic {

enum class SubTaskKind {
  count_rows,
  count_columns,
  value_lookup,
  row_finding,
  column_finding,
  critical_replacement,
  aggregation_replacement,
};

std::string_view subtask_name(SubTaskKind kind);
SubTaskKind parse_subtask(std::string_view name);
/// The five kinds with deterministic gold, in table order.
const std::vector<SubTaskKind>& oracle_kinds();
const std::vector<SubTaskKind>& all_subtasks();
bool is_oracle_kind(SubTaskKind kind);

/// One probe. Indices inside `target` are 0-based; `gold_indices` and the
/// question text are 1-based, and the question says so.
struct SubTaskInstance {
  std::string instance_id;
  SubTaskKind kind = SubTaskKind::count_rows;
  Table table;
  std::string question;
  std::string gold_text;                  // count kinds and value_lookup
  std::vector<std::size_t> gold_indices;  // finding kinds
  std::optional<CellAddress> target;      // value_lookup
  std::string target_value;               // finding kinds
  std::optional<QARecord> source_record;  // replacement kinds

  bool operator==(const SubTaskInstance&) const = default;
};

nlohmann::json to_json(const SubTaskInstance& inst);
SubTaskInstance instance_from_json(const nlohmann::json& j);
void write_suite(const std::filesystem::path& path,
                 const std::vector<SubTaskInstance>& suite);
std::vector<SubTaskInstance> read_suite(const std::filesystem::path& path);

enum class FindingTargets { existing_cells, planted };

struct StructuralOptions {
  FindingTargets targets = FindingTargets::existing_cells;
  /// Share of planted finding instances that carry the value in two places.
  double multi_match_rate = 0.1;
};

/// `per_kind` instances for each of the five oracle kinds (fewer if no table
/// is large enough for a kind). Deterministic for a given seed.
std::vector<SubTaskInstance> generate_structural(const std::vector<Table>& tables,
                                                 std::size_t per_kind, std::uint64_t seed,
                                                 const StructuralOptions& opts = {});

/// Recomputes the gold of an oracle-kind instance from its stored table and
/// parameters. Returns {gold_text, gold_indices}.
std::pair<std::string, std::vector<std::size_t>> recompute_gold(const SubTaskInstance& inst);

/// Count and finding kinds compare the first integer in the prediction;
/// value_lookup compares normalized text. A prediction with nothing to
/// extract is incorrect. Throws `EvalError` for replacement kinds.
Verdict score_structural(const SubTaskInstance& inst, std::string_view prediction);

/// Prompt sent to a model for an oracle-kind instance.
std::string probe_prompt(const SubTaskInstance& inst,
                         const TemplateSet& templates = TemplateSet::builtin());

struct ProbeResult {
  std::string instance_id;
  SubTaskKind kind = SubTaskKind::count_rows;
  std::string model;
  std::string prompt;
  std::string response;
  Verdict verdict = Verdict::unevaluated;
  std::string error;
};

/// Sends one probe and scores it; backend failure -> unevaluated.
ProbeResult run_probe(const SubTaskInstance& inst, Backend& backend, const ChainOptions& opts);

/// Probe results as outcomes (strategy = sub-task name, method = oracle).
EvalOutcome to_outcome(const ProbeResult& r, std::string_view dataset_id);

// ---------------------------------------------------------------------------
// Replacement experiments

struct ReplacementPair {
  QARecord record;
  InjectionPayload payload;
};

struct ReplacementSuite {
  SubTaskKind kind = SubTaskKind::critical_replacement;
  std::vector<ReplacementPair> pairs;
  std::size_t skipped = 0;  // records with no usable small-model trace
};

/// Joins records with completed table_logic traces on (dataset, record id).
/// critical_replacement keeps column+row; aggregation_replacement keeps the
/// aggregation text only.
ReplacementSuite build_replacement_suite(const std::vector<QARecord>& records,
                                         const std::vector<ChainTrace>& small_traces,
                                         SubTaskKind kind);

}  // namespace tablelogic
