#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "tablelogic/table.hpp"

namespace tablelogic {

struct QARecord {
  std::string record_id;
  std::string dataset_id;
  Table table;
  std::string question;
  std::vector<std::string> gold_answers;  // any one counts as correct
  std::vector<std::string> passages;      // hybrid datasets only
  std::string split;

  bool operator==(const QARecord&) const = default;
};

nlohmann::json to_json(const QARecord& record);
/// Throws `DatasetError` describing the first invalid field.
QARecord record_from_json(const nlohmann::json& j);

nlohmann::json table_to_json(const Table& table);
Table table_from_json(const nlohmann::json& j);

enum class DatasetSchema { normalized, wikitq, hybridqa, tatqa };

DatasetSchema parse_schema(std::string_view name);
std::string_view schema_name(DatasetSchema schema);

struct RecordError {
  std::size_t index = 0;  // 0-based position in the source file
  std::string message;
};

struct LoadResult {
  std::vector<QARecord> records;
  std::vector<RecordError> errors;
  std::vector<std::string> warnings;
};

/// Loads `path` under `schema`, normalizing into QARecords.
///
/// Native layouts:
///  - normalized: one JSON object per line (see `to_json`).
///  - wikitq: the `data/*.tsv` question files (id, utterance, context,
///    targetValue); `context` is resolved against the dataset root, taken to
///    be the parent of the tsv's directory. Answers split on '|'.
///  - hybridqa: a released question file (JSON array with question_id,
///    question, table_id, answer-text); tables are read from
///    `<root>/WikiTables-WithLinks/tables_tok/<table_id>.json` and passages
///    from `.../request_tok/<table_id>.json` when present.
///  - tatqa: the released JSON array of {table, paragraphs, questions}; the
///    first table row is the header.
///
/// A malformed record becomes a `RecordError` and loading continues; an
/// unreadable file throws `DatasetError`.
LoadResult load_normalized(const std::filesystem::path& path,
                           DatasetSchema schema = DatasetSchema::normalized,
                           const std::filesystem::path& root = {});

/// Writes records one JSON object per line.
void write_normalized(const std::filesystem::path& path,
                      const std::vector<QARecord>& records);

struct SamplePlan {
  std::size_t per_dataset_count = 0;
  std::uint64_t seed = 0;
};

/// Reproducible subset of `plan.per_dataset_count` records (all of them when
/// fewer exist), returned in input order.
std::vector<QARecord> sample(const std::vector<QARecord>& records,
                             const SamplePlan& plan);

/// Indices chosen by `sample`; exposed for tests.
std::vector<std::size_t> sample_indices(std::size_t n, const SamplePlan& plan);

}  // namespace tablelogic
