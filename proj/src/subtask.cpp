#include "tablelogic/subtask.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <random>
#include <set>

#include "tablelogic/errors.hpp"
#include "tablelogic/text.hpp"

namespace tablelogic {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view subtask_name(SubTaskKind kind) {
  switch (kind) {
    case SubTaskKind::count_rows: return "count_rows";
    case SubTaskKind::count_columns: return "count_columns";
    case SubTaskKind::value_lookup: return "value_lookup";
    case SubTaskKind::row_finding: return "row_finding";
    case SubTaskKind::column_finding: return "column_finding";
    case SubTaskKind::critical_replacement: return "critical_replacement";
    case SubTaskKind::aggregation_replacement: return "aggregation_replacement";
  }
  return "unknown";
}

const std::vector<SubTaskKind>& all_subtasks() {
  static const std::vector<SubTaskKind> kinds = {
      SubTaskKind::count_rows,           SubTaskKind::count_columns,
      SubTaskKind::value_lookup,         SubTaskKind::column_finding,
      SubTaskKind::row_finding,          SubTaskKind::critical_replacement,
      SubTaskKind::aggregation_replacement};
  return kinds;
}

const std::vector<SubTaskKind>& oracle_kinds() {
  static const std::vector<SubTaskKind> kinds(all_subtasks().begin(),
                                              all_subtasks().begin() + 5);
  return kinds;
}

bool is_oracle_kind(SubTaskKind kind) {
  return kind != SubTaskKind::critical_replacement &&
         kind != SubTaskKind::aggregation_replacement;
}

SubTaskKind parse_subtask(std::string_view name) {
  for (auto k : all_subtasks()) {
    if (subtask_name(k) == name) return k;
  }
  throw EvalError("unknown sub-task kind '" + std::string(name) + "'");
}

namespace {

constexpr std::string_view kRowConvention =
    "Data rows are numbered from 1, excluding the header row.";
constexpr std::string_view kColConvention = "Columns are numbered from 1, from left to right.";

std::size_t draw(std::mt19937_64& rng, std::size_t n) {
  return static_cast<std::size_t>(rng() % n);
}

std::vector<std::size_t> one_based(const std::vector<std::size_t>& idx) {
  std::vector<std::size_t> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(i + 1);
  return out;
}

std::string quote(std::string_view v) { return "\"" + std::string(v) + "\""; }

void fill_question(SubTaskInstance& inst) {
  switch (inst.kind) {
    case SubTaskKind::count_rows:
      inst.question = "How many rows does this table have? Count the data rows only, " +
                      std::string("excluding the header row. Answer with a single number.");
      break;
    case SubTaskKind::count_columns:
      inst.question = "How many columns does this table have? Answer with a single number.";
      break;
    case SubTaskKind::value_lookup:
      inst.question = "What is the value in row " + std::to_string(inst.target->row + 1) +
                      " and column " + std::to_string(inst.target->col + 1) +
                      " of this table? " + std::string(kRowConvention) + " " +
                      std::string(kColConvention) + " Answer with the cell value only.";
      break;
    case SubTaskKind::row_finding:
      inst.question = "Which row of this table contains the value " + quote(inst.target_value) +
                      "? " + std::string(kRowConvention) + " Answer with the row number.";
      break;
    case SubTaskKind::column_finding:
      inst.question = "Which column of this table contains the value " +
                      quote(inst.target_value) + "? " + std::string(kColConvention) +
                      " Answer with the column number.";
      break;
    default:
      break;
  }
}

// A token absent from the table, derived from the rng stream.
std::string fresh_token(const Table& t, std::mt19937_64& rng) {
  for (;;) {
    std::string tok = "zq" + std::to_string(rng() % 1000000);
    if (row_find(t, tok).empty() && column_find(t, tok).empty()) return tok;
  }
}

bool eligible(const Table& t, SubTaskKind kind) {
  switch (kind) {
    case SubTaskKind::count_rows:
    case SubTaskKind::count_columns: return true;
    default: return !t.rows.empty();
  }
}

std::optional<SubTaskInstance> make_instance(const Table& source, SubTaskKind kind,
                                             std::mt19937_64& rng,
                                             const StructuralOptions& opts) {
  SubTaskInstance inst;
  inst.kind = kind;
  inst.table = source;
  Table& t = inst.table;
  switch (kind) {
    case SubTaskKind::count_rows:
    case SubTaskKind::count_columns:
      break;
    case SubTaskKind::value_lookup:
      inst.target = CellAddress{draw(rng, t.rows.size()), draw(rng, t.header.size())};
      break;
    case SubTaskKind::row_finding:
    case SubTaskKind::column_finding: {
      if (opts.targets == FindingTargets::planted) {
        std::string tok = fresh_token(t, rng);
        const bool multi = static_cast<double>(rng() % 1000) < opts.multi_match_rate * 1000.0;
        std::size_t r = draw(rng, t.rows.size());
        std::size_t c = draw(rng, t.header.size());
        t.rows[r][c] = tok;
        if (multi) {
          // Second copy in a different row (row_finding) or column (column_finding).
          if (kind == SubTaskKind::row_finding && t.rows.size() > 1) {
            std::size_t r2 = (r + 1 + draw(rng, t.rows.size() - 1)) % t.rows.size();
            t.rows[r2][draw(rng, t.header.size())] = tok;
          } else if (kind == SubTaskKind::column_finding && t.header.size() > 1) {
            std::size_t c2 = (c + 1 + draw(rng, t.header.size() - 1)) % t.header.size();
            t.rows[draw(rng, t.rows.size())][c2] = tok;
          }
        }
        inst.target_value = tok;
      } else {
        // Existing cell; retry a few times to avoid blank cells.
        for (int attempt = 0; attempt < 8 && inst.target_value.empty(); ++attempt) {
          const auto& cell = t.rows[draw(rng, t.rows.size())][draw(rng, t.header.size())];
          if (!text::trim(cell).empty()) inst.target_value = cell;
        }
        if (inst.target_value.empty()) return std::nullopt;
      }
      break;
    }
    default:
      return std::nullopt;
  }
  fill_question(inst);
  auto [gold_text, gold_indices] = recompute_gold(inst);
  inst.gold_text = std::move(gold_text);
  inst.gold_indices = std::move(gold_indices);
  return inst;
}

}  // namespace

std::pair<std::string, std::vector<std::size_t>> recompute_gold(const SubTaskInstance& inst) {
  switch (inst.kind) {
    case SubTaskKind::count_rows: return {std::to_string(count_rows(inst.table)), {}};
    case SubTaskKind::count_columns: return {std::to_string(count_columns(inst.table)), {}};
    case SubTaskKind::value_lookup:
      if (!inst.target) throw EvalError("value_lookup instance without a target cell");
      return {value_lookup(inst.table, *inst.target), {}};
    case SubTaskKind::row_finding: return {"", one_based(row_find(inst.table, inst.target_value))};
    case SubTaskKind::column_finding:
      return {"", one_based(column_find(inst.table, inst.target_value))};
    default:
      throw EvalError(std::string(subtask_name(inst.kind)) + " has no oracle gold");
  }
}

std::vector<SubTaskInstance> generate_structural(const std::vector<Table>& tables,
                                                 std::size_t per_kind, std::uint64_t seed,
                                                 const StructuralOptions& opts) {
  std::vector<SubTaskInstance> out;
  for (auto kind : oracle_kinds()) {
    // Each kind has its own stream so adding tables to one kind's pool does
    // not shift the others.
    std::mt19937_64 rng(seed * 0x9E3779B97F4A7C15ULL + static_cast<std::uint64_t>(kind) + 1);
    std::vector<const Table*> pool;
    for (const auto& t : tables) {
      if (eligible(t, kind)) pool.push_back(&t);
    }
    if (pool.empty()) continue;
    std::size_t made = 0;
    for (std::size_t attempt = 0; made < per_kind && attempt < per_kind * 4; ++attempt) {
      auto inst = make_instance(*pool[draw(rng, pool.size())], kind, rng, opts);
      if (!inst) continue;
      inst->instance_id = std::string(subtask_name(kind)) + "-" + std::to_string(made);
      out.push_back(std::move(*inst));
      ++made;
    }
  }
  return out;
}

Verdict score_structural(const SubTaskInstance& inst, std::string_view prediction) {
  switch (inst.kind) {
    case SubTaskKind::count_rows:
    case SubTaskKind::count_columns: {
      auto n = text::first_integer(prediction);
      return n && std::to_string(*n) == inst.gold_text ? Verdict::correct : Verdict::incorrect;
    }
    case SubTaskKind::row_finding:
    case SubTaskKind::column_finding: {
      auto n = text::first_integer(prediction);
      if (!n || *n < 0) return Verdict::incorrect;
      return std::find(inst.gold_indices.begin(), inst.gold_indices.end(),
                       static_cast<std::size_t>(*n)) != inst.gold_indices.end()
                 ? Verdict::correct
                 : Verdict::incorrect;
    }
    case SubTaskKind::value_lookup:
      if (normalize_answer(prediction).empty()) return Verdict::incorrect;
      return exact_match(inst.gold_text, prediction);
    default:
      throw EvalError(std::string(subtask_name(inst.kind)) +
                      " is scored through the chain evaluator, not structurally");
  }
}

std::string probe_prompt(const SubTaskInstance& inst, const TemplateSet& templates) {
  PromptContext ctx;
  ctx.table = serialize_dict_format(inst.table);
  ctx.format = templates.reading_instruction();
  ctx.question = inst.question;
  return templates.render(template_ids::subtask_probe, ctx);
}

ProbeResult run_probe(const SubTaskInstance& inst, Backend& backend, const ChainOptions& opts) {
  ProbeResult r;
  r.instance_id = inst.instance_id;
  r.kind = inst.kind;
  r.model = opts.model;
  r.prompt = probe_prompt(inst, *opts.templates);
  try {
    r.response = backend.complete({opts.model_id, r.prompt, opts.decoding}).text;
    r.verdict = score_structural(inst, r.response);
  } catch (const BackendError& e) {
    r.error = e.what();
    r.verdict = Verdict::unevaluated;
  }
  return r;
}

EvalOutcome to_outcome(const ProbeResult& r, std::string_view dataset_id) {
  EvalOutcome o;
  o.record_id = r.instance_id;
  o.dataset_id = std::string(dataset_id);
  o.model = r.model;
  o.strategy = std::string(subtask_name(r.kind));
  o.prediction = r.response;
  o.verdict = r.verdict;
  o.method = ScoreMethod::oracle;
  return o;
}

// ---------------------------------------------------------------------------

json to_json(const SubTaskInstance& inst) {
  json j = {{"instance_id", inst.instance_id},
            {"kind", subtask_name(inst.kind)},
            {"question", inst.question},
            {"table_ref", inst.table.name},
            {"table", table_to_json(inst.table)}};
  if (inst.kind == SubTaskKind::row_finding || inst.kind == SubTaskKind::column_finding) {
    j["gold"] = inst.gold_indices;
    j["target_value"] = inst.target_value;
  } else if (is_oracle_kind(inst.kind)) {
    j["gold"] = inst.gold_text;
  }
  if (inst.target) j["target"] = {inst.target->row, inst.target->col};
  if (inst.source_record) j["source_record"] = to_json(*inst.source_record);
  return j;
}

SubTaskInstance instance_from_json(const json& j) {
  try {
    SubTaskInstance inst;
    inst.instance_id = j.at("instance_id").get<std::string>();
    inst.kind = parse_subtask(j.at("kind").get<std::string>());
    inst.question = j.at("question").get<std::string>();
    inst.table = table_from_json(j.at("table"));
    if (j.contains("gold")) {
      if (j["gold"].is_array()) {
        inst.gold_indices = j["gold"].get<std::vector<std::size_t>>();
      } else {
        inst.gold_text = j["gold"].get<std::string>();
      }
    }
    inst.target_value = j.value("target_value", std::string{});
    if (j.contains("target")) {
      inst.target = CellAddress{j["target"].at(0).get<std::size_t>(),
                                j["target"].at(1).get<std::size_t>()};
    }
    if (j.contains("source_record")) inst.source_record = record_from_json(j["source_record"]);
    return inst;
  } catch (const json::exception& e) {
    throw EvalError(std::string("malformed suite instance: ") + e.what());
  }
}

void write_suite(const fs::path& path, const std::vector<SubTaskInstance>& suite) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw EvalError("cannot write '" + path.string() + "'");
  for (const auto& inst : suite) out << to_json(inst).dump() << '\n';
}

std::vector<SubTaskInstance> read_suite(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw EvalError("cannot read '" + path.string() + "'");
  std::vector<SubTaskInstance> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!text::trim(line).empty()) out.push_back(instance_from_json(json::parse(line)));
  }
  return out;
}

ReplacementSuite build_replacement_suite(const std::vector<QARecord>& records,
                                         const std::vector<ChainTrace>& small_traces,
                                         SubTaskKind kind) {
  if (kind != SubTaskKind::critical_replacement &&
      kind != SubTaskKind::aggregation_replacement) {
    throw EvalError("build_replacement_suite needs a replacement kind");
  }
  std::map<std::pair<std::string, std::string>, const ChainTrace*> by_key;
  for (const auto& t : small_traces) {
    if (t.strategy == StrategyKind::table_logic && t.ok()) {
      by_key.emplace(std::make_pair(t.dataset_id, t.record_id), &t);
    }
  }
  ReplacementSuite suite;
  suite.kind = kind;
  for (const auto& rec : records) {
    auto it = by_key.find({rec.dataset_id, rec.record_id});
    if (it == by_key.end()) {
      ++suite.skipped;
      continue;
    }
    InjectionPayload full;
    try {
      full = harvest_intermediates(*it->second);
    } catch (const ChainError&) {
      ++suite.skipped;
      continue;
    }
    InjectionPayload p;
    p.source_model = full.source_model;
    if (kind == SubTaskKind::critical_replacement) {
      p.column = full.column;
      p.row = full.row;
    } else {
      p.aggregation = full.aggregation;
    }
    suite.pairs.push_back({rec, std::move(p)});
  }
  return suite;
}

}  // namespace tablelogic
