#include "tablelogic/chain.hpp"

#include <sstream>

#include "tablelogic/errors.hpp"
#include "tablelogic/table.hpp"
#include "tablelogic/text.hpp"

namespace tablelogic {

namespace fs = std::filesystem;
using nlohmann::json;

std::size_t ChainTrace::backend_calls() const {
  std::size_t n = 0;
  for (const auto& s : steps) n += s.substituted() ? 0 : 1;
  return n;
}

namespace {

json opt_json(const std::optional<std::string>& v) { return v ? json(*v) : json(nullptr); }

std::optional<std::string> opt_from(const json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  return j[key].get<std::string>();
}

std::optional<std::string>* slot_of(Intermediates& im, Slot s) {
  switch (s) {
    case Slot::column: return &im.column;
    case Slot::row: return &im.row;
    case Slot::aggregation: return &im.aggregation;
    case Slot::knowledge: return &im.knowledge;
    default: return nullptr;
  }
}

std::string_view slot_placeholder(Slot s) {
  switch (s) {
    case Slot::column: return "column";
    case Slot::row: return "row";
    case Slot::aggregation: return "aggregation";
    case Slot::knowledge: return "knowledge";
    default: return "";
  }
}

const std::optional<std::string>* payload_field(const InjectionPayload& p, Slot s) {
  switch (s) {
    case Slot::column: return &p.column;
    case Slot::row: return &p.row;
    case Slot::aggregation: return &p.aggregation;
    default: return nullptr;
  }
}

ChainTrace run_steps(const QARecord& record, const StrategySpec& strategy,
                     Backend& backend, const ChainOptions& opts,
                     const InjectionPayload* augment,
                     const InjectionPayload* injection) {
  const TemplateSet& templates = *opts.templates;
  check_strategy(templates, strategy);

  ChainTrace trace;
  trace.record_id = record.record_id;
  trace.dataset_id = record.dataset_id;
  trace.model = opts.model;
  trace.strategy = strategy.kind;
  trace.question = record.question;
  trace.gold_answers = record.gold_answers;

  PromptContext ctx;
  ctx.table = table_text(record, opts.include_passages);
  ctx.question = record.question;
  ctx.format = templates.reading_instruction();

  switch (strategy.kind) {
    case StrategyKind::vanilla_with_structure:
      ctx.structure = structure_description(record.table);
      break;
    case StrategyKind::vanilla_with_column_row:
      if (!augment || !augment->column || !augment->row) {
        throw ChainError("vanilla_with_column_row needs critical columns and rows for record " +
                         record.record_id);
      }
      ctx.column = trace.intermediates.column = augment->column;
      ctx.row = trace.intermediates.row = augment->row;
      break;
    case StrategyKind::vanilla_with_aggregation:
      if (!augment || !augment->aggregation) {
        throw ChainError("vanilla_with_aggregation needs an aggregation text for record " +
                         record.record_id);
      }
      ctx.aggregation = trace.intermediates.aggregation = augment->aggregation;
      break;
    default:
      break;
  }

  auto now = [&]() -> std::int64_t { return opts.clock ? opts.clock() : 0; };

  for (std::size_t k = 0; k < strategy.steps.size(); ++k) {
    const StepSpec& step = strategy.steps[k];
    StepRecord rec;
    rec.template_id = step.template_id;

    const std::optional<std::string>* injected =
        injection ? payload_field(*injection, step.output) : nullptr;
    if (injected && injected->has_value()) {
      rec.response = **injected;
      rec.substituted_from = injection->source_model;
      rec.timestamp_ms = now();
    } else {
      rec.prompt = templates.render(step.template_id, ctx);
      CompletionRequest req{opts.model_id, rec.prompt, opts.decoding};
      try {
        CompletionResult res = backend.complete(req);
        rec.response = std::move(res.text);
        rec.cached = res.cached;
      } catch (const BackendError& e) {
        trace.status = TraceStatus::failed;
        trace.error = "step " + std::to_string(k + 1) + " (" + step.template_id +
                      "): " + e.what();
        return trace;
      }
      rec.timestamp_ms = now();
    }

    if (auto* s = slot_of(trace.intermediates, step.output)) *s = rec.response;
    if (auto* c = ctx.slot(slot_placeholder(step.output))) *c = rec.response;
    if (step.output == Slot::answer) trace.final_prediction = rec.response;
    trace.steps.push_back(std::move(rec));
  }
  return trace;
}

}  // namespace

std::string table_text(const QARecord& record, bool include_passages) {
  std::string out = serialize_dict_format(record.table);
  if (include_passages && !record.passages.empty()) {
    out += "\nPassages:";
    for (const auto& p : record.passages) out += "\n- " + p;
  }
  return out;
}

ChainTrace run_chain(const QARecord& record, const StrategySpec& strategy,
                     Backend& backend, const ChainOptions& opts,
                     const InjectionPayload* augment) {
  return run_steps(record, strategy, backend, opts, augment, nullptr);
}

ChainTrace run_with_injection(const QARecord& record, const InjectionPayload& payload,
                              Backend& backend, const ChainOptions& opts) {
  if (payload.empty()) {
    throw ChainError("injection payload for record " + record.record_id + " is empty");
  }
  return run_steps(record, strategy_spec(StrategyKind::table_logic), backend, opts,
                   nullptr, &payload);
}

InjectionPayload harvest_intermediates(const ChainTrace& trace) {
  if (trace.strategy != StrategyKind::table_logic) {
    throw ChainError("trace " + trace.record_id + " is a " +
                     std::string(strategy_name(trace.strategy)) +
                     " run; intermediates need table_logic");
  }
  if (!trace.ok()) throw ChainError("trace " + trace.record_id + " did not complete");
  const auto& im = trace.intermediates;
  if (!im.column || !im.row || !im.aggregation) {
    throw ChainError("trace " + trace.record_id + " lacks intermediates");
  }
  return InjectionPayload{trace.model, im.column, im.row, im.aggregation};
}

std::vector<std::string> splice_violations(const ChainTrace& trace) {
  std::vector<std::string> out;
  const StrategySpec spec = strategy_spec(trace.strategy);
  if (trace.ok() && trace.steps.size() != spec.call_count()) {
    out.push_back("trace " + trace.record_id + " has " + std::to_string(trace.steps.size()) +
                  " steps, strategy has " + std::to_string(spec.call_count()));
  }
  const std::size_t n = std::min(trace.steps.size(), spec.steps.size());
  for (std::size_t i = 0; i < n; ++i) {
    const StepRecord& cur = trace.steps[i];
    if (cur.template_id != spec.steps[i].template_id) {
      out.push_back("step " + std::to_string(i + 1) + " template '" + cur.template_id +
                    "' != '" + spec.steps[i].template_id + "'");
    }
    if (cur.substituted()) continue;
    const auto& supplied = spec.steps[i].supplied;
    for (std::size_t j = 0; j < i; ++j) {
      auto name = std::string(slot_placeholder(spec.steps[j].output));
      if (name.empty() || !supplied.count(name)) continue;
      if (!text::contains(cur.prompt, trace.steps[j].response)) {
        out.push_back("step " + std::to_string(i + 1) + " prompt lacks the {" + name +
                      "} response of step " + std::to_string(j + 1));
      }
    }
    // Augmented single-step variants splice text from another run.
    auto check_aug = [&](const char* name, const std::optional<std::string>& v) {
      if (supplied.count(name) && v && !text::contains(cur.prompt, *v)) {
        out.push_back("step " + std::to_string(i + 1) + " prompt lacks {" +
                      std::string(name) + "}");
      }
    };
    if (trace.strategy == StrategyKind::vanilla_with_column_row ||
        trace.strategy == StrategyKind::vanilla_with_aggregation) {
      check_aug("column", trace.intermediates.column);
      check_aug("row", trace.intermediates.row);
      check_aug("aggregation", trace.intermediates.aggregation);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

json to_json(const ChainTrace& t) {
  json steps = json::array();
  for (const auto& s : t.steps) {
    json js = {{"template", s.template_id},
               {"prompt", s.prompt},
               {"response", s.response},
               {"timestamp_ms", s.timestamp_ms},
               {"cached", s.cached}};
    if (s.substituted()) js["substituted_from"] = s.substituted_from;
    steps.push_back(std::move(js));
  }
  json j = {{"schema", kTraceSchema},
            {"record_id", t.record_id},
            {"dataset_id", t.dataset_id},
            {"model", t.model},
            {"strategy", strategy_name(t.strategy)},
            {"variant", t.variant},
            {"question", t.question},
            {"gold_answers", t.gold_answers},
            {"status", t.ok() ? "ok" : "failed"},
            {"error", t.error},
            {"steps", std::move(steps)},
            {"intermediates",
             {{"column", opt_json(t.intermediates.column)},
              {"row", opt_json(t.intermediates.row)},
              {"aggregation", opt_json(t.intermediates.aggregation)},
              {"knowledge", opt_json(t.intermediates.knowledge)}}},
            {"final_prediction", t.final_prediction}};
  return j;
}

ChainTrace trace_from_json(const json& j) {
  try {
    if (j.value("schema", std::string{}) != kTraceSchema) {
      throw ChainError("unsupported trace schema '" + j.value("schema", std::string{}) + "'");
    }
    ChainTrace t;
    t.record_id = j.at("record_id").get<std::string>();
    t.dataset_id = j.at("dataset_id").get<std::string>();
    t.model = j.at("model").get<std::string>();
    t.strategy = parse_strategy(j.at("strategy").get<std::string>());
    t.variant = j.value("variant", std::string{});
    t.question = j.at("question").get<std::string>();
    t.gold_answers = j.at("gold_answers").get<std::vector<std::string>>();
    t.status = j.at("status").get<std::string>() == "ok" ? TraceStatus::ok : TraceStatus::failed;
    t.error = j.value("error", std::string{});
    for (const auto& js : j.at("steps")) {
      StepRecord s;
      s.template_id = js.at("template").get<std::string>();
      s.prompt = js.at("prompt").get<std::string>();
      s.response = js.at("response").get<std::string>();
      s.timestamp_ms = js.at("timestamp_ms").get<std::int64_t>();
      s.cached = js.at("cached").get<bool>();
      s.substituted_from = js.value("substituted_from", std::string{});
      t.steps.push_back(std::move(s));
    }
    const json& im = j.at("intermediates");
    t.intermediates.column = opt_from(im, "column");
    t.intermediates.row = opt_from(im, "row");
    t.intermediates.aggregation = opt_from(im, "aggregation");
    t.intermediates.knowledge = opt_from(im, "knowledge");
    t.final_prediction = j.at("final_prediction").get<std::string>();
    return t;
  } catch (const json::exception& e) {
    throw ChainError(std::string("malformed trace: ") + e.what());
  } catch (const TemplateError& e) {
    throw ChainError(std::string("malformed trace: ") + e.what());
  }
}

json to_json(const InjectionPayload& p) {
  return json{{"source_model", p.source_model},
              {"column", opt_json(p.column)},
              {"row", opt_json(p.row)},
              {"aggregation", opt_json(p.aggregation)}};
}

InjectionPayload payload_from_json(const json& j) {
  InjectionPayload p;
  p.source_model = j.value("source_model", std::string{});
  p.column = opt_from(j, "column");
  p.row = opt_from(j, "row");
  p.aggregation = opt_from(j, "aggregation");
  return p;
}

// ---------------------------------------------------------------------------

TraceWriter::TraceWriter(const fs::path& path, bool truncate) : path_(path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  out_.open(path, std::ios::binary | (truncate ? std::ios::trunc : std::ios::app));
  if (!out_) throw ChainError("cannot open trace file '" + path.string() + "'");
}

void TraceWriter::append(const ChainTrace& trace) {
  const std::string line = to_json(trace).dump() + '\n';
  std::lock_guard lock(mu_);
  out_ << line;
  out_.flush();
  if (!out_) throw ChainError("write failed for '" + path_.string() + "'");
}

std::vector<ChainTrace> read_traces(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ChainError("cannot read trace file '" + path.string() + "'");
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!text::trim(line).empty()) lines.push_back(std::move(line));
  }
  std::vector<ChainTrace> traces;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    json j = json::parse(lines[i], nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded()) {
      if (i + 1 == lines.size()) break;
      throw ChainError("'" + path.string() + "' line " + std::to_string(i + 1) +
                       " is not JSON");
    }
    traces.push_back(trace_from_json(j));
  }
  return traces;
}

}  // namespace tablelogic
