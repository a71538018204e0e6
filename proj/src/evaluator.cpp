#include "tablelogic/evaluator.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <tuple>

#include "tablelogic/chain.hpp"
#include "tablelogic/errors.hpp"
#include "tablelogic/text.hpp"

namespace tablelogic {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view verdict_name(Verdict v) {
  switch (v) {
    case Verdict::correct: return "correct";
    case Verdict::incorrect: return "incorrect";
    case Verdict::unevaluated: return "unevaluated";
  }
  return "unevaluated";
}

Verdict parse_verdict(std::string_view s) {
  const std::string n = text::to_lower(text::trim(s));
  if (n == "correct" || n == "c" || n == "yes") return Verdict::correct;
  if (n == "incorrect" || n == "i" || n == "no") return Verdict::incorrect;
  if (n == "unevaluated" || n == "u") return Verdict::unevaluated;
  throw EvalError("unknown verdict '" + std::string(s) + "'");
}

std::string_view method_name(ScoreMethod m) {
  switch (m) {
    case ScoreMethod::judge: return "judge";
    case ScoreMethod::exact_match: return "exact_match";
    case ScoreMethod::oracle: return "oracle";
  }
  return "exact_match";
}

ScoreMethod parse_method(std::string_view s) {
  if (s == "judge") return ScoreMethod::judge;
  if (s == "exact_match" || s == "exact") return ScoreMethod::exact_match;
  if (s == "oracle") return ScoreMethod::oracle;
  throw EvalError("unknown scoring method '" + std::string(s) + "'");
}

json to_json(const EvalOutcome& o) {
  json j = {{"record_id", o.record_id},   {"dataset_id", o.dataset_id},
            {"model", o.model},           {"strategy", o.strategy},
            {"variant", o.variant},       {"prediction", o.prediction},
            {"verdict", verdict_name(o.verdict)}, {"method", method_name(o.method)}};
  if (o.judge_raw) j["judge_raw"] = *o.judge_raw;
  return j;
}

EvalOutcome outcome_from_json(const json& j) {
  try {
    EvalOutcome o;
    o.record_id = j.at("record_id").get<std::string>();
    o.dataset_id = j.value("dataset_id", std::string{});
    o.model = j.value("model", std::string{});
    o.strategy = j.value("strategy", std::string{});
    o.variant = j.value("variant", std::string{});
    o.prediction = j.value("prediction", std::string{});
    o.verdict = parse_verdict(j.at("verdict").get<std::string>());
    o.method = parse_method(j.value("method", std::string("exact_match")));
    if (j.contains("judge_raw")) o.judge_raw = j["judge_raw"].get<std::string>();
    return o;
  } catch (const json::exception& e) {
    throw EvalError(std::string("malformed outcome: ") + e.what());
  }
}

void write_outcomes(const fs::path& path, const std::vector<EvalOutcome>& outcomes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw EvalError("cannot write '" + path.string() + "'");
  for (const auto& o : outcomes) out << to_json(o).dump() << '\n';
  if (!out) throw EvalError("write failed for '" + path.string() + "'");
}

std::vector<EvalOutcome> read_outcomes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw EvalError("cannot read '" + path.string() + "'");
  std::vector<EvalOutcome> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (text::trim(line).empty()) continue;
    try {
      out.push_back(outcome_from_json(json::parse(line)));
    } catch (const std::exception& e) {
      throw EvalError("'" + path.string() + "' line " + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

JudgeToken parse_judge_response(std::string_view raw) {
  bool yes = false, no = false;
  for (const auto& tok : text::word_tokens(raw)) {
    yes |= tok == "yes";
    no |= tok == "no";
  }
  if (yes == no) return JudgeToken::ambiguous;
  return yes ? JudgeToken::yes : JudgeToken::no;
}

std::string render_judge_prompt(std::string_view question,
                                const std::vector<std::string>& gold,
                                std::string_view prediction,
                                const TemplateSet& templates) {
  std::string joined;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (i) joined += " | ";
    joined += gold[i];
  }
  PromptContext ctx;
  ctx.question = std::string(question);
  ctx.gold = joined;
  ctx.prediction = std::string(prediction);
  return templates.render(template_ids::judge, ctx);
}

EvalOutcome judge(std::string_view question, const std::vector<std::string>& gold,
                  std::string_view prediction, Backend& backend, const JudgeOptions& opts) {
  EvalOutcome out;
  out.prediction = std::string(prediction);
  out.method = ScoreMethod::judge;
  out.judge_raw = std::string{};
  CompletionRequest req{opts.model_id,
                        render_judge_prompt(question, gold, prediction, *opts.templates),
                        opts.decoding};
  for (int attempt = 0; attempt < 2; ++attempt) {
    try {
      CallOptions call;
      call.attempt = attempt;
      CompletionResult res = backend.complete(req, call);
      out.judge_raw = res.text;
    } catch (const BackendError& e) {
      out.judge_raw = std::string("backend error: ") + e.what();
      out.verdict = Verdict::unevaluated;
      return out;
    }
    switch (parse_judge_response(*out.judge_raw)) {
      case JudgeToken::yes: out.verdict = Verdict::correct; return out;
      case JudgeToken::no: out.verdict = Verdict::incorrect; return out;
      case JudgeToken::ambiguous: break;
    }
  }
  out.verdict = Verdict::unevaluated;
  return out;
}

// ---------------------------------------------------------------------------

std::string normalize_answer(std::string_view s) {
  std::string n = text::to_lower(text::collapse_whitespace(s));
  while (!n.empty() && std::string_view(".,!?;:").find(n.back()) != std::string_view::npos) {
    n.pop_back();
  }
  return std::string(text::trim(n));
}

Verdict exact_match(std::string_view gold, std::string_view prediction) {
  return normalize_answer(gold) == normalize_answer(prediction) ? Verdict::correct
                                                                : Verdict::incorrect;
}

Verdict exact_match(const std::vector<std::string>& gold, std::string_view prediction) {
  const std::string p = normalize_answer(prediction);
  for (const auto& g : gold) {
    if (normalize_answer(g) == p) return Verdict::correct;
  }
  return Verdict::incorrect;
}

EvalOutcome evaluate_trace(const ChainTrace& trace, ScoreMethod method,
                           Backend* judge_backend, const JudgeOptions& opts) {
  EvalOutcome o;
  if (!trace.ok()) {
    o.prediction = trace.final_prediction;
    o.verdict = Verdict::unevaluated;
    o.method = method;
    if (method == ScoreMethod::judge) o.judge_raw = std::string{};
  } else if (method == ScoreMethod::judge) {
    if (!judge_backend) throw EvalError("judge scoring needs a judge backend");
    o = judge(trace.question, trace.gold_answers, trace.final_prediction, *judge_backend, opts);
  } else {
    o.prediction = trace.final_prediction;
    o.verdict = exact_match(trace.gold_answers, trace.final_prediction);
    o.method = ScoreMethod::exact_match;
  }
  o.record_id = trace.record_id;
  o.dataset_id = trace.dataset_id;
  o.model = trace.model;
  o.strategy = std::string(strategy_name(trace.strategy));
  o.variant = trace.variant;
  return o;
}

double agreement(const std::vector<Verdict>& a, const std::vector<Verdict>& b) {
  if (a.size() != b.size()) {
    throw EvalError("agreement needs equal-length verdict lists (" +
                    std::to_string(a.size()) + " vs " + std::to_string(b.size()) + ")");
  }
  std::size_t comparable = 0, same = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] == Verdict::unevaluated || b[i] == Verdict::unevaluated) continue;
    ++comparable;
    same += a[i] == b[i];
  }
  if (comparable == 0) throw EvalError("agreement undefined: no comparable verdict pairs");
  return static_cast<double>(same) / static_cast<double>(comparable);
}

// ---------------------------------------------------------------------------

std::optional<double> AccuracyReport::accuracy() const {
  if (denominator() == 0) return std::nullopt;
  return static_cast<double>(n_correct) / static_cast<double>(denominator());
}

std::vector<AccuracyReport> aggregate(const std::vector<EvalOutcome>& outcomes,
                                      const GroupKeys& keys) {
  using Key = std::tuple<std::string, std::string, std::string, std::string>;
  std::map<Key, AccuracyReport> groups;
  for (const auto& o : outcomes) {
    Key k{keys.dataset ? o.dataset_id : "", keys.model ? o.model : "",
          keys.strategy ? o.strategy : "", keys.variant ? o.variant : ""};
    auto [it, inserted] = groups.try_emplace(k);
    AccuracyReport& r = it->second;
    if (inserted) {
      std::tie(r.dataset_id, r.model, r.strategy, r.variant) = k;
    }
    ++r.n_total;
    if (o.verdict == Verdict::correct) ++r.n_correct;
    if (o.verdict == Verdict::unevaluated) ++r.n_unevaluated;
  }
  std::vector<AccuracyReport> out;
  out.reserve(groups.size());
  for (auto& [_, r] : groups) out.push_back(std::move(r));
  return out;
}

}  // namespace tablelogic
