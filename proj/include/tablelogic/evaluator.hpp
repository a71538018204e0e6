#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "tablelogic/backend.hpp"
#include "tablelogic/prompt.hpp"

namespace tablelogic {

struct ChainTrace;

enum class Verdict { correct, incorrect, unevaluated };

std::string_view verdict_name(Verdict v);
/// Accepts correct/incorrect/unevaluated and the one-letter forms C/I/U.
Verdict parse_verdict(std::string_view s);

/// `oracle` marks structural sub-task scoring, which needs no model.
enum class ScoreMethod { judge, exact_match, oracle };

std::string_view method_name(ScoreMethod m);
ScoreMethod parse_method(std::string_view s);

struct EvalOutcome {
  std::string record_id;
  std::string dataset_id;
  std::string model;
  std::string strategy;
  std::string variant;
  std::string prediction;
  Verdict verdict = Verdict::unevaluated;
  ScoreMethod method = ScoreMethod::exact_match;
  std::optional<std::string> judge_raw;  // present iff method == judge

  bool operator==(const EvalOutcome&) const = default;
};

nlohmann::json to_json(const EvalOutcome& o);
EvalOutcome outcome_from_json(const nlohmann::json& j);
void write_outcomes(const std::filesystem::path& path,
                    const std::vector<EvalOutcome>& outcomes);
std::vector<EvalOutcome> read_outcomes(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Judge

enum class JudgeToken { yes, no, ambiguous };

/// Case-insensitive scan for standalone "yes"/"no" words. Both or neither
/// is ambiguous.
JudgeToken parse_judge_response(std::string_view raw);

struct JudgeOptions {
  const TemplateSet* templates = &TemplateSet::builtin();
  std::string model_id;
  Decoding decoding;
};

/// Multiple gold answers are joined with " | " in the judge prompt.
std::string render_judge_prompt(std::string_view question,
                                const std::vector<std::string>& gold,
                                std::string_view prediction,
                                const TemplateSet& templates = TemplateSet::builtin());

/// Yes -> correct, No -> incorrect. An ambiguous reply gets exactly one
/// uncached retry, then unevaluated. Backend failure -> unevaluated.
EvalOutcome judge(std::string_view question, const std::vector<std::string>& gold,
                  std::string_view prediction, Backend& backend,
                  const JudgeOptions& opts = {});

// ---------------------------------------------------------------------------
// Offline scoring

/// Trim, case-fold, collapse internal whitespace, strip terminal punctuation.
std::string normalize_answer(std::string_view s);

Verdict exact_match(const std::vector<std::string>& gold, std::string_view prediction);
Verdict exact_match(std::string_view gold, std::string_view prediction);

/// Scores a trace's final prediction, copying its identifying fields. Failed
/// traces are unevaluated without consulting the judge.
EvalOutcome evaluate_trace(const ChainTrace& trace, ScoreMethod method,
                           Backend* judge_backend, const JudgeOptions& opts = {});

/// Fraction of positions where the verdicts match, skipping positions where
/// either side is unevaluated. Throws `EvalError` for unequal lengths or an
/// empty comparable set.
double agreement(const std::vector<Verdict>& a, const std::vector<Verdict>& b);

// ---------------------------------------------------------------------------
// Aggregation

struct GroupKeys {
  bool dataset = true;
  bool model = true;
  bool strategy = true;
  bool variant = true;
};

struct AccuracyReport {
  std::string dataset_id;
  std::string model;
  std::string strategy;
  std::string variant;
  std::size_t n_total = 0;
  std::size_t n_correct = 0;
  std::size_t n_unevaluated = 0;

  std::size_t denominator() const { return n_total - n_unevaluated; }
  /// n_correct / (n_total - n_unevaluated); nullopt when that is zero.
  std::optional<double> accuracy() const;
  bool operator==(const AccuracyReport&) const = default;
};

/// One report per key group, sorted by (dataset, model, strategy, variant).
std::vector<AccuracyReport> aggregate(const std::vector<EvalOutcome>& outcomes,
                                      const GroupKeys& keys = {});

}  // namespace tablelogic
