#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace tablelogic {

/// Values for `{placeholder}` slots. Referenced-but-unset slots are a hard
/// error at render time; they are never rendered blank.
struct PromptContext {
  std::optional<std::string> table;
  std::optional<std::string> format;
  std::optional<std::string> question;
  std::optional<std::string> column;
  std::optional<std::string> row;
  std::optional<std::string> aggregation;
  std::optional<std::string> structure;
  std::optional<std::string> knowledge;
  std::optional<std::string> gold;
  std::optional<std::string> prediction;

  /// nullptr for an unknown name or an unset slot.
  const std::string* lookup(std::string_view name) const;
  std::optional<std::string>* slot(std::string_view name);
};

/// Every placeholder name a template may use.
const std::set<std::string>& known_placeholders();

struct PromptTemplate {
  std::string id;
  std::string text;
  std::set<std::string> placeholders;
};

/// Parses `{name}` placeholders out of `text`. Throws `TemplateError` for an
/// unknown name or an unterminated brace.
PromptTemplate compile_template(std::string id, std::string text);

namespace template_ids {
inline constexpr std::string_view reading_instruction = "reading_instruction";
inline constexpr std::string_view tl_columns = "tl_columns";
inline constexpr std::string_view tl_rows = "tl_rows";
inline constexpr std::string_view tl_aggregation = "tl_aggregation";
inline constexpr std::string_view tl_answer = "tl_answer";
inline constexpr std::string_view vanilla = "vanilla";
inline constexpr std::string_view vanilla_with_structure = "vanilla_with_structure";
inline constexpr std::string_view vanilla_with_column_row = "vanilla_with_column_row";
inline constexpr std::string_view vanilla_with_aggregation = "vanilla_with_aggregation";
inline constexpr std::string_view sa_knowledge = "sa_knowledge";
inline constexpr std::string_view sa_answer = "sa_answer";
inline constexpr std::string_view judge = "judge";
inline constexpr std::string_view subtask_probe = "subtask_probe";
}  // namespace template_ids

class TemplateSet {
 public:
  /// The templates compiled into the binary from the repository's
  /// `templates/` directory.
  static const TemplateSet& builtin();

  /// Builtins overridden by every `<id>.txt` found in `dir`.
  static TemplateSet load_dir(const std::filesystem::path& dir);

  void add(PromptTemplate t);
  bool has(std::string_view id) const;
  const PromptTemplate& get(std::string_view id) const;
  std::vector<std::string> ids() const;

  /// Splices ctx values into the template text in a single pass; spliced
  /// values are never re-scanned for braces.
  std::string render(std::string_view id, const PromptContext& ctx) const;

  /// The fixed step-1 text, injected as {format} into later steps.
  const std::string& reading_instruction() const;

 private:
  std::map<std::string, PromptTemplate, std::less<>> templates_;
};

std::string render(std::string_view template_id, const PromptContext& ctx);
const std::string& reading_instruction();

// ---------------------------------------------------------------------------
// Strategies

enum class StrategyKind {
  vanilla,
  self_augmentation,
  table_logic,
  vanilla_with_structure,
  vanilla_with_column_row,
  vanilla_with_aggregation,
};

std::string_view strategy_name(StrategyKind kind);
/// Throws `TemplateError` for an unknown name.
StrategyKind parse_strategy(std::string_view name);
const std::vector<StrategyKind>& all_strategies();

/// Which intermediate a step's response fills.
enum class Slot { none, column, row, aggregation, knowledge, answer };

/// One model call: the template it renders, the placeholders the executor
/// supplies to it, and where its response goes.
struct StepSpec {
  std::string template_id;
  std::set<std::string> supplied;
  Slot output = Slot::none;
};

struct StrategySpec {
  StrategyKind kind;
  /// All templates in order, including the constant reading instruction for
  /// table_logic (5 entries there, 2 for self_augmentation, 1 otherwise).
  std::vector<std::string> templates;
  /// The model-call steps only.
  std::vector<StepSpec> steps;

  std::size_t call_count() const { return steps.size(); }
};

StrategySpec strategy_spec(StrategyKind kind);

/// Confirms each step's template references exactly the placeholders the
/// executor supplies. Throws `TemplateError` naming the mismatch.
void check_strategy(const TemplateSet& templates, const StrategySpec& spec);

}  // namespace tablelogic
