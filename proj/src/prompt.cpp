#include "tablelogic/prompt.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "builtin_templates.hpp"
#include "tablelogic/errors.hpp"

namespace tablelogic {

namespace fs = std::filesystem;

const std::set<std::string>& known_placeholders() {
  static const std::set<std::string> names = {
      "table", "format",    "question",  "column", "row",
      "aggregation", "structure", "knowledge", "gold",   "prediction"};
  return names;
}

const std::string* PromptContext::lookup(std::string_view name) const {
  auto* self = const_cast<PromptContext*>(this);
  const auto* s = self->slot(name);
  return s && s->has_value() ? &**s : nullptr;
}

std::optional<std::string>* PromptContext::slot(std::string_view name) {
  if (name == "table") return &table;
  if (name == "format") return &format;
  if (name == "question") return &question;
  if (name == "column") return &column;
  if (name == "row") return &row;
  if (name == "aggregation") return &aggregation;
  if (name == "structure") return &structure;
  if (name == "knowledge") return &knowledge;
  if (name == "gold") return &gold;
  if (name == "prediction") return &prediction;
  return nullptr;
}

namespace {

// Calls on_text for literal runs and on_slot for each {name}.
template <typename OnText, typename OnSlot>
void scan_template(const std::string& id, std::string_view text, OnText on_text,
                   OnSlot on_slot) {
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto open = text.find('{', pos);
    if (open == std::string_view::npos) {
      on_text(text.substr(pos));
      return;
    }
    auto close = text.find('}', open);
    if (close == std::string_view::npos) {
      throw TemplateError("template '" + id + "': unterminated '{' at offset " +
                          std::to_string(open));
    }
    on_text(text.substr(pos, open - pos));
    on_slot(text.substr(open + 1, close - open - 1));
    pos = close + 1;
  }
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw TemplateError("cannot read template '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

PromptTemplate compile_template(std::string id, std::string text) {
  // Files end with a newline that is not part of the prompt.
  if (!text.empty() && text.back() == '\n') text.pop_back();
  if (!text.empty() && text.back() == '\r') text.pop_back();
  PromptTemplate t{std::move(id), std::move(text), {}};
  scan_template(
      t.id, t.text, [](std::string_view) {},
      [&](std::string_view name) {
        if (!known_placeholders().count(std::string(name))) {
          throw TemplateError("template '" + t.id + "': unknown placeholder {" +
                              std::string(name) + "}");
        }
        t.placeholders.emplace(name);
      });
  return t;
}

const TemplateSet& TemplateSet::builtin() {
  static const TemplateSet set = [] {
    TemplateSet s;
    for (const auto& [id, text] : builtin_template_sources()) {
      s.add(compile_template(std::string(id), std::string(text)));
    }
    return s;
  }();
  return set;
}

TemplateSet TemplateSet::load_dir(const fs::path& dir) {
  if (!fs::is_directory(dir)) {
    throw TemplateError("template directory '" + dir.string() + "' not found");
  }
  TemplateSet s = builtin();
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".txt") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) s.add(compile_template(f.stem().string(), read_text(f)));
  return s;
}

void TemplateSet::add(PromptTemplate t) {
  auto id = t.id;
  templates_.insert_or_assign(std::move(id), std::move(t));
}

bool TemplateSet::has(std::string_view id) const { return templates_.find(id) != templates_.end(); }

const PromptTemplate& TemplateSet::get(std::string_view id) const {
  auto it = templates_.find(id);
  if (it == templates_.end()) {
    throw TemplateError("unknown template '" + std::string(id) + "'");
  }
  return it->second;
}

std::vector<std::string> TemplateSet::ids() const {
  std::vector<std::string> out;
  for (const auto& [id, _] : templates_) out.push_back(id);
  return out;
}

std::string TemplateSet::render(std::string_view id, const PromptContext& ctx) const {
  const PromptTemplate& t = get(id);
  std::string out;
  scan_template(
      t.id, t.text, [&](std::string_view lit) { out += lit; },
      [&](std::string_view name) {
        const std::string* value = ctx.lookup(name);
        if (!value) {
          throw TemplateError("template '" + t.id + "': placeholder {" +
                              std::string(name) + "} is not populated");
        }
        out += *value;
      });
  return out;
}

const std::string& TemplateSet::reading_instruction() const {
  return get(template_ids::reading_instruction).text;
}

std::string render(std::string_view template_id, const PromptContext& ctx) {
  return TemplateSet::builtin().render(template_id, ctx);
}

const std::string& reading_instruction() { return TemplateSet::builtin().reading_instruction(); }

// ---------------------------------------------------------------------------

std::string_view strategy_name(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::vanilla: return "vanilla";
    case StrategyKind::self_augmentation: return "self_augmentation";
    case StrategyKind::table_logic: return "table_logic";
    case StrategyKind::vanilla_with_structure: return "vanilla_with_structure";
    case StrategyKind::vanilla_with_column_row: return "vanilla_with_column_row";
    case StrategyKind::vanilla_with_aggregation: return "vanilla_with_aggregation";
  }
  return "unknown";
}

const std::vector<StrategyKind>& all_strategies() {
  static const std::vector<StrategyKind> kinds = {
      StrategyKind::vanilla,
      StrategyKind::self_augmentation,
      StrategyKind::table_logic,
      StrategyKind::vanilla_with_structure,
      StrategyKind::vanilla_with_column_row,
      StrategyKind::vanilla_with_aggregation};
  return kinds;
}

StrategyKind parse_strategy(std::string_view name) {
  for (auto k : all_strategies()) {
    if (strategy_name(k) == name) return k;
  }
  if (name == "van") return StrategyKind::vanilla;
  if (name == "sa") return StrategyKind::self_augmentation;
  if (name == "t-logic" || name == "tlogic") return StrategyKind::table_logic;
  throw TemplateError("unknown strategy '" + std::string(name) + "'");
}

StrategySpec strategy_spec(StrategyKind kind) {
  namespace id = template_ids;
  auto step = [](std::string_view tid, std::set<std::string> supplied, Slot out) {
    return StepSpec{std::string(tid), std::move(supplied), out};
  };
  StrategySpec s{kind, {}, {}};
  switch (kind) {
    case StrategyKind::vanilla:
      s.steps = {step(id::vanilla, {"table", "question"}, Slot::answer)};
      break;
    case StrategyKind::self_augmentation:
      s.steps = {step(id::sa_knowledge, {"table", "question"}, Slot::knowledge),
                 step(id::sa_answer, {"table", "question", "knowledge"}, Slot::answer)};
      break;
    case StrategyKind::table_logic:
      s.templates.emplace_back(id::reading_instruction);
      s.steps = {
          step(id::tl_columns, {"table", "format", "question"}, Slot::column),
          step(id::tl_rows, {"table", "format", "column", "question"}, Slot::row),
          step(id::tl_aggregation, {"table", "format", "column", "row", "question"},
               Slot::aggregation),
          step(id::tl_answer,
               {"table", "format", "question", "column", "row", "aggregation"},
               Slot::answer)};
      break;
    case StrategyKind::vanilla_with_structure:
      s.steps = {step(id::vanilla_with_structure, {"table", "structure", "question"},
                      Slot::answer)};
      break;
    case StrategyKind::vanilla_with_column_row:
      s.steps = {step(id::vanilla_with_column_row, {"table", "column", "row", "question"},
                      Slot::answer)};
      break;
    case StrategyKind::vanilla_with_aggregation:
      s.steps = {step(id::vanilla_with_aggregation, {"table", "aggregation", "question"},
                      Slot::answer)};
      break;
  }
  for (const auto& st : s.steps) s.templates.push_back(st.template_id);
  return s;
}

void check_strategy(const TemplateSet& templates, const StrategySpec& spec) {
  for (const auto& tid : spec.templates) templates.get(tid);
  for (const auto& st : spec.steps) {
    const auto& refs = templates.get(st.template_id).placeholders;
    if (refs == st.supplied) continue;
    std::string detail;
    for (const auto& r : refs) {
      if (!st.supplied.count(r)) detail += " references unsupplied {" + r + "};";
    }
    for (const auto& s : st.supplied) {
      if (!refs.count(s)) detail += " ignores supplied {" + s + "};";
    }
    throw TemplateError("strategy " + std::string(strategy_name(spec.kind)) +
                        ", template '" + st.template_id + "':" + detail);
  }
}

}  // namespace tablelogic
