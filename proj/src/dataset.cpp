#include "tablelogic/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "tablelogic/errors.hpp"
#include "tablelogic/text.hpp"

namespace tablelogic {

using nlohmann::json;
namespace fs = std::filesystem;

json table_to_json(const Table& table) {
  return json{{"name", table.name}, {"header", table.header},
              {"rows", table.rows}};
}

Table table_from_json(const json& j) {
  if (!j.is_object()) throw DatasetError("table must be an object");
  Table t;
  t.name = j.value("name", std::string{});
  if (!j.contains("header") || !j["header"].is_array()) {
    throw DatasetError("table.header missing");
  }
  t.header = j["header"].get<std::vector<std::string>>();
  if (j.contains("rows")) {
    t.rows = j["rows"].get<std::vector<std::vector<std::string>>>();
  }
  try {
    validate(t);
  } catch (const TableError& e) {
    throw DatasetError(e.what());
  }
  return t;
}

json to_json(const QARecord& r) {
  json j{{"record_id", r.record_id},
         {"dataset_id", r.dataset_id},
         {"split", r.split},
         {"question", r.question},
         {"answers", r.gold_answers},
         {"table", table_to_json(r.table)}};
  if (!r.passages.empty()) j["passages"] = r.passages;
  return j;
}

QARecord record_from_json(const json& j) {
  if (!j.is_object()) throw DatasetError("record must be a JSON object");
  QARecord r;
  auto text_field = [&](const char* key, bool required) -> std::string {
    if (!j.contains(key)) {
      if (required) throw DatasetError(std::string("missing field '") + key + "'");
      return {};
    }
    if (!j[key].is_string()) {
      throw DatasetError(std::string("field '") + key + "' must be a string");
    }
    return j[key].get<std::string>();
  };
  r.record_id = text_field("record_id", true);
  r.dataset_id = text_field("dataset_id", true);
  r.question = text_field("question", true);
  r.split = text_field("split", false);
  if (j.contains("answers")) {
    if (!j["answers"].is_array()) throw DatasetError("'answers' must be a list");
    for (const auto& a : j["answers"]) {
      if (!a.is_string()) throw DatasetError("'answers' entries must be strings");
      r.gold_answers.push_back(a.get<std::string>());
    }
  } else if (j.contains("answer") && j["answer"].is_string()) {
    r.gold_answers.push_back(j["answer"].get<std::string>());
  }
  if (r.gold_answers.empty()) throw DatasetError("missing gold answer");
  if (!j.contains("table")) throw DatasetError("missing field 'table'");
  r.table = table_from_json(j["table"]);
  if (j.contains("passages")) {
    r.passages = j["passages"].get<std::vector<std::string>>();
  }
  if (text::trim(r.question).empty()) throw DatasetError("empty question");
  return r;
}

DatasetSchema parse_schema(std::string_view name) {
  const std::string n = text::to_lower(name);
  if (n == "normalized" || n == "jsonl") return DatasetSchema::normalized;
  if (n == "wikitq") return DatasetSchema::wikitq;
  if (n == "hybridqa") return DatasetSchema::hybridqa;
  if (n == "tatqa" || n == "tat-qa") return DatasetSchema::tatqa;
  throw DatasetError("unknown dataset schema '" + std::string(name) + "'");
}

std::string_view schema_name(DatasetSchema schema) {
  switch (schema) {
    case DatasetSchema::normalized: return "normalized";
    case DatasetSchema::wikitq: return "wikitq";
    case DatasetSchema::hybridqa: return "hybridqa";
    case DatasetSchema::tatqa: return "tatqa";
  }
  return "unknown";
}

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DatasetError("cannot read '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json read_json_file(const fs::path& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw DatasetError("'" + path.string() + "': " + e.what());
  }
}

// Records that fail table validation after header repair become errors.
void push_checked(LoadResult& out, std::size_t index, QARecord rec) {
  try {
    for (auto& w : validate(rec.table)) out.warnings.push_back(std::move(w));
    if (rec.gold_answers.empty()) throw DatasetError("missing gold answer");
    out.records.push_back(std::move(rec));
  } catch (const std::exception& e) {
    out.errors.push_back({index, e.what()});
  }
}

// Empty header labels are legal in the wild (TAT-QA's leading corner cell)
// but not in Table; give them positional names.
void repair_header(std::vector<std::string>& header) {
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (text::trim(header[c]).empty()) header[c] = "column_" + std::to_string(c + 1);
  }
}

LoadResult load_jsonl(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DatasetError("cannot read '" + path.string() + "'");
  LoadResult out;
  std::set<std::string> ids;
  std::string line;
  std::size_t index = 0;
  while (std::getline(in, line)) {
    if (text::trim(line).empty()) continue;
    try {
      QARecord rec = record_from_json(json::parse(line));
      if (!ids.insert(rec.record_id).second) {
        throw DatasetError("duplicate record_id '" + rec.record_id + "'");
      }
      for (auto& w : validate(rec.table)) out.warnings.push_back(std::move(w));
      out.records.push_back(std::move(rec));
    } catch (const std::exception& e) {
      out.errors.push_back({index, e.what()});
    }
    ++index;
  }
  return out;
}

// WikiTQ .tsv escapes: \n newline, \p pipe, \\ backslash.
std::string unescape_wikitq(std::string_view s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '\\' && i + 1 < s.size()) {
      char e = s[++i];
      out += e == 'n' ? '\n' : e == 'p' ? '|' : e;
    } else {
      out += s[i];
    }
  }
  return out;
}

// Pipe-separated list with WikiTQ escapes; split before unescaping.
std::vector<std::string> split_wikitq_list(std::string_view s) {
  std::vector<std::string> items;
  std::string cur;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '\\' && i + 1 < s.size()) {
      cur += s[i];
      cur += s[++i];
    } else if (s[i] == '|') {
      items.push_back(unescape_wikitq(cur));
      cur.clear();
    } else {
      cur += s[i];
    }
  }
  items.push_back(unescape_wikitq(cur));
  return items;
}

// CSV with "" or \" quote escapes (WikiTQ's csv/ files use the latter).
std::vector<std::vector<std::string>> parse_csv(std::string_view src) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false, any = false;
  for (std::size_t i = 0; i < src.size(); ++i) {
    char ch = src[i];
    if (quoted) {
      if (ch == '\\' && i + 1 < src.size() && src[i + 1] == '"') {
        field += '"';
        ++i;
      } else if (ch == '"') {
        if (i + 1 < src.size() && src[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += ch;
      }
      continue;
    }
    if (ch == '"') {
      quoted = true;
      any = true;
    } else if (ch == ',') {
      row.push_back(std::move(field));
      field.clear();
      any = true;
    } else if (ch == '\n' || ch == '\r') {
      if (ch == '\r' && i + 1 < src.size() && src[i + 1] == '\n') ++i;
      if (any || !field.empty()) {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
      }
      row.clear();
      field.clear();
      any = false;
    } else {
      field += ch;
      any = true;
    }
  }
  if (any || !field.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

Table load_wikitq_table(const fs::path& root, const std::string& context) {
  fs::path csv_path = root / context;
  fs::path tsv_path = csv_path;
  tsv_path.replace_extension(".tsv");
  std::vector<std::vector<std::string>> cells;
  if (fs::exists(tsv_path)) {
    std::istringstream in(read_file(tsv_path));
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      std::vector<std::string> row;
      for (auto& f : text::split(line, '\t')) row.push_back(unescape_wikitq(f));
      cells.push_back(std::move(row));
    }
  } else {
    cells = parse_csv(read_file(csv_path));
  }
  if (cells.empty()) throw DatasetError("empty table file '" + context + "'");
  Table t;
  t.name = context;
  t.header = std::move(cells.front());
  repair_header(t.header);
  t.rows.assign(std::make_move_iterator(cells.begin() + 1),
                std::make_move_iterator(cells.end()));
  return t;
}

LoadResult load_wikitq(const fs::path& path, fs::path root) {
  if (root.empty()) root = fs::absolute(path).parent_path().parent_path();
  std::istringstream in(read_file(path));
  LoadResult out;
  std::map<std::string, Table> table_cache;
  std::string line;
  bool header_seen = false;
  std::size_t index = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!header_seen) {
      header_seen = true;
      if (line.rfind("id\t", 0) == 0) continue;
    }
    if (text::trim(line).empty()) continue;
    try {
      auto f = text::split(line, '\t');
      if (f.size() < 4) throw DatasetError("expected 4 tab-separated fields");
      QARecord rec;
      rec.record_id = f[0];
      rec.dataset_id = "wikitq";
      rec.question = unescape_wikitq(f[1]);
      rec.split = path.stem().string();
      for (auto& a : split_wikitq_list(f[3])) {
        if (!text::trim(a).empty()) rec.gold_answers.push_back(a);
      }
      auto it = table_cache.find(f[2]);
      if (it == table_cache.end()) {
        it = table_cache.emplace(f[2], load_wikitq_table(root, f[2])).first;
      }
      rec.table = it->second;
      push_checked(out, index, std::move(rec));
    } catch (const std::exception& e) {
      out.errors.push_back({index, e.what()});
    }
    ++index;
  }
  return out;
}

std::string json_scalar_text(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  if (v.is_number()) {
    std::ostringstream ss;
    ss << v.get<double>();
    return ss.str();
  }
  return v.dump();
}

LoadResult load_hybridqa(const fs::path& path, fs::path root) {
  if (root.empty()) root = fs::absolute(path).parent_path().parent_path();
  const fs::path tables_dir = root / "WikiTables-WithLinks" / "tables_tok";
  const fs::path passages_dir = root / "WikiTables-WithLinks" / "request_tok";
  json questions = read_json_file(path);
  if (!questions.is_array()) throw DatasetError("HybridQA file must hold a JSON array");
  LoadResult out;
  for (std::size_t i = 0; i < questions.size(); ++i) {
    try {
      const json& q = questions[i];
      QARecord rec;
      rec.record_id = q.at("question_id").get<std::string>();
      rec.dataset_id = "hybridqa";
      rec.question = q.at("question").get<std::string>();
      rec.split = path.stem().string();
      if (q.contains("answer-text")) rec.gold_answers.push_back(json_scalar_text(q["answer-text"]));
      const std::string table_id = q.at("table_id").get<std::string>();
      json tj = read_json_file(tables_dir / (table_id + ".json"));
      rec.table.name = tj.value("title", table_id);
      std::vector<std::string> links;
      for (const auto& h : tj.at("header")) {
        rec.table.header.push_back(h.is_array() ? h.at(0).get<std::string>()
                                                : h.get<std::string>());
      }
      repair_header(rec.table.header);
      for (const auto& row : tj.at("data")) {
        std::vector<std::string> cells;
        for (const auto& cell : row) {
          if (cell.is_array()) {
            cells.push_back(cell.at(0).get<std::string>());
            if (cell.size() > 1) {
              for (const auto& l : cell[1]) links.push_back(l.get<std::string>());
            }
          } else {
            cells.push_back(json_scalar_text(cell));
          }
        }
        rec.table.rows.push_back(std::move(cells));
      }
      fs::path pfile = passages_dir / (table_id + ".json");
      if (fs::exists(pfile)) {
        json pj = read_json_file(pfile);
        std::set<std::string> seen;
        for (const auto& l : links) {
          if (seen.insert(l).second && pj.contains(l)) {
            rec.passages.push_back(pj[l].get<std::string>());
          }
        }
      }
      push_checked(out, i, std::move(rec));
    } catch (const std::exception& e) {
      out.errors.push_back({i, e.what()});
    }
  }
  return out;
}

LoadResult load_tatqa(const fs::path& path) {
  json docs = read_json_file(path);
  if (!docs.is_array()) throw DatasetError("TAT-QA file must hold a JSON array");
  LoadResult out;
  std::size_t index = 0;
  for (const auto& doc : docs) {
    Table table;
    std::vector<std::string> passages;
    std::string table_error;
    try {
      const json& tj = doc.at("table");
      table.name = tj.value("uid", std::string{});
      const json& grid = tj.at("table");
      if (grid.empty()) throw DatasetError("empty table");
      for (const auto& cell : grid.at(0)) table.header.push_back(json_scalar_text(cell));
      repair_header(table.header);
      for (std::size_t r = 1; r < grid.size(); ++r) {
        std::vector<std::string> row;
        for (const auto& cell : grid[r]) row.push_back(json_scalar_text(cell));
        table.rows.push_back(std::move(row));
      }
      std::vector<std::pair<long long, std::string>> paras;
      if (doc.contains("paragraphs")) {
        for (const auto& p : doc["paragraphs"]) {
          paras.emplace_back(p.value("order", 0LL), p.at("text").get<std::string>());
        }
      }
      std::stable_sort(paras.begin(), paras.end(),
                       [](const auto& a, const auto& b) { return a.first < b.first; });
      for (auto& p : paras) passages.push_back(std::move(p.second));
    } catch (const std::exception& e) {
      table_error = e.what();
    }
    const json questions = doc.value("questions", json::array());
    for (const auto& q : questions) {
      try {
        if (!table_error.empty()) throw DatasetError(table_error);
        QARecord rec;
        rec.record_id = q.at("uid").get<std::string>();
        rec.dataset_id = "tatqa";
        rec.question = q.at("question").get<std::string>();
        rec.split = path.stem().string();
        rec.table = table;
        rec.passages = passages;
        const json& a = q.at("answer");
        if (a.is_array()) {
          for (const auto& v : a) rec.gold_answers.push_back(json_scalar_text(v));
        } else {
          rec.gold_answers.push_back(json_scalar_text(a));
        }
        std::string scale = q.value("scale", std::string{});
        if (!scale.empty() && rec.gold_answers.size() == 1) {
          rec.gold_answers.push_back(rec.gold_answers.front() + " " + scale);
        }
        push_checked(out, index, std::move(rec));
      } catch (const std::exception& e) {
        out.errors.push_back({index, e.what()});
      }
      ++index;
    }
  }
  return out;
}

}  // namespace

LoadResult load_normalized(const fs::path& path, DatasetSchema schema,
                           const fs::path& root) {
  switch (schema) {
    case DatasetSchema::normalized: return load_jsonl(path);
    case DatasetSchema::wikitq: return load_wikitq(path, root);
    case DatasetSchema::hybridqa: return load_hybridqa(path, root);
    case DatasetSchema::tatqa: return load_tatqa(path);
  }
  throw DatasetError("unsupported schema");
}

void write_normalized(const fs::path& path, const std::vector<QARecord>& records) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DatasetError("cannot write '" + path.string() + "'");
  for (const auto& r : records) out << to_json(r).dump() << '\n';
  if (!out) throw DatasetError("write failed for '" + path.string() + "'");
}

std::vector<std::size_t> sample_indices(std::size_t n, const SamplePlan& plan) {
  if (plan.per_dataset_count == 0) {
    throw DatasetError("sample plan needs a positive per_dataset_count");
  }
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (plan.per_dataset_count >= n) return idx;
  // Partial Fisher-Yates over mt19937_64, whose output sequence is fixed by
  // the standard; distributions are not, so draw by hand.
  std::mt19937_64 rng(plan.seed);
  for (std::size_t i = 0; i < plan.per_dataset_count; ++i) {
    std::size_t j = i + static_cast<std::size_t>(rng() % (n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(plan.per_dataset_count);
  std::sort(idx.begin(), idx.end());
  return idx;
}

std::vector<QARecord> sample(const std::vector<QARecord>& records,
                             const SamplePlan& plan) {
  std::vector<QARecord> out;
  for (auto i : sample_indices(records.size(), plan)) out.push_back(records[i]);
  return out;
}

}  // namespace tablelogic
