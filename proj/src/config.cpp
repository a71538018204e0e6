#include "tablelogic/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include "tablelogic/errors.hpp"
#include "tablelogic/text.hpp"

namespace tablelogic {

namespace fs = std::filesystem;
namespace pt = boost::property_tree;

namespace {

std::vector<std::string> list_value(const std::string& v) {
  std::vector<std::string> out;
  for (const auto& part : text::split(v, ',')) {
    auto t = text::trim(part);
    if (!t.empty()) out.emplace_back(t);
  }
  return out;
}

bool bool_value(const std::string& key, const std::string& v) {
  const std::string n = text::to_lower(text::trim(v));
  if (n == "true" || n == "yes" || n == "1" || n == "on") return true;
  if (n == "false" || n == "no" || n == "0" || n == "off") return false;
  throw ConfigError("'" + key + "' expects a boolean, got '" + v + "'");
}

template <typename T>
T number_value(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    T out{};
    if constexpr (std::is_floating_point_v<T>) {
      out = static_cast<T>(std::stod(v, &used));
    } else if constexpr (std::is_signed_v<T>) {
      out = static_cast<T>(std::stoll(v, &used));
    } else {
      if (text::trim(v).rfind('-', 0) == 0) throw std::invalid_argument("negative");
      out = static_cast<T>(std::stoull(v, &used));
    }
    if (text::trim(v.substr(used)).size()) throw std::invalid_argument("trailing");
    return out;
  } catch (const std::exception&) {
    throw ConfigError("'" + key + "' expects a number, got '" + v + "'");
  }
}

fs::path resolve(const fs::path& base, const std::string& v) {
  if (v.empty()) return {};
  fs::path p(v);
  return p.is_absolute() ? p : (base / p).lexically_normal();
}

void apply_backend_field(BackendConfig& b, const std::string& field, const std::string& v,
                         const fs::path& base) {
  const std::string key = "backends." + b.name + "." + field;
  if (field == "kind") b.kind = v;
  else if (field == "model") b.model = v;
  else if (field == "rules") b.rules = resolve(base, v);
  else if (field == "base_url") b.remote.base_url = v;
  else if (field == "api_key_env") b.remote.api_key_env = v;
  else if (field == "requests_per_minute") {
    b.remote.requests_per_interval = number_value<int>(key, v);
    b.remote.interval = std::chrono::minutes(1);
  } else if (field == "max_attempts") b.remote.retry.max_attempts = number_value<int>(key, v);
  else if (field == "max_in_flight") b.remote.max_in_flight = number_value<int>(key, v);
  else if (field == "timeout_seconds") b.remote.timeout = std::chrono::seconds(number_value<int>(key, v));
  else if (field == "api_key") {
    throw ConfigError("'" + key + "': API keys belong in the environment; set api_key_env");
  } else {
    throw ConfigError("unknown backend field '" + key + "'");
  }
}

}  // namespace

RunConfig parse_config(const std::string& text_in, const fs::path& base_dir) {
  pt::ptree tree;
  try {
    std::istringstream in(text_in);
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }

  static const std::set<std::string> kSections = {"datasets", "backends", "strategies",
                                                  "sampling", "run"};
  for (const auto& [section, _] : tree) {
    if (!kSections.count(section)) throw ConfigError("unknown config section [" + section + "]");
  }

  RunConfig cfg;
  cfg.base_dir = base_dir;

  if (auto ds = tree.get_child_optional("datasets")) {
    for (const auto& [id, v] : *ds) cfg.datasets.push_back({id, resolve(base_dir, v.data())});
  }

  if (auto bs = tree.get_child_optional("backends")) {
    for (const auto& [key, v] : *bs) {
      auto dot = key.find('.');
      if (dot == std::string::npos) {
        throw ConfigError("backend key '" + key + "' must look like <name>.<field>");
      }
      std::string name = key.substr(0, dot);
      auto& b = cfg.backends[name];
      b.name = name;
      apply_backend_field(b, key.substr(dot + 1), v.data(), base_dir);
    }
  }
  for (auto& [name, b] : cfg.backends) {
    if (b.kind != "scripted" && b.kind != "openai") {
      throw ConfigError("backend '" + name + "' needs kind = scripted or openai");
    }
    if (b.kind == "scripted" && b.rules.empty()) {
      throw ConfigError("scripted backend '" + name + "' needs a rules file");
    }
    if (b.model.empty()) b.model = name;
  }

  if (auto st = tree.get_child_optional("strategies")) {
    for (const auto& [key, v] : *st) {
      if (key != "run") throw ConfigError("unknown key 'strategies." + key + "'");
      try {
        for (const auto& s : list_value(v.data())) cfg.strategies.push_back(parse_strategy(s));
      } catch (const TemplateError& e) {
        throw ConfigError(e.what());
      }
    }
  }
  if (cfg.strategies.empty()) {
    cfg.strategies = {StrategyKind::vanilla, StrategyKind::self_augmentation,
                      StrategyKind::table_logic};
  }

  if (auto sm = tree.get_child_optional("sampling")) {
    for (const auto& [key, v] : *sm) {
      const std::string full = "sampling." + key;
      if (key == "per_dataset_count") cfg.sampling.per_dataset_count = number_value<std::size_t>(full, v.data());
      else if (key == "seed") cfg.sampling.seed = number_value<std::uint64_t>(full, v.data());
      else throw ConfigError("unknown key '" + full + "'");
    }
  }
  if (cfg.sampling.per_dataset_count == 0) {
    throw ConfigError("sampling.per_dataset_count must be positive");
  }

  if (auto run = tree.get_child_optional("run")) {
    for (const auto& [key, node] : *run) {
      const std::string v = node.data();
      const std::string full = "run." + key;
      if (key == "models") cfg.models = list_value(v);
      else if (key == "judge") cfg.judge = v;
      else if (key == "bigger") cfg.bigger = list_value(v);
      else if (key == "smaller") cfg.smaller = list_value(v);
      else if (key == "augment_source") cfg.augment_source = v;
      else if (key == "workers") cfg.workers = number_value<int>(full, v);
      else if (key == "cache_dir") cfg.cache_dir = resolve(base_dir, v);
      else if (key == "use_cache") cfg.use_cache = bool_value(full, v);
      else if (key == "include_passages") cfg.include_passages = bool_value(full, v);
      else if (key == "temperature") cfg.decoding.temperature = number_value<double>(full, v);
      else if (key == "max_output_tokens") cfg.decoding.max_output_tokens = number_value<int>(full, v);
      else if (key == "template_dir") cfg.template_dir = resolve(base_dir, v);
      else if (key == "eval_method") cfg.eval_method = v;
      else if (key == "bench_per_kind") cfg.bench_per_kind = number_value<std::size_t>(full, v);
      else if (key == "bench_seed") cfg.bench_seed = number_value<std::uint64_t>(full, v);
      else if (key == "bench_targets") cfg.bench_targets = v;
      else if (key == "bench_synthetic") cfg.bench_synthetic = number_value<std::size_t>(full, v);
      else throw ConfigError("unknown key '" + full + "'");
    }
  }

  if (cfg.workers < 1) throw ConfigError("run.workers must be >= 1");
  if (cfg.decoding.temperature < 0) throw ConfigError("run.temperature must be >= 0");
  if (cfg.decoding.max_output_tokens <= 0 ||
      cfg.decoding.max_output_tokens > kMaxOutputTokensCeiling) {
    throw ConfigError("run.max_output_tokens out of range");
  }
  if (cfg.eval_method != "judge" && cfg.eval_method != "exact_match") {
    throw ConfigError("run.eval_method must be judge or exact_match");
  }
  if (cfg.bench_targets != "existing" && cfg.bench_targets != "planted") {
    throw ConfigError("run.bench_targets must be existing or planted");
  }
  if (cfg.models.empty()) {
    for (const auto& [name, _] : cfg.backends) {
      if (name != cfg.judge) cfg.models.push_back(name);
    }
  }
  auto require_backend = [&](const std::string& name, const char* role) {
    if (!cfg.backends.count(name)) {
      throw ConfigError(std::string(role) + " '" + name + "' is not defined in [backends]");
    }
  };
  for (const auto& m : cfg.models) require_backend(m, "model");
  for (const auto& m : cfg.bigger) require_backend(m, "bigger-group model");
  for (const auto& m : cfg.smaller) require_backend(m, "smaller-group model");
  if (!cfg.judge.empty()) require_backend(cfg.judge, "judge");
  if (!cfg.augment_source.empty()) require_backend(cfg.augment_source, "augment_source");
  std::set<std::string> ids;
  for (const auto& d : cfg.datasets) {
    if (!ids.insert(d.id).second) throw ConfigError("dataset '" + d.id + "' listed twice");
  }
  return cfg;
}

RunConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), fs::absolute(path).parent_path());
}

std::string resolved_config_text(const RunConfig& cfg) {
  auto join = [](const std::vector<std::string>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + v[i];
    return out;
  };
  // Paths are written relative to base_dir so that the text does not depend
  // on where the project is checked out.
  auto rel = [&](const fs::path& p) {
    if (p.empty()) return std::string();
    return p.lexically_relative(cfg.base_dir).generic_string();
  };
  std::string out = "[datasets]\n";
  for (const auto& d : cfg.datasets) out += d.id + " = " + rel(d.path) + "\n";
  out += "\n[backends]\n";
  for (const auto& [name, b] : cfg.backends) {
    out += name + ".kind = " + b.kind + "\n";
    out += name + ".model = " + b.model + "\n";
    if (b.kind == "scripted") {
      out += name + ".rules = " + rel(b.rules) + "\n";
    } else {
      out += name + ".base_url = " + b.remote.base_url + "\n";
      out += name + ".api_key_env = " + b.remote.api_key_env + "\n";
      out += fmt::format("{}.requests_per_interval = {}\n", name, b.remote.requests_per_interval);
      out += fmt::format("{}.interval_ms = {}\n", name, b.remote.interval.count());
      out += fmt::format("{}.max_attempts = {}\n", name, b.remote.retry.max_attempts);
      out += fmt::format("{}.max_in_flight = {}\n", name, b.remote.max_in_flight);
    }
  }
  std::vector<std::string> strategies;
  for (auto s : cfg.strategies) strategies.emplace_back(strategy_name(s));
  out += "\n[strategies]\nrun = " + join(strategies) + "\n";
  out += fmt::format("\n[sampling]\nper_dataset_count = {}\nseed = {}\n",
                     cfg.sampling.per_dataset_count, cfg.sampling.seed);
  out += "\n[run]\n";
  out += "models = " + join(cfg.models) + "\n";
  out += "judge = " + cfg.judge + "\n";
  out += "bigger = " + join(cfg.bigger) + "\n";
  out += "smaller = " + join(cfg.smaller) + "\n";
  out += "augment_source = " + cfg.augment_source + "\n";
  out += fmt::format("workers = {}\n", cfg.workers);
  out += "cache_dir = " + rel(cfg.cache_dir) + "\n";
  out += fmt::format("use_cache = {}\n", cfg.use_cache);
  out += fmt::format("include_passages = {}\n", cfg.include_passages);
  out += fmt::format("temperature = {}\n", cfg.decoding.temperature);
  out += fmt::format("max_output_tokens = {}\n", cfg.decoding.max_output_tokens);
  out += "template_dir = " + rel(cfg.template_dir) + "\n";
  out += "eval_method = " + cfg.eval_method + "\n";
  out += fmt::format("bench_per_kind = {}\nbench_seed = {}\n", cfg.bench_per_kind, cfg.bench_seed);
  out += "bench_targets = " + cfg.bench_targets + "\n";
  out += fmt::format("bench_synthetic = {}\n", cfg.bench_synthetic);
  return out;
}

void check_credentials(const RunConfig& cfg, const std::vector<std::string>& names) {
  for (const auto& n : names) {
    auto it = cfg.backends.find(n);
    if (it == cfg.backends.end() || it->second.kind != "openai") continue;
    const char* key = std::getenv(it->second.remote.api_key_env.c_str());
    if (!key || !*key) {
      throw CredentialError("backend '" + n + "' needs environment variable " +
                            it->second.remote.api_key_env);
    }
  }
}

}  // namespace tablelogic
