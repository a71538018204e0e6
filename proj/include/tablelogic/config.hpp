#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "tablelogic/backend.hpp"
#include "tablelogic/dataset.hpp"
#include "tablelogic/prompt.hpp"

namespace tablelogic {

struct DatasetEntry {
  std::string id;
  std::filesystem::path path;  // normalized jsonl
};

/// Everything a stage needs, after defaults and flag overrides are applied.
///
/// File layout (INI):
///
///   [datasets]    <id> = <normalized .jsonl path>
///   [backends]    <name>.kind = scripted|openai, <name>.model, <name>.rules,
///                 <name>.base_url, <name>.api_key_env,
///                 <name>.requests_per_minute, <name>.max_attempts,
///                 <name>.max_in_flight
///   [strategies]  run = vanilla, self_augmentation, table_logic, ...
///   [sampling]    per_dataset_count, seed
///   [run]         models, judge, bigger, smaller, augment_source, workers,
///                 cache_dir, use_cache, include_passages, temperature,
///                 max_output_tokens, template_dir, eval_method,
///                 bench_per_kind, bench_seed, bench_targets, bench_synthetic
///
/// Relative paths resolve against the config file's directory. API keys are
/// never read from the file, only from the environment variable it names.
struct RunConfig {
  std::filesystem::path base_dir;
  std::vector<DatasetEntry> datasets;
  std::map<std::string, BackendConfig> backends;
  std::vector<StrategyKind> strategies;
  SamplePlan sampling{10, 0};

  std::vector<std::string> models;
  std::string judge;
  std::vector<std::string> bigger;
  std::vector<std::string> smaller;
  std::string augment_source;

  int workers = 1;
  std::filesystem::path cache_dir;  // empty: <run dir>/cache
  bool use_cache = true;
  bool include_passages = false;
  Decoding decoding;
  std::filesystem::path template_dir;
  std::string eval_method = "judge";

  std::size_t bench_per_kind = 20;
  std::uint64_t bench_seed = 0;
  std::string bench_targets = "existing";
  std::size_t bench_synthetic = 0;  // >0: add this many generated tables
};

/// Throws `ConfigError` on malformed input or dangling references
/// (unknown backend names, unknown strategies).
RunConfig load_config(const std::filesystem::path& path);
RunConfig parse_config(const std::string& text, const std::filesystem::path& base_dir);

/// Canonical INI rendering; byte-stable for equal configs.
std::string resolved_config_text(const RunConfig& cfg);

/// Fails with `CredentialError` before any network traffic when a remote
/// backend that will be used has no key in the environment.
void check_credentials(const RunConfig& cfg, const std::vector<std::string>& backend_names);

}  // namespace tablelogic
