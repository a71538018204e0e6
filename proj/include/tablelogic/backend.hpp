#pragma once

#include <array>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <regex>
#include <semaphore>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace tablelogic {

struct Decoding {
  double temperature = 0.0;
  int max_output_tokens = 1024;

  bool operator==(const Decoding&) const = default;
};

/// A single-turn user message; no system preamble is ever added.
struct CompletionRequest {
  std::string model_id;
  std::string prompt;
  Decoding decoding;

  bool operator==(const CompletionRequest&) const = default;
};

struct CompletionResult {
  std::string text;
  std::chrono::milliseconds latency{0};
  bool cached = false;
  std::string backend_id;
};

struct CallOptions {
  /// false forces a fresh call (the cache is still not overwritten).
  bool use_cache = true;
  /// Retry number of a deliberate re-ask. Non-zero attempts are cached under
  /// their own key so a rerun replays them instead of calling again.
  int attempt = 0;
};

constexpr int kMaxOutputTokensCeiling = 32768;

/// Throws `BackendError` for an empty prompt or an out-of-range token budget.
void validate_request(const CompletionRequest& req,
                      int max_tokens_ceiling = kMaxOutputTokensCeiling);

/// Uniform completion interface. Implementations must be safe to call from
/// many threads at once.
class Backend {
 public:
  virtual ~Backend() = default;
  virtual CompletionResult complete(const CompletionRequest& req,
                                    const CallOptions& opts = {}) = 0;
  virtual std::string id() const = 0;
};

// ---------------------------------------------------------------------------
// Cache key

struct Digest {
  std::array<std::uint8_t, 32> bytes{};

  std::string hex() const;
  bool operator==(const Digest&) const = default;
  auto operator<=>(const Digest&) const = default;
};

/// SHA-256 over a canonical encoding of (model_id, prompt, decoding).
Digest cache_key(const CompletionRequest& req);

/// SHA-256 of arbitrary bytes; also used for config provenance digests.
Digest sha256(std::string_view data);

// ---------------------------------------------------------------------------
// Scripted backend

/// First matching rule wins. A rule with several conditions needs all of them.
struct ScriptRule {
  std::vector<std::string> contains;
  std::string regex;  // ECMAScript, searched anywhere in the prompt
  std::string response;
};

class ScriptedBackend final : public Backend {
 public:
  ScriptedBackend(std::string name, std::vector<ScriptRule> rules,
                  std::string default_response);

  /// {"rules": [{"contains": "..." | [...], "regex": "...", "response": "..."}],
  ///  "default": "..."}
  static std::unique_ptr<ScriptedBackend> from_json(std::string name,
                                                    const nlohmann::json& j);
  static std::unique_ptr<ScriptedBackend> from_file(
      std::string name, const std::filesystem::path& path);

  CompletionResult complete(const CompletionRequest& req,
                            const CallOptions& opts = {}) override;
  std::string id() const override { return "scripted:" + name_; }

  const std::string& respond(const std::string& prompt) const;

 private:
  struct CompiledRule {
    ScriptRule rule;
    std::optional<std::regex> re;
  };
  std::string name_;
  std::vector<CompiledRule> rules_;
  std::string default_response_;
};

// ---------------------------------------------------------------------------
// Decorators

/// Counts every call that reaches it; used to check call-count laws.
class CountingBackend final : public Backend {
 public:
  explicit CountingBackend(std::shared_ptr<Backend> inner)
      : inner_(std::move(inner)) {}

  CompletionResult complete(const CompletionRequest& req,
                            const CallOptions& opts = {}) override;
  std::string id() const override { return inner_->id(); }

  std::size_t calls() const { return calls_.load(); }
  void reset() { calls_ = 0; }

 private:
  std::shared_ptr<Backend> inner_;
  std::atomic<std::size_t> calls_{0};
};

struct CacheStats {
  std::size_t hits = 0;
  std::size_t misses = 0;
  std::size_t writes = 0;
};

/// On-disk response store, one JSON file per digest under
/// `<dir>/<first two hex chars>/<hex>.json`. Entries are write-once.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path dir);

  std::optional<std::string> get(const Digest& key);
  /// Returns false when the key already exists (the stored text wins).
  bool put(const Digest& key, const CompletionRequest& req,
           const std::string& text);

  CacheStats stats() const;
  /// Number of entries currently on disk.
  std::size_t size() const;
  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path path_for(const Digest& key) const;

  std::filesystem::path dir_;
  mutable std::mutex mu_;
  std::map<Digest, std::string> memo_;
  CacheStats stats_;
};

class CachingBackend final : public Backend {
 public:
  CachingBackend(std::shared_ptr<Backend> inner,
                 std::shared_ptr<ResponseCache> cache)
      : inner_(std::move(inner)), cache_(std::move(cache)) {}

  CompletionResult complete(const CompletionRequest& req,
                            const CallOptions& opts = {}) override;
  std::string id() const override { return inner_->id(); }

 private:
  std::shared_ptr<Backend> inner_;
  std::shared_ptr<ResponseCache> cache_;
};

// ---------------------------------------------------------------------------
// Remote backend plumbing

struct RetryPolicy {
  int max_attempts = 5;
  std::chrono::milliseconds initial_delay{500};
  double multiplier = 2.0;
  std::chrono::milliseconds max_delay{30000};

  /// Delay before attempt `attempt + 1` (attempt is 1-based).
  std::chrono::milliseconds delay_after(int attempt) const;
};

/// Spaces acquisitions so that at most `requests` start in any `interval`.
class RateLimiter {
 public:
  using Clock = std::chrono::steady_clock;

  RateLimiter(int requests, std::chrono::milliseconds interval);

  /// Blocks until a slot is free.
  void acquire();
  /// Reserves the next slot and returns when it opens, without sleeping.
  Clock::time_point reserve();

 private:
  std::chrono::nanoseconds spacing_;
  std::mutex mu_;
  Clock::time_point next_;
};

struct RemoteConfig {
  /// e.g. "https://api.together.xyz/v1"; "/chat/completions" is appended.
  std::string base_url = "https://api.openai.com/v1";
  std::string api_key_env = "OPENAI_API_KEY";
  RetryPolicy retry;
  int requests_per_interval = 60;
  std::chrono::milliseconds interval{60000};
  int max_in_flight = 8;
  std::chrono::seconds timeout{120};
};

/// OpenAI-style chat-completion client. Reads the key from the environment
/// at construction and throws `CredentialError` when it is unset.
class OpenAICompatibleBackend final : public Backend {
 public:
  using Sleeper = std::function<void(std::chrono::milliseconds)>;

  explicit OpenAICompatibleBackend(RemoteConfig config);
  OpenAICompatibleBackend(RemoteConfig config, std::string api_key,
                          Sleeper sleeper = {});

  CompletionResult complete(const CompletionRequest& req,
                            const CallOptions& opts = {}) override;
  std::string id() const override { return "openai:" + config_.base_url; }

  /// The HTTP body sent for `req`.
  static nlohmann::json request_body(const CompletionRequest& req);
  /// Extracts choices[0].message.content; throws `ProtocolError`.
  static std::string parse_response(const std::string& body);

 private:
  RemoteConfig config_;
  std::string api_key_;
  std::string scheme_host_port_;
  std::string endpoint_path_;
  Sleeper sleeper_;
  RateLimiter limiter_;
  std::counting_semaphore<1024> in_flight_;
};

// ---------------------------------------------------------------------------
// Construction from configuration

struct BackendConfig {
  std::string name;
  std::string kind;  // "scripted" | "openai"
  std::string model; // model id sent with requests
  std::filesystem::path rules;  // scripted
  RemoteConfig remote;          // openai
  Decoding decoding;
};

std::shared_ptr<Backend> make_backend(const BackendConfig& cfg);

}  // namespace tablelogic
