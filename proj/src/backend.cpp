#include "tablelogic/backend.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "tablelogic/errors.hpp"
#include "tablelogic/text.hpp"

namespace tablelogic {

namespace fs = std::filesystem;
using nlohmann::json;

void validate_request(const CompletionRequest& req, int max_tokens_ceiling) {
  if (req.prompt.empty()) throw BackendError("completion request has an empty prompt");
  if (req.decoding.max_output_tokens <= 0 ||
      req.decoding.max_output_tokens > max_tokens_ceiling) {
    throw BackendError("max_output_tokens " +
                       std::to_string(req.decoding.max_output_tokens) +
                       " outside (0, " + std::to_string(max_tokens_ceiling) + "]");
  }
  if (!(req.decoding.temperature >= 0.0)) {
    throw BackendError("temperature must be >= 0");
  }
}

// ---------------------------------------------------------------------------

std::string Digest::hex() const {
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(64);
  for (auto b : bytes) {
    out += kHex[b >> 4];
    out += kHex[b & 0xF];
  }
  return out;
}

Digest sha256(std::string_view data) {
  Digest d;
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), d.bytes.data(), &len, EVP_sha256(),
                 nullptr) != 1 ||
      len != d.bytes.size()) {
    throw std::runtime_error("SHA-256 failed");
  }
  return d;
}

Digest cache_key(const CompletionRequest& req) {
  // JSON gives an unambiguous, length-safe encoding; doubles are printed in
  // shortest round-trip form so 0.0 and 0.7 never collide.
  json canon = {{"v", 1},
                {"model", req.model_id},
                {"prompt", req.prompt},
                {"temperature", req.decoding.temperature},
                {"max_output_tokens", req.decoding.max_output_tokens}};
  return sha256(canon.dump());
}

// ---------------------------------------------------------------------------

ScriptedBackend::ScriptedBackend(std::string name, std::vector<ScriptRule> rules,
                                 std::string default_response)
    : name_(std::move(name)), default_response_(std::move(default_response)) {
  for (auto& r : rules) {
    CompiledRule c{std::move(r), std::nullopt};
    if (!c.rule.regex.empty()) {
      try {
        c.re.emplace(c.rule.regex, std::regex::ECMAScript);
      } catch (const std::regex_error& e) {
        throw ConfigError("scripted backend '" + name_ + "': bad regex '" +
                          c.rule.regex + "': " + e.what());
      }
    }
    rules_.push_back(std::move(c));
  }
}

std::unique_ptr<ScriptedBackend> ScriptedBackend::from_json(std::string name,
                                                            const json& j) {
  std::vector<ScriptRule> rules;
  try {
    for (const auto& jr : j.value("rules", json::array())) {
      ScriptRule r;
      if (jr.contains("contains")) {
        const auto& c = jr["contains"];
        if (c.is_array()) {
          r.contains = c.get<std::vector<std::string>>();
        } else {
          r.contains.push_back(c.get<std::string>());
        }
      }
      r.regex = jr.value("regex", std::string{});
      r.response = jr.at("response").get<std::string>();
      if (r.contains.empty() && r.regex.empty()) {
        throw ConfigError("rule without 'contains' or 'regex'");
      }
      rules.push_back(std::move(r));
    }
  } catch (const json::exception& e) {
    throw ConfigError("scripted backend '" + name + "': " + e.what());
  }
  std::string def = j.value("default", std::string{});
  return std::make_unique<ScriptedBackend>(std::move(name), std::move(rules),
                                           std::move(def));
}

std::unique_ptr<ScriptedBackend> ScriptedBackend::from_file(std::string name,
                                                            const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read rules file '" + path.string() + "'");
  try {
    return from_json(std::move(name), json::parse(in));
  } catch (const json::parse_error& e) {
    throw ConfigError("rules file '" + path.string() + "': " + e.what());
  }
}

const std::string& ScriptedBackend::respond(const std::string& prompt) const {
  for (const auto& c : rules_) {
    bool ok = std::all_of(c.rule.contains.begin(), c.rule.contains.end(),
                          [&](const std::string& s) { return text::contains(prompt, s); });
    if (ok && c.re) ok = std::regex_search(prompt, *c.re);
    if (ok) return c.rule.response;
  }
  return default_response_;
}

CompletionResult ScriptedBackend::complete(const CompletionRequest& req,
                                           const CallOptions&) {
  validate_request(req);
  CompletionResult res;
  res.text = respond(req.prompt);
  res.backend_id = id();
  return res;
}

// ---------------------------------------------------------------------------

CompletionResult CountingBackend::complete(const CompletionRequest& req,
                                           const CallOptions& opts) {
  ++calls_;
  return inner_->complete(req, opts);
}

ResponseCache::ResponseCache(fs::path dir) : dir_(std::move(dir)) {
  fs::create_directories(dir_);
}

fs::path ResponseCache::path_for(const Digest& key) const {
  const std::string h = key.hex();
  return dir_ / h.substr(0, 2) / (h + ".json");
}

std::optional<std::string> ResponseCache::get(const Digest& key) {
  std::lock_guard lock(mu_);
  if (auto it = memo_.find(key); it != memo_.end()) {
    ++stats_.hits;
    return it->second;
  }
  std::ifstream in(path_for(key), std::ios::binary);
  if (in) {
    try {
      json j = json::parse(in);
      std::string text = j.at("text").get<std::string>();
      memo_.emplace(key, text);
      ++stats_.hits;
      return text;
    } catch (const json::exception&) {
      // A torn or foreign file is treated as a miss; put() will not replace it.
    }
  }
  ++stats_.misses;
  return std::nullopt;
}

bool ResponseCache::put(const Digest& key, const CompletionRequest& req,
                        const std::string& text) {
  std::lock_guard lock(mu_);
  const fs::path path = path_for(key);
  if (memo_.count(key) || fs::exists(path)) return false;
  fs::create_directories(path.parent_path());
  json j = {{"key", key.hex()}, {"model", req.model_id}, {"text", text}};
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write cache entry " + tmp.string());
    out << j.dump() << '\n';
  }
  fs::rename(tmp, path);
  memo_.emplace(key, text);
  ++stats_.writes;
  return true;
}

CacheStats ResponseCache::stats() const {
  std::lock_guard lock(mu_);
  return stats_;
}

std::size_t ResponseCache::size() const {
  std::lock_guard lock(mu_);
  std::size_t n = 0;
  for (const auto& e : fs::recursive_directory_iterator(dir_)) {
    if (e.is_regular_file() && e.path().extension() == ".json") ++n;
  }
  return n;
}

CompletionResult CachingBackend::complete(const CompletionRequest& req,
                                          const CallOptions& opts) {
  Digest key = cache_key(req);
  if (opts.attempt > 0) key = sha256(key.hex() + ":attempt:" + std::to_string(opts.attempt));
  if (opts.use_cache) {
    if (auto hit = cache_->get(key)) {
      CompletionResult res;
      res.text = std::move(*hit);
      res.cached = true;
      res.backend_id = inner_->id();
      return res;
    }
  }
  CompletionResult res = inner_->complete(req, opts);
  cache_->put(key, req, res.text);
  return res;
}

// ---------------------------------------------------------------------------

std::chrono::milliseconds RetryPolicy::delay_after(int attempt) const {
  double d = static_cast<double>(initial_delay.count());
  for (int i = 1; i < attempt; ++i) d *= multiplier;
  d = std::min(d, static_cast<double>(max_delay.count()));
  return std::chrono::milliseconds(static_cast<long long>(d));
}

RateLimiter::RateLimiter(int requests, std::chrono::milliseconds interval)
    : spacing_(requests > 0
                   ? std::chrono::duration_cast<std::chrono::nanoseconds>(interval) / requests
                   : std::chrono::nanoseconds(0)),
      next_(Clock::now()) {}

RateLimiter::Clock::time_point RateLimiter::reserve() {
  std::lock_guard lock(mu_);
  auto now = Clock::now();
  auto slot = std::max(now, next_);
  next_ = slot + spacing_;
  return slot;
}

void RateLimiter::acquire() { std::this_thread::sleep_until(reserve()); }

namespace {

struct ParsedUrl {
  std::string scheme_host_port;
  std::string path;
};

ParsedUrl split_url(const std::string& url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw ConfigError("base_url '" + url + "' lacks a scheme");
  }
  auto path_start = url.find('/', scheme_end + 3);
  ParsedUrl p;
  p.scheme_host_port = url.substr(0, path_start);
  p.path = path_start == std::string::npos ? "" : url.substr(path_start);
  while (!p.path.empty() && p.path.back() == '/') p.path.pop_back();
  return p;
}

bool transient_status(int status) { return status == 408 || status == 429 || status >= 500; }

}  // namespace

OpenAICompatibleBackend::OpenAICompatibleBackend(RemoteConfig config)
    : OpenAICompatibleBackend(config, [&] {
        const char* key = std::getenv(config.api_key_env.c_str());
        if (!key || !*key) {
          throw CredentialError("environment variable " + config.api_key_env +
                                " is not set");
        }
        return std::string(key);
      }()) {}

OpenAICompatibleBackend::OpenAICompatibleBackend(RemoteConfig config,
                                                 std::string api_key,
                                                 Sleeper sleeper)
    : config_(std::move(config)),
      api_key_(std::move(api_key)),
      sleeper_(sleeper ? std::move(sleeper)
                       : Sleeper([](std::chrono::milliseconds d) {
                           std::this_thread::sleep_for(d);
                         })),
      limiter_(config_.requests_per_interval, config_.interval),
      in_flight_(std::clamp(config_.max_in_flight, 1, 1024)) {
  auto url = split_url(config_.base_url);
  scheme_host_port_ = url.scheme_host_port;
  endpoint_path_ = (url.path.empty() ? std::string("/v1") : url.path) + "/chat/completions";
}

json OpenAICompatibleBackend::request_body(const CompletionRequest& req) {
  return json{{"model", req.model_id},
              {"messages", json::array({json{{"role", "user"}, {"content", req.prompt}}})},
              {"temperature", req.decoding.temperature},
              {"max_tokens", req.decoding.max_output_tokens}};
}

std::string OpenAICompatibleBackend::parse_response(const std::string& body) {
  json j;
  try {
    j = json::parse(body);
  } catch (const json::parse_error& e) {
    throw ProtocolError(std::string("response is not JSON: ") + e.what());
  }
  try {
    const auto& content = j.at("choices").at(0).at("message").at("content");
    if (!content.is_string()) throw ProtocolError("message content is not text");
    return content.get<std::string>();
  } catch (const json::exception&) {
    throw ProtocolError("response carries no choices[0].message.content");
  }
}

CompletionResult OpenAICompatibleBackend::complete(const CompletionRequest& req,
                                                   const CallOptions&) {
  validate_request(req);
  const std::string body = request_body(req).dump();
  const auto started = std::chrono::steady_clock::now();
  std::string last_error;

  for (int attempt = 1; attempt <= std::max(config_.retry.max_attempts, 1); ++attempt) {
    limiter_.acquire();
    httplib::Result result;
    {
      in_flight_.acquire();
      struct Release {
        std::counting_semaphore<1024>& s;
        ~Release() { s.release(); }
      } release{in_flight_};
      httplib::Client client(scheme_host_port_);
      client.set_connection_timeout(config_.timeout);
      client.set_read_timeout(config_.timeout);
      client.set_write_timeout(config_.timeout);
      httplib::Headers headers = {{"Authorization", "Bearer " + api_key_}};
      result = client.Post(endpoint_path_, headers, body, "application/json");
    }

    std::chrono::milliseconds retry_after{0};
    if (!result) {
      last_error = "network error: " + httplib::to_string(result.error());
    } else {
      const int status = result->status;
      if (status == 200) {
        CompletionResult res;
        res.text = parse_response(result->body);
        res.backend_id = id();
        res.latency = std::chrono::duration_cast<std::chrono::milliseconds>(
            std::chrono::steady_clock::now() - started);
        return res;
      }
      if (status == 401 || status == 403) {
        throw CredentialError("endpoint rejected credentials (HTTP " +
                              std::to_string(status) + ")");
      }
      if (!transient_status(status)) {
        throw ProtocolError("HTTP " + std::to_string(status) + ": " +
                            result->body.substr(0, 200));
      }
      last_error = "HTTP " + std::to_string(status);
      if (result->has_header("Retry-After")) {
        try {
          retry_after = std::chrono::seconds(std::stoll(result->get_header_value("Retry-After")));
        } catch (const std::exception&) {
        }
      }
    }
    if (attempt < config_.retry.max_attempts) {
      auto delay = std::max(config_.retry.delay_after(attempt), retry_after);
      sleeper_(std::min(delay, config_.retry.max_delay));
    }
  }
  throw TransportError("giving up after " + std::to_string(config_.retry.max_attempts) +
                       " attempts: " + last_error);
}

// ---------------------------------------------------------------------------

std::shared_ptr<Backend> make_backend(const BackendConfig& cfg) {
  if (cfg.kind == "scripted") {
    if (cfg.rules.empty()) {
      throw ConfigError("scripted backend '" + cfg.name + "' needs a rules file");
    }
    return ScriptedBackend::from_file(cfg.name, cfg.rules);
  }
  if (cfg.kind == "openai") return std::make_shared<OpenAICompatibleBackend>(cfg.remote);
  throw ConfigError("backend '" + cfg.name + "': unknown kind '" + cfg.kind + "'");
}

}  // namespace tablelogic
