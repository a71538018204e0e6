#include <gtest/gtest.h>

#include <atomic>
#include <cstdlib>
#include <set>
#include <thread>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>
#include <nlohmann/json.hpp>

#include "tablelogic/backend.hpp"
#include "tablelogic/errors.hpp"
#include "test_util.hpp"

using namespace tablelogic;
using nlohmann::json;
using testutil::TempDir;

namespace {

CompletionRequest req(std::string prompt, std::string model = "m", double temp = 0.0,
                      int max_tokens = 1024) {
  return {std::move(model), std::move(prompt), {temp, max_tokens}};
}

// Local stand-in for a chat-completions endpoint.
class MockServer {
 public:
  using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

  explicit MockServer(Handler h) : handler_(std::move(h)) {
    server_.Post("/v1/chat/completions", [this](const httplib::Request& q, httplib::Response& r) {
      ++hits_;
      handler_(q, r);
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~MockServer() {
    server_.stop();
    thread_.join();
  }

  std::string base_url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1"; }
  int hits() const { return hits_.load(); }

 private:
  Handler handler_;
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
  std::atomic<int> hits_{0};
};

std::string ok_body(const std::string& text) {
  return json{{"choices", json::array({{{"message", {{"role", "assistant"}, {"content", text}}}}})}}
      .dump();
}

RemoteConfig remote(const std::string& base_url) {
  RemoteConfig c;
  c.base_url = base_url;
  c.requests_per_interval = 1000;
  c.interval = std::chrono::milliseconds(1000);
  c.timeout = std::chrono::seconds(5);
  return c;
}

}  // namespace

TEST(Request, Validation) {
  EXPECT_NO_THROW(validate_request(req("hi")));
  EXPECT_THROW(validate_request(req("")), BackendError);
  EXPECT_THROW(validate_request(req("hi", "m", 0.0, 0)), BackendError);
  EXPECT_THROW(validate_request(req("hi", "m", 0.0, kMaxOutputTokensCeiling + 1)), BackendError);
}

TEST(CacheKey, SensitiveToEveryField) {
  const Digest base = cache_key(req("p"));
  EXPECT_EQ(base, cache_key(req("p")));
  EXPECT_NE(base, cache_key(req("p ")));
  EXPECT_NE(base, cache_key(req("p", "m2")));
  EXPECT_NE(base, cache_key(req("p", "m", 0.5)));
  EXPECT_NE(base, cache_key(req("p", "m", 0.0, 512)));
  EXPECT_EQ(base.hex().size(), 64u);
}

TEST(CacheKey, NoCollisionsAcross10kRequests) {
  std::set<Digest> seen;
  for (int i = 0; i < 10000; ++i) {
    auto r = req("prompt " + std::to_string(i / 4), "model" + std::to_string(i % 2),
                 (i % 4) < 2 ? 0.0 : 0.7);
    seen.insert(cache_key(r));
  }
  EXPECT_EQ(seen.size(), 10000u);
}

TEST(CacheKey, FieldBoundariesDoNotAlias) {
  EXPECT_NE(cache_key(req("bc", "a")), cache_key(req("c", "ab")));
}

TEST(Sha256, KnownVector) {
  EXPECT_EQ(sha256("abc").hex(),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Scripted, FirstMatchWinsAndAllConditionsNeeded) {
  ScriptedBackend b("s",
                    {{{"alpha", "beta"}, "", "both"},
                     {{"alpha"}, "", "alpha only"},
                     {{}, "n[0-9]+", "number"}},
                    "fallback");
  EXPECT_EQ(b.complete(req("alpha and beta")).text, "both");
  EXPECT_EQ(b.complete(req("alpha")).text, "alpha only");
  EXPECT_EQ(b.complete(req("see n42")).text, "number");
  EXPECT_EQ(b.complete(req("nothing")).text, "fallback");
  EXPECT_EQ(b.id(), "scripted:s");
}

TEST(Scripted, FromJson) {
  auto b = ScriptedBackend::from_json(
      "j", json::parse(R"({"rules": [{"contains": "x", "response": "X"},
                                      {"regex": "^y", "response": "Y"}], "default": "D"})"));
  EXPECT_EQ(b->respond("a x b"), "X");
  EXPECT_EQ(b->respond("yes"), "Y");
  EXPECT_EQ(b->respond("no"), "D");
  EXPECT_THROW(ScriptedBackend::from_json("bad", json::parse(R"({"rules": [{"regex": "("}]})")),
               ConfigError);
}

TEST(Cache, WriteOncePersistentAndShared) {
  TempDir dir("cache");
  const auto r = req("hello");
  {
    ResponseCache c(dir.path());
    EXPECT_FALSE(c.get(cache_key(r)));
    EXPECT_TRUE(c.put(cache_key(r), r, "first"));
    EXPECT_FALSE(c.put(cache_key(r), r, "second"));
    EXPECT_EQ(c.get(cache_key(r)), "first");
  }
  ResponseCache reopened(dir.path());
  EXPECT_EQ(reopened.get(cache_key(r)), "first");
  EXPECT_EQ(reopened.size(), 1u);
}

TEST(Cache, CachingBackendAvoidsRepeatCalls) {
  TempDir dir("cachingbackend");
  auto scripted = std::make_shared<ScriptedBackend>("s", std::vector<ScriptRule>{}, "answer");
  auto counter = std::make_shared<CountingBackend>(scripted);
  CachingBackend cached(counter, std::make_shared<ResponseCache>(dir.path()));
  EXPECT_FALSE(cached.complete(req("q")).cached);
  EXPECT_TRUE(cached.complete(req("q")).cached);
  EXPECT_EQ(counter->calls(), 1u);

  CallOptions bypass;
  bypass.use_cache = false;
  cached.complete(req("q"), bypass);
  EXPECT_EQ(counter->calls(), 2u);

  CallOptions retry;
  retry.attempt = 1;
  EXPECT_FALSE(cached.complete(req("q"), retry).cached);
  EXPECT_TRUE(cached.complete(req("q"), retry).cached);
  EXPECT_EQ(counter->calls(), 3u);
}

TEST(Cache, ConcurrentWritersLeaveOneEntry) {
  TempDir dir("cacheconc");
  auto cache = std::make_shared<ResponseCache>(dir.path());
  const auto r = req("shared");
  std::vector<std::thread> threads;
  for (int i = 0; i < 8; ++i) {
    threads.emplace_back([&, i] { cache->put(cache_key(r), r, "v" + std::to_string(i)); });
  }
  for (auto& t : threads) t.join();
  EXPECT_EQ(cache->size(), 1u);
  auto stored = ResponseCache(dir.path()).get(cache_key(r));
  ASSERT_TRUE(stored);
  EXPECT_EQ(*stored, *cache->get(cache_key(r)));
}

TEST(Retry, ExponentialWithCap) {
  RetryPolicy p;
  EXPECT_EQ(p.delay_after(1).count(), 500);
  EXPECT_EQ(p.delay_after(2).count(), 1000);
  EXPECT_EQ(p.delay_after(3).count(), 2000);
  EXPECT_EQ(p.delay_after(20).count(), 30000);
}

TEST(RateLimiter, SpacesReservations) {
  RateLimiter lim(10, std::chrono::milliseconds(1000));
  auto a = lim.reserve();
  auto b = lim.reserve();
  auto c = lim.reserve();
  EXPECT_GE(b - a, std::chrono::milliseconds(99));
  EXPECT_GE(c - b, std::chrono::milliseconds(99));
}

TEST(Remote, RequestBodyShape) {
  json body = OpenAICompatibleBackend::request_body(req("hello", "llama", 0.0, 256));
  EXPECT_EQ(body["model"], "llama");
  ASSERT_EQ(body["messages"].size(), 1u);
  EXPECT_EQ(body["messages"][0]["role"], "user");
  EXPECT_EQ(body["messages"][0]["content"], "hello");
  EXPECT_EQ(body["temperature"], 0.0);
  EXPECT_EQ(body["max_tokens"], 256);
}

TEST(Remote, ParseResponseErrors) {
  EXPECT_EQ(OpenAICompatibleBackend::parse_response(ok_body("x")), "x");
  EXPECT_THROW(OpenAICompatibleBackend::parse_response("not json"), ProtocolError);
  EXPECT_THROW(OpenAICompatibleBackend::parse_response("{\"choices\": []}"), ProtocolError);
}

TEST(Remote, SuccessSendsBearerAndSingleUserMessage) {
  std::string auth, content;
  MockServer server([&](const httplib::Request& q, httplib::Response& r) {
    auth = q.get_header_value("Authorization");
    content = json::parse(q.body)["messages"][0]["content"];
    r.set_content(ok_body("Oslo"), "application/json");
  });
  OpenAICompatibleBackend b(remote(server.base_url()), "sk-test", [](auto) {});
  EXPECT_EQ(b.complete(req("where?")).text, "Oslo");
  EXPECT_EQ(auth, "Bearer sk-test");
  EXPECT_EQ(content, "where?");
}

TEST(Remote, RetriesTransientThenSucceeds) {
  std::atomic<int> n{0};
  MockServer server([&](const httplib::Request&, httplib::Response& r) {
    int k = ++n;
    if (k == 1) {
      r.status = 429;
      r.set_header("Retry-After", "2");
    } else if (k == 2) {
      r.status = 503;
    } else {
      r.set_content(ok_body("fine"), "application/json");
    }
  });
  std::vector<std::chrono::milliseconds> sleeps;
  OpenAICompatibleBackend b(remote(server.base_url()), "k",
                            [&](std::chrono::milliseconds d) { sleeps.push_back(d); });
  EXPECT_EQ(b.complete(req("q")).text, "fine");
  EXPECT_EQ(server.hits(), 3);
  ASSERT_EQ(sleeps.size(), 2u);
  EXPECT_EQ(sleeps[0].count(), 2000);  // Retry-After beats the 500 ms base delay
  EXPECT_EQ(sleeps[1].count(), 1000);
}

TEST(Remote, GivesUpAfterMaxAttempts) {
  MockServer server([](const httplib::Request&, httplib::Response& r) { r.status = 500; });
  auto cfg = remote(server.base_url());
  cfg.retry.max_attempts = 3;
  OpenAICompatibleBackend b(cfg, "k", [](auto) {});
  EXPECT_THROW(b.complete(req("q")), TransportError);
  EXPECT_EQ(server.hits(), 3);
}

TEST(Remote, UnauthorizedIsCredentialErrorWithoutRetry) {
  MockServer server([](const httplib::Request&, httplib::Response& r) { r.status = 401; });
  OpenAICompatibleBackend b(remote(server.base_url()), "bad", [](auto) {});
  EXPECT_THROW(b.complete(req("q")), CredentialError);
  EXPECT_EQ(server.hits(), 1);
}

TEST(Remote, MalformedSuccessIsProtocolError) {
  MockServer server([](const httplib::Request&, httplib::Response& r) {
    r.set_content("{\"unexpected\": true}", "application/json");
  });
  OpenAICompatibleBackend b(remote(server.base_url()), "k", [](auto) {});
  EXPECT_THROW(b.complete(req("q")), ProtocolError);
}

TEST(Remote, ClientErrorIsProtocolError) {
  MockServer server([](const httplib::Request&, httplib::Response& r) { r.status = 400; });
  OpenAICompatibleBackend b(remote(server.base_url()), "k", [](auto) {});
  EXPECT_THROW(b.complete(req("q")), ProtocolError);
  EXPECT_EQ(server.hits(), 1);
}

TEST(Remote, UnreachableIsTransportError) {
  auto cfg = remote("http://127.0.0.1:1/v1");
  cfg.retry.max_attempts = 2;
  OpenAICompatibleBackend b(cfg, "k", [](auto) {});
  EXPECT_THROW(b.complete(req("q")), TransportError);
}

TEST(Remote, MissingKeyFailsAtConstruction) {
  RemoteConfig cfg;
  cfg.api_key_env = "TABLELOGIC_TEST_SURELY_UNSET_KEY";
  ::unsetenv(cfg.api_key_env.c_str());
  EXPECT_THROW(OpenAICompatibleBackend b(cfg), CredentialError);
}

TEST(Factory, BuildsConfiguredKinds) {
  BackendConfig bad;
  bad.name = "x";
  bad.kind = "carrier-pigeon";
  EXPECT_THROW(make_backend(bad), ConfigError);
  BackendConfig scripted;
  scripted.name = "s";
  scripted.kind = "scripted";
  scripted.rules = testutil::data("rules_judge.json");
  EXPECT_EQ(make_backend(scripted)->id(), "scripted:s");
}
