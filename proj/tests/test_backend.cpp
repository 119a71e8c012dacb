#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <atomic>
#include <cstdlib>
#include <mutex>
#include <thread>

#include "cgttrl/backend.hpp"
#include "cgttrl/mock_backend.hpp"
#include "cgttrl/prompting.hpp"
#include "doctest.h"
#include "httplib.h"
#include "json.hpp"

using namespace cgttrl;
using nlohmann::json;

TEST_CASE("echo backend returns n canned completions with proxy stats") {
  EchoBackend backend("The answer is \\boxed{4}.");
  GenerationRequest req;
  req.prompt = "what is two plus two";
  req.n = 3;
  const auto result = backend.generate(req);
  REQUIRE(result.completions.size() == 3);
  for (const auto& c : result.completions) CHECK(c == "The answer is \\boxed{4}.");
  // Whitespace proxy: 4 tokens per completion, 5 for the prompt.
  CHECK(result.stats.generated_tokens == 3 * 4);
  CHECK(result.stats.total_tokens == 3 * 4 + 5);
  CHECK(result.stats.token_counts_estimated);

  UpdateBatch batch;
  batch.step_id = 11;
  CHECK(backend.apply_update(batch).step_id == 11);
  REQUIRE(backend.updates().size() == 1);
}

TEST_CASE("scripted backend varies by completion index and records traffic") {
  ScriptedBackend backend([](const GenerationRequest& req, int i) {
    return "prompt says " + std::to_string(req.prompt.size()) + ", sample " +
           std::to_string(i);
  });
  GenerationRequest req;
  req.prompt = "abc";
  req.n = 4;
  const auto result = backend.generate(req);
  REQUIRE(result.completions.size() == 4);
  CHECK(result.completions[0] == "prompt says 3, sample 0");
  CHECK(result.completions[3] == "prompt says 3, sample 3");

  UpdateBatch batch;
  batch.prompt = "abc";
  batch.step_id = 2;
  backend.apply_update(batch);
  CHECK(backend.requests().size() == 1);
  CHECK(backend.requests()[0].n == 4);
  REQUIRE(backend.updates().size() == 1);
  CHECK(backend.updates()[0].step_id == 2);
}

TEST_CASE("flaky backend injects classified failures") {
  EchoBackend inner("\\boxed{1}");
  FlakyBackend flaky(inner);
  GenerationRequest req;
  req.n = 1;

  flaky.fail_next_generates(2, /*retryable=*/true);
  CHECK_THROWS_AS(flaky.generate(req), TransportError);
  CHECK_THROWS_AS(flaky.generate(req), TransportError);
  CHECK(flaky.generate(req).completions.size() == 1);

  flaky.fail_next_generates(1, /*retryable=*/false);
  try {
    flaky.generate(req);
    FAIL("expected rejection");
  } catch (const BackendRejectedPromptError& e) {
    CHECK_FALSE(e.retryable());
  }

  UpdateBatch batch;
  flaky.fail_next_updates(1, /*retryable=*/true);
  CHECK_THROWS_AS(flaky.apply_update(batch), TransportError);
  flaky.fail_next_updates(1, /*retryable=*/false);
  CHECK_THROWS_AS(flaky.apply_update(batch), UpdateRejectedError);
  CHECK(flaky.apply_update(batch).step_id == batch.step_id);
  CHECK(inner.updates().size() == 1);
}

namespace {

// In-process HTTP server wrapping httplib::Server for backend tests.
struct TestServer {
  httplib::Server svr;
  int port = 0;
  std::thread thread;

  void start() {
    port = svr.bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    thread = std::thread([this] { svr.listen_after_bind(); });
    svr.wait_until_ready();
  }
  ~TestServer() {
    svr.stop();
    if (thread.joinable()) thread.join();
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port); }
};

}  // namespace

TEST_CASE("http generate round trip with server-reported usage") {
  TestServer server;
  std::mutex mu;
  std::string seen_body;
  server.svr.Post("/generate", [&](const httplib::Request& req,
                                   httplib::Response& res) {
    {
      std::lock_guard<std::mutex> lock(mu);
      seen_body = req.body;
    }
    const auto parsed = json::parse(req.body);
    json out;
    out["completions"] = json::array();
    for (int i = 0; i < parsed.at("n").get<int>(); ++i)
      out["completions"].push_back("\\boxed{" + std::to_string(i) + "}");
    out["usage"] = {{"prompt_tokens", 100}, {"completion_tokens", 55}};
    res.set_content(out.dump(), "application/json");
  });
  server.start();

  HttpBackend backend(server.url());
  CHECK(backend.describe() == "http:" + server.url());
  GenerationRequest req;
  req.prompt = "solve it";
  req.n = 3;
  req.temperature = 0.5;
  req.max_tokens = 777;
  const auto result = backend.generate(req);
  REQUIRE(result.completions.size() == 3);
  CHECK(result.completions[2] == "\\boxed{2}");
  CHECK(result.stats.generated_tokens == 55);
  CHECK(result.stats.total_tokens == 155);
  CHECK_FALSE(result.stats.token_counts_estimated);
  CHECK(result.stats.latency_seconds >= 0.0);

  const auto wire = json::parse(seen_body);
  CHECK(wire.at("prompt") == "solve it");
  CHECK(wire.at("n") == 3);
  CHECK(wire.at("temperature") == 0.5);
  CHECK(wire.at("max_tokens") == 777);
}

TEST_CASE("http generate falls back to the whitespace token proxy") {
  TestServer server;
  server.svr.Post("/generate", [](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"completions":["a b c"]})", "application/json");
  });
  server.start();

  HttpBackend backend(server.url());
  GenerationRequest req;
  req.prompt = "p q";
  req.n = 1;
  const auto result = backend.generate(req);
  CHECK(result.stats.generated_tokens == 3);
  CHECK(result.stats.total_tokens == 5);
  CHECK(result.stats.token_counts_estimated);
}

TEST_CASE("http generate retries retryable failures once") {
  TestServer server;
  std::atomic<int> calls{0};
  server.svr.Post("/generate", [&](const httplib::Request&, httplib::Response& res) {
    if (calls.fetch_add(1) == 0) {
      res.status = 500;
      return;
    }
    res.set_content(R"({"completions":["ok 1"]})", "application/json");
  });
  server.start();

  HttpBackend backend(server.url());
  GenerationRequest req;
  req.n = 1;
  const auto result = backend.generate(req);
  CHECK(result.completions[0] == "ok 1");
  CHECK(calls.load() == 2);
}

TEST_CASE("http generate gives up after the internal retry") {
  TestServer server;
  std::atomic<int> calls{0};
  server.svr.Post("/generate", [&](const httplib::Request&, httplib::Response& res) {
    calls.fetch_add(1);
    res.status = 503;
  });
  server.start();

  HttpBackend backend(server.url());
  GenerationRequest req;
  req.n = 1;
  CHECK_THROWS_AS(backend.generate(req), TransportError);
  CHECK(calls.load() == 2);
}

TEST_CASE("http generate maps statuses to error classes") {
  TestServer server;
  std::atomic<int> status{422};
  std::atomic<int> calls{0};
  server.svr.Post("/generate", [&](const httplib::Request&, httplib::Response& res) {
    calls.fetch_add(1);
    res.status = status.load();
  });
  server.start();
  HttpBackend backend(server.url());
  GenerationRequest req;
  req.n = 1;

  // Prompt rejections are fatal: exactly one attempt.
  CHECK_THROWS_AS(backend.generate(req), BackendRejectedPromptError);
  CHECK(calls.load() == 1);
  status = 413;
  CHECK_THROWS_AS(backend.generate(req), BackendRejectedPromptError);
  status = 400;
  CHECK_THROWS_AS(backend.generate(req), BackendRejectedPromptError);

  // Gateway timeouts are retryable: two attempts.
  calls = 0;
  status = 504;
  CHECK_THROWS_AS(backend.generate(req), BackendTimeoutError);
  CHECK(calls.load() == 2);
  status = 408;
  CHECK_THROWS_AS(backend.generate(req), BackendTimeoutError);
}

TEST_CASE("http generate rejects malformed and miscounted responses") {
  TestServer server;
  std::atomic<int> mode{0};
  server.svr.Post("/generate", [&](const httplib::Request&, httplib::Response& res) {
    if (mode.load() == 0)
      res.set_content("this is not json", "text/plain");
    else
      res.set_content(R"({"completions":["only one"]})", "application/json");
  });
  server.start();
  HttpBackend backend(server.url());
  GenerationRequest req;
  req.n = 2;
  CHECK_THROWS_AS(backend.generate(req), TransportError);
  mode = 1;
  CHECK_THROWS_AS(backend.generate(req), TransportError);
}

TEST_CASE("http apply_update round trip and single-shot failure") {
  TestServer server;
  std::mutex mu;
  std::string seen_body;
  std::atomic<int> calls{0};
  std::atomic<int> status{200};
  server.svr.Post("/update", [&](const httplib::Request& req, httplib::Response& res) {
    calls.fetch_add(1);
    {
      std::lock_guard<std::mutex> lock(mu);
      seen_body = req.body;
    }
    if (status.load() != 200) {
      res.status = status.load();
      return;
    }
    res.set_content(R"({"step_id": 41})", "application/json");
  });
  server.start();

  HttpBackend backend(server.url());
  UpdateBatch batch;
  batch.prompt = "the prompt";
  batch.step_id = 41;
  RewardedSample sample;
  sample.raw_output = "\\boxed{4}";
  sample.answer = "4";
  sample.reward = 1;
  batch.samples = {sample};

  const auto ack = backend.apply_update(batch);
  CHECK(ack.step_id == 41);
  CHECK(calls.load() == 1);
  const auto wire = json::parse(seen_body);
  CHECK(wire.at("prompt") == "the prompt");
  CHECK(wire.at("step_id") == 41);
  REQUIRE(wire.at("samples").size() == 1);
  CHECK(wire.at("samples")[0].at("answer") == "4");
  CHECK(wire.at("samples")[0].at("reward") == 1);

  // Updates are never retried internally: one call per failure.
  calls = 0;
  status = 500;
  CHECK_THROWS_AS(backend.apply_update(batch), UpdateRejectedError);
  CHECK(calls.load() == 1);
  status = 504;
  calls = 0;
  try {
    backend.apply_update(batch);
    FAIL("expected timeout");
  } catch (const BackendTimeoutError& e) {
    CHECK(e.retryable());
  }
  CHECK(calls.load() == 1);
}

TEST_CASE("http backend sends the bearer token from the environment") {
  TestServer server;
  std::mutex mu;
  std::string seen_auth = "unset";
  server.svr.Post("/generate", [&](const httplib::Request& req, httplib::Response& res) {
    {
      std::lock_guard<std::mutex> lock(mu);
      seen_auth = req.get_header_value("Authorization");
    }
    res.set_content(R"({"completions":["x"]})", "application/json");
  });
  server.start();

  GenerationRequest req;
  req.n = 1;

  setenv("CGTTRL_API_TOKEN", "sekret", 1);
  HttpBackend with_token(server.url());
  with_token.generate(req);
  {
    std::lock_guard<std::mutex> lock(mu);
    CHECK(seen_auth == "Bearer sekret");
  }

  unsetenv("CGTTRL_API_TOKEN");
  HttpBackend without_token(server.url());
  without_token.generate(req);
  {
    std::lock_guard<std::mutex> lock(mu);
    CHECK(seen_auth == "");
  }
}

TEST_CASE("http traffic sink records request and response pairs") {
  TestServer server;
  server.svr.Post("/generate", [](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"completions":["y"]})", "application/json");
  });
  server.start();

  HttpBackend backend(server.url());
  std::vector<std::string> lines;
  backend.set_traffic_sink([&](const std::string& line) { lines.push_back(line); });
  GenerationRequest req;
  req.prompt = "traced";
  req.n = 1;
  backend.generate(req);

  REQUIRE(lines.size() == 1);
  const auto parsed = json::parse(lines[0]);
  CHECK(parsed.at("path") == "/generate");
  CHECK(parsed.at("status") == 200);
  CHECK(parsed.at("request").at("prompt") == "traced");
  CHECK(parsed.at("response").at("completions")[0] == "y");
}

TEST_CASE("http backend maps connection failure to a transport error") {
  // Nothing listens here; both the first attempt and the internal retry fail.
  HttpBackend backend("http://127.0.0.1:9");
  GenerationRequest req;
  req.n = 1;
  try {
    backend.generate(req);
    FAIL("expected transport failure");
  } catch (const BackendError& e) {
    CHECK(e.retryable());
  }
}

TEST_CASE("custom endpoint paths are honored") {
  TestServer server;
  std::atomic<int> hits{0};
  server.svr.Post("/v2/gen", [&](const httplib::Request&, httplib::Response& res) {
    hits.fetch_add(1);
    res.set_content(R"({"completions":["z"]})", "application/json");
  });
  server.start();

  HttpBackendOptions options;
  options.generate_path = "/v2/gen";
  HttpBackend backend(server.url(), options);
  GenerationRequest req;
  req.n = 1;
  CHECK(backend.generate(req).completions[0] == "z");
  CHECK(hits.load() == 1);
}
