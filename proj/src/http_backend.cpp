#include <chrono>
#include <cmath>
#include <cstdlib>

#include "cgttrl/backend.hpp"
#include "cgttrl/prompting.hpp"
#include "httplib.h"
#include "json.hpp"

namespace cgttrl {

using nlohmann::json;

namespace {

json batch_to_json(const UpdateBatch& batch) {
  json j;
  j["prompt"] = batch.prompt;
  j["step_id"] = batch.step_id;
  json samples = json::array();
  for (const auto& s : batch.samples) {
    json item;
    item["raw_output"] = s.raw_output;
    item["answer"] = s.answer;
    item["reward"] = s.reward;
    samples.push_back(std::move(item));
  }
  j["samples"] = std::move(samples);
  return j;
}

}  // namespace

HttpBackend::HttpBackend(std::string base_url, HttpBackendOptions options)
    : base_url_(std::move(base_url)), options_(std::move(options)) {
  if (!options_.token_env_var.empty()) {
    if (const char* tok = std::getenv(options_.token_env_var.c_str()))
      auth_token_ = tok;
  }
}

HttpBackend::HttpReply HttpBackend::post_json(const std::string& path,
                                              const std::string& body,
                                              double* latency_seconds) {
  // One client per request: no shared connection state, so concurrent
  // generate calls need no locking.
  httplib::Client client(base_url_);
  const auto timeout_ms =
      std::chrono::milliseconds(static_cast<long long>(options_.timeout_seconds * 1000));
  client.set_connection_timeout(timeout_ms);
  client.set_read_timeout(timeout_ms);
  client.set_write_timeout(timeout_ms);

  httplib::Headers headers;
  if (!auth_token_.empty())
    headers.emplace("Authorization", "Bearer " + auth_token_);

  const auto start = std::chrono::steady_clock::now();
  httplib::Result res = client.Post(path, headers, body, "application/json");
  const auto end = std::chrono::steady_clock::now();
  *latency_seconds = std::chrono::duration<double>(end - start).count();

  if (!res) {
    const auto err = res.error();
    const std::string what =
        "POST " + base_url_ + path + ": " + httplib::to_string(err);
    if (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read ||
        err == httplib::Error::Write)
      throw BackendTimeoutError(what);
    throw TransportError(what);
  }

  if (sink_) {
    json line;
    line["path"] = path;
    line["request"] = json::parse(body, nullptr, false);
    line["status"] = res->status;
    line["response"] = json::parse(res->body, nullptr, false);
    if (line["response"].is_discarded()) line["response"] = res->body;
    sink_(line.dump());
  }
  return HttpReply{res->status, res->body};
}

GenerationResult HttpBackend::generate(const GenerationRequest& req) {
  json body;
  body["prompt"] = req.prompt;
  body["n"] = req.n;
  body["temperature"] = req.temperature;
  body["max_tokens"] = req.max_tokens;
  const std::string payload = body.dump();

  auto attempt = [&]() -> GenerationResult {
    double latency = 0.0;
    HttpReply reply = post_json(options_.generate_path, payload, &latency);
    if (reply.status == 408 || reply.status == 504)
      throw BackendTimeoutError("generate: HTTP " + std::to_string(reply.status));
    if (reply.status == 400 || reply.status == 413 || reply.status == 422)
      throw BackendRejectedPromptError("generate: HTTP " +
                                       std::to_string(reply.status) + " " +
                                       reply.body);
    if (reply.status != 200)
      throw TransportError("generate: HTTP " + std::to_string(reply.status));

    json parsed = json::parse(reply.body, nullptr, false);
    if (parsed.is_discarded() || !parsed.contains("completions") ||
        !parsed["completions"].is_array())
      throw TransportError("generate: malformed response body");

    GenerationResult result;
    for (const auto& c : parsed["completions"])
      result.completions.push_back(c.get<std::string>());
    if (static_cast<int>(result.completions.size()) != req.n)
      throw TransportError("generate: expected " + std::to_string(req.n) +
                           " completions, got " +
                           std::to_string(result.completions.size()));

    result.stats.latency_seconds = latency;
    if (parsed.contains("usage") && parsed["usage"].is_object() &&
        parsed["usage"].contains("prompt_tokens") &&
        parsed["usage"].contains("completion_tokens")) {
      const auto prompt_tokens = parsed["usage"]["prompt_tokens"].get<std::int64_t>();
      result.stats.generated_tokens =
          parsed["usage"]["completion_tokens"].get<std::int64_t>();
      result.stats.total_tokens = prompt_tokens + result.stats.generated_tokens;
    } else {
      std::int64_t generated = 0;
      for (const auto& c : result.completions)
        generated += static_cast<std::int64_t>(estimate_tokens(c));
      result.stats.generated_tokens = generated;
      result.stats.total_tokens =
          generated + static_cast<std::int64_t>(estimate_tokens(req.prompt));
      result.stats.token_counts_estimated = true;
    }
    return result;
  };

  try {
    return attempt();
  } catch (const BackendError& e) {
    if (!e.retryable()) throw;
    return attempt();
  }
}

UpdateAck HttpBackend::apply_update(const UpdateBatch& batch) {
  const std::string payload = batch_to_json(batch).dump();
  double latency = 0.0;
  HttpReply reply = post_json(options_.update_path, payload, &latency);
  if (reply.status == 408 || reply.status == 504)
    throw BackendTimeoutError("update: HTTP " + std::to_string(reply.status));
  if (reply.status != 200)
    throw UpdateRejectedError("update: HTTP " + std::to_string(reply.status) + " " +
                              reply.body);
  json parsed = json::parse(reply.body, nullptr, false);
  UpdateAck ack;
  ack.step_id = batch.step_id;
  if (parsed.is_object() && parsed.contains("step_id"))
    ack.step_id = parsed["step_id"].get<std::int64_t>();
  return ack;
}

}  // namespace cgttrl
