#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cgttrl/voting.hpp"

namespace cgttrl {

struct GenerationRequest {
  std::string prompt;
  int n = 1;
  double temperature = 1.0;
  int max_tokens = 2048;
};

struct BackendStats {
  std::int64_t generated_tokens = 0;
  std::int64_t total_tokens = 0;  // prompt + generated
  double latency_seconds = 0.0;
  // True when the backend reported no usage and the whitespace proxy was
  // used instead.
  bool token_counts_estimated = false;
};

struct GenerationResult {
  std::vector<std::string> completions;
  BackendStats stats;
};

struct UpdateBatch {
  std::string prompt;
  std::vector<RewardedSample> samples;
  std::int64_t step_id = 0;
};

struct UpdateAck {
  std::int64_t step_id = 0;
};

// Backend failures carry a retryable/fatal classification: transport-level
// faults may be retried, semantic rejections may not.
class BackendError : public std::runtime_error {
 public:
  BackendError(const std::string& what, bool retryable)
      : std::runtime_error(what), retryable_(retryable) {}
  bool retryable() const { return retryable_; }

 private:
  bool retryable_;
};

class BackendTimeoutError : public BackendError {
 public:
  explicit BackendTimeoutError(const std::string& what)
      : BackendError(what, /*retryable=*/true) {}
};
class TransportError : public BackendError {
 public:
  explicit TransportError(const std::string& what)
      : BackendError(what, /*retryable=*/true) {}
};
class BackendRejectedPromptError : public BackendError {
 public:
  explicit BackendRejectedPromptError(const std::string& what)
      : BackendError(what, /*retryable=*/false) {}
};
class UpdateRejectedError : public BackendError {
 public:
  explicit UpdateRejectedError(const std::string& what)
      : BackendError(what, /*retryable=*/false) {}
};

// Pluggable model surface: sample n completions for a prompt, and hand a
// rewarded batch to whatever trainer sits behind the backend. The
// orchestrator treats the backend's learning as opaque.
class ModelBackend {
 public:
  virtual ~ModelBackend() = default;
  virtual GenerationResult generate(const GenerationRequest& req) = 0;
  virtual UpdateAck apply_update(const UpdateBatch& batch) = 0;
  virtual std::string describe() const = 0;
};

struct HttpBackendOptions {
  std::string generate_path = "/generate";
  std::string update_path = "/update";
  // Name of the environment variable holding the bearer token; empty value
  // or unset variable means no Authorization header.
  std::string token_env_var = "CGTTRL_API_TOKEN";
  double timeout_seconds = 120.0;
};

// HTTP client speaking the JSON wire contract:
//   POST {generate_path}  {"prompt","n","temperature","max_tokens"}
//     -> {"completions":[...], "usage":{"prompt_tokens","completion_tokens"}?}
//   POST {update_path}    {"prompt","step_id","samples":[{"raw_output","answer","reward"},...]}
//     -> {"step_id"}
// generate retries once internally on retryable failures (idempotent);
// apply_update never retries internally (the trainer is stateful) — retry
// policy for updates belongs to the caller.
class HttpBackend final : public ModelBackend {
 public:
  using TrafficSink = std::function<void(const std::string& jsonl_line)>;

  explicit HttpBackend(std::string base_url, HttpBackendOptions options = {});

  GenerationResult generate(const GenerationRequest& req) override;
  UpdateAck apply_update(const UpdateBatch& batch) override;
  std::string describe() const override { return "http:" + base_url_; }

  // When set, every request/response pair is appended as one JSON line.
  void set_traffic_sink(TrafficSink sink) { sink_ = std::move(sink); }

 private:
  struct HttpReply {
    int status = 0;
    std::string body;
  };
  HttpReply post_json(const std::string& path, const std::string& body,
                      double* latency_seconds);

  std::string base_url_;
  HttpBackendOptions options_;
  std::string auth_token_;
  TrafficSink sink_;
};

}  // namespace cgttrl
