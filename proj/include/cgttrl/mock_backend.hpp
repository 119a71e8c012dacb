#pragma once

#include <cstdint>
#include <functional>
#include <mutex>
#include <string>
#include <vector>

#include "cgttrl/backend.hpp"
#include "cgttrl/policy_sim.hpp"

namespace cgttrl {

// Returns the same canned completion n times and acks every update.
class EchoBackend final : public ModelBackend {
 public:
  explicit EchoBackend(std::string canned) : canned_(std::move(canned)) {}
  GenerationResult generate(const GenerationRequest& req) override;
  UpdateAck apply_update(const UpdateBatch& batch) override;
  std::string describe() const override { return "echo"; }

  const std::vector<UpdateBatch>& updates() const { return updates_; }

 private:
  std::string canned_;
  std::vector<UpdateBatch> updates_;
};

// Completions come from a script over (request, completion index), so a
// fixed prompt sequence replays byte-identically. Records all traffic.
class ScriptedBackend final : public ModelBackend {
 public:
  using Script = std::function<std::string(const GenerationRequest&, int)>;

  explicit ScriptedBackend(Script script) : script_(std::move(script)) {}
  GenerationResult generate(const GenerationRequest& req) override;
  UpdateAck apply_update(const UpdateBatch& batch) override;
  std::string describe() const override { return "scripted"; }

  std::vector<GenerationRequest> requests() const;
  std::vector<UpdateBatch> updates() const;

 private:
  Script script_;
  mutable std::mutex mu_;
  std::vector<GenerationRequest> requests_;
  std::vector<UpdateBatch> updates_;
};

// Wraps another backend and injects failures for the first few calls —
// exercise code paths for retry/skip handling.
class FlakyBackend final : public ModelBackend {
 public:
  explicit FlakyBackend(ModelBackend& inner) : inner_(inner) {}

  // Next `times` generate calls throw (retryable ? TransportError
  // : BackendRejectedPromptError) before reaching the inner backend.
  void fail_next_generates(int times, bool retryable);
  // Next `times` apply_update calls throw (retryable ? TransportError
  // : UpdateRejectedError).
  void fail_next_updates(int times, bool retryable);

  GenerationResult generate(const GenerationRequest& req) override;
  UpdateAck apply_update(const UpdateBatch& batch) override;
  std::string describe() const override { return "flaky:" + inner_.describe(); }

 private:
  ModelBackend& inner_;
  int generate_failures_ = 0;
  bool generate_retryable_ = true;
  int update_failures_ = 0;
  bool update_retryable_ = true;
};

// Bridges the ModelBackend wire surface onto a SimulatedPolicy so the full
// orchestrator loop can run against the simulator. Queries are recognized by
// their registered text inside the prompt (the match closest to the end of
// the prompt wins, since context examples may embed other queries), and
// context is detected by a configurable prompt predicate.
class SimPolicyBackend final : public ModelBackend {
 public:
  using ContextDetector = std::function<bool(const std::string& prompt)>;

  SimPolicyBackend(SimulatedPolicy& policy, std::uint64_t seed,
                   double learning_rate = 1.0);

  void register_query(std::string query_text, std::string query_id);
  void set_context_detector(ContextDetector detector);

  GenerationResult generate(const GenerationRequest& req) override;
  UpdateAck apply_update(const UpdateBatch& batch) override;
  std::string describe() const override { return "sim-policy"; }

 private:
  std::string resolve(const std::string& prompt) const;

  SimulatedPolicy& policy_;
  std::uint64_t seed_;
  double learning_rate_;
  std::uint64_t call_index_ = 0;
  ContextDetector detector_;
  std::vector<std::pair<std::string, std::string>> queries_;  // text → id
};

}  // namespace cgttrl
