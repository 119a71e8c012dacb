#include "cgttrl/mock_backend.hpp"

#include "cgttrl/prompting.hpp"
#include "cgttrl/rng.hpp"

namespace cgttrl {

namespace {

constexpr std::uint64_t kSaltSimBackend = 21;

BackendStats proxy_stats(const GenerationRequest& req,
                         const std::vector<std::string>& completions) {
  BackendStats stats;
  for (const auto& c : completions)
    stats.generated_tokens += static_cast<std::int64_t>(estimate_tokens(c));
  stats.total_tokens =
      stats.generated_tokens + static_cast<std::int64_t>(estimate_tokens(req.prompt));
  stats.token_counts_estimated = true;
  return stats;
}

}  // namespace

GenerationResult EchoBackend::generate(const GenerationRequest& req) {
  GenerationResult result;
  result.completions.assign(static_cast<std::size_t>(req.n), canned_);
  result.stats = proxy_stats(req, result.completions);
  return result;
}

UpdateAck EchoBackend::apply_update(const UpdateBatch& batch) {
  updates_.push_back(batch);
  return UpdateAck{batch.step_id};
}

GenerationResult ScriptedBackend::generate(const GenerationRequest& req) {
  GenerationResult result;
  result.completions.reserve(static_cast<std::size_t>(req.n));
  for (int i = 0; i < req.n; ++i) result.completions.push_back(script_(req, i));
  result.stats = proxy_stats(req, result.completions);
  std::lock_guard<std::mutex> lock(mu_);
  requests_.push_back(req);
  return result;
}

UpdateAck ScriptedBackend::apply_update(const UpdateBatch& batch) {
  std::lock_guard<std::mutex> lock(mu_);
  updates_.push_back(batch);
  return UpdateAck{batch.step_id};
}

std::vector<GenerationRequest> ScriptedBackend::requests() const {
  std::lock_guard<std::mutex> lock(mu_);
  return requests_;
}

std::vector<UpdateBatch> ScriptedBackend::updates() const {
  std::lock_guard<std::mutex> lock(mu_);
  return updates_;
}

void FlakyBackend::fail_next_generates(int times, bool retryable) {
  generate_failures_ = times;
  generate_retryable_ = retryable;
}

void FlakyBackend::fail_next_updates(int times, bool retryable) {
  update_failures_ = times;
  update_retryable_ = retryable;
}

GenerationResult FlakyBackend::generate(const GenerationRequest& req) {
  if (generate_failures_ > 0) {
    --generate_failures_;
    if (generate_retryable_) throw TransportError("injected transport failure");
    throw BackendRejectedPromptError("injected prompt rejection");
  }
  return inner_.generate(req);
}

UpdateAck FlakyBackend::apply_update(const UpdateBatch& batch) {
  if (update_failures_ > 0) {
    --update_failures_;
    if (update_retryable_) throw TransportError("injected transport failure");
    throw UpdateRejectedError("injected update rejection");
  }
  return inner_.apply_update(batch);
}

SimPolicyBackend::SimPolicyBackend(SimulatedPolicy& policy, std::uint64_t seed,
                                   double learning_rate)
    : policy_(policy), seed_(seed), learning_rate_(learning_rate) {
  detector_ = [](const std::string& prompt) {
    return prompt.find("Solution:") != std::string::npos;
  };
}

void SimPolicyBackend::register_query(std::string query_text, std::string query_id) {
  queries_.emplace_back(std::move(query_text), std::move(query_id));
}

void SimPolicyBackend::set_context_detector(ContextDetector detector) {
  detector_ = std::move(detector);
}

std::string SimPolicyBackend::resolve(const std::string& prompt) const {
  // The test query is the final block, so of all registered query texts
  // occurring in the prompt the one starting last is the one being asked.
  const std::string* best_id = nullptr;
  std::size_t best_pos = 0;
  for (const auto& [text, id] : queries_) {
    const std::size_t at = prompt.rfind(text);
    if (at == std::string::npos) continue;
    if (!best_id || at > best_pos) {
      best_id = &id;
      best_pos = at;
    }
  }
  if (!best_id)
    throw BackendRejectedPromptError("prompt matches no registered query");
  return *best_id;
}

GenerationResult SimPolicyBackend::generate(const GenerationRequest& req) {
  const std::string query_id = resolve(req.prompt);
  const bool with_context = detector_(req.prompt);
  const auto seed = derive_seed(seed_, {kSaltSimBackend, call_index_++});
  GenerationResult result;
  result.completions =
      policy_.sample(query_id, req.n, req.temperature, with_context, seed);
  result.stats = proxy_stats(req, result.completions);
  return result;
}

UpdateAck SimPolicyBackend::apply_update(const UpdateBatch& batch) {
  const std::string query_id = resolve(batch.prompt);
  std::vector<AnswerReward> samples;
  samples.reserve(batch.samples.size());
  for (const auto& s : batch.samples)
    samples.push_back({s.answer, static_cast<double>(s.reward)});
  policy_.reinforce_update(query_id, samples, learning_rate_);
  return UpdateAck{batch.step_id};
}

}  // namespace cgttrl
