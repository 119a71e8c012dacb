#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace cgttrl {

class AllExtractionsFailedError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};
class InvalidNError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Extraction failure is represented as the empty string; a successfully
// extracted answer is never empty after normalization.
inline constexpr std::string_view kExtractionFailed = "";

// Canonical answer form: trimmed, internal whitespace collapsed, surrounding
// '$' stripped, leading '+' stripped, integers' trailing ".0" cut, "-0"
// canonicalized to "0". Idempotent.
std::string normalize_answer(std::string_view raw);

// Pulls the final answer out of a completion: content of the last
// brace-balanced \boxed{...}, else the last standalone number, normalized.
// Returns kExtractionFailed when neither is present.
std::string extract_answer(std::string_view raw);

// M sampled completions for one assembled prompt with their extracted
// answers (answers[i] == kExtractionFailed marks a failed extraction).
struct RolloutBatch {
  std::string prompt_id;
  std::vector<std::string> raw_outputs;
  std::vector<std::string> answers;
  double temperature = 1.0;

  std::size_t size() const { return raw_outputs.size(); }

  // Runs extract_answer over each output.
  static RolloutBatch from_outputs(std::string prompt_id,
                                   std::vector<std::string> outputs,
                                   double temperature);
  // Simulation path: outputs already are normalized answers.
  static RolloutBatch from_answers(std::string prompt_id,
                                   std::vector<std::string> answers,
                                   double temperature);
};

struct PseudoLabel {
  std::string value;
  int vote_count = 0;
  // Fraction of valid (non-failure) answers that voted for value, so it is
  // always ≥ 1/|valid| and the invariant fraction ∈ (0,1] holds even when
  // some extractions failed.
  double vote_fraction = 0.0;
  bool tie_broken = false;
};

// Mode of the non-failure answers; ties go to the value whose first
// occurrence is earliest. Throws AllExtractionsFailedError when every answer
// is the failure marker (or the list is empty).
PseudoLabel majority_vote(const std::vector<std::string>& answers);

// N distinct indices into [0, batch.size()) drawn uniformly without
// replacement, in draw order. Requires 1 <= N < M.
std::vector<std::size_t> downsample(const RolloutBatch& batch, std::size_t n,
                                    std::uint64_t seed);

struct RewardedSample {
  std::string raw_output;
  std::string answer;
  int reward = 0;  // 1 iff answer == label.value
};

// Binary reward per pick: 1 iff the extracted answer equals the pseudo-label
// exactly. Extraction failures always get 0 (they never equal a label).
std::vector<RewardedSample> compute_rewards(const RolloutBatch& batch,
                                            const std::vector<std::size_t>& picks,
                                            const PseudoLabel& label);

// One JSONL line for run logs:
// {"prompt_id","outputs","answers","label","picks","rewards"}.
std::string batch_log_line(const RolloutBatch& batch, const PseudoLabel& label,
                           const std::vector<std::size_t>& picks,
                           const std::vector<RewardedSample>& rewarded);

}  // namespace cgttrl
