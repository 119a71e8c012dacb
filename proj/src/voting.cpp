#include "cgttrl/voting.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <optional>

#include "cgttrl/rng.hpp"
#include "json.hpp"

namespace cgttrl {

namespace {

bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_alnum(char c) {
  return is_digit(c) || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}

std::string normalize_once(std::string s) {
  // Trim + collapse internal whitespace runs to single spaces.
  std::string collapsed;
  bool pending_space = false;
  for (char c : s) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!collapsed.empty()) pending_space = true;
      continue;
    }
    if (pending_space) {
      collapsed += ' ';
      pending_space = false;
    }
    collapsed += c;
  }
  s = std::move(collapsed);

  // Strip surrounding math-mode dollars.
  while (!s.empty() && s.front() == '$') s.erase(s.begin());
  while (!s.empty() && s.back() == '$') s.pop_back();

  if (!s.empty() && s.front() == '+') s.erase(s.begin());

  // "12.000" → "12" (only when everything after the dot is zeros).
  auto is_int_with_zero_frac = [&]() -> std::optional<std::size_t> {
    std::size_t i = 0;
    if (i < s.size() && s[i] == '-') ++i;
    const std::size_t digits_start = i;
    while (i < s.size() && is_digit(s[i])) ++i;
    if (i == digits_start || i >= s.size() || s[i] != '.') return std::nullopt;
    const std::size_t dot = i++;
    if (i == s.size()) return std::nullopt;
    while (i < s.size() && s[i] == '0') ++i;
    if (i != s.size()) return std::nullopt;
    return dot;
  };
  if (auto dot = is_int_with_zero_frac()) s.erase(*dot);

  // "-0", "-000" → "0".
  if (s.size() >= 2 && s[0] == '-' &&
      std::all_of(s.begin() + 1, s.end(), [](char c) { return c == '0'; }))
    s = "0";
  return s;
}

}  // namespace

std::string normalize_answer(std::string_view raw) {
  std::string cur(raw);
  // The rewrites interact ("$ -0.0 $" needs several passes); iterate to a
  // fixpoint, which a handful of rounds always reaches.
  for (int i = 0; i < 8; ++i) {
    std::string next = normalize_once(cur);
    if (next == cur) break;
    cur = std::move(next);
  }
  return cur;
}

namespace {

// Content of the last brace-balanced \boxed{...}; escape-aware so
// \boxed{\{1\}} keeps its literal braces.
std::optional<std::string> last_boxed(std::string_view text) {
  constexpr std::string_view kAnchor = "\\boxed{";
  std::size_t search_end = text.size();
  while (true) {
    const std::size_t at = text.rfind(kAnchor, search_end == 0 ? 0 : search_end - 1);
    if (at == std::string_view::npos) return std::nullopt;
    std::size_t i = at + kAnchor.size();
    int depth = 1;
    std::string content;
    bool closed = false;
    for (; i < text.size(); ++i) {
      const char c = text[i];
      if (c == '\\' && i + 1 < text.size()) {
        content += c;
        content += text[++i];
        continue;
      }
      if (c == '{') ++depth;
      if (c == '}') {
        --depth;
        if (depth == 0) {
          closed = true;
          break;
        }
      }
      content += c;
    }
    if (closed) return content;
    if (at == 0) return std::nullopt;
    search_end = at;  // unbalanced: fall back to an earlier occurrence
  }
}

// Last standalone number: digits with optional comma grouping, optional
// fraction, optional sign when the sign is not glued to a preceding word.
std::optional<std::string> last_number(std::string_view text) {
  std::optional<std::string> found;
  std::size_t i = 0;
  while (i < text.size()) {
    if (!is_digit(text[i])) {
      ++i;
      continue;
    }
    std::size_t start = i;
    while (i < text.size() && (is_digit(text[i]) ||
                               (text[i] == ',' && i + 1 < text.size() &&
                                is_digit(text[i + 1])))) {
      ++i;
    }
    if (i < text.size() && text[i] == '.' && i + 1 < text.size() &&
        is_digit(text[i + 1])) {
      ++i;
      while (i < text.size() && is_digit(text[i])) ++i;
    }
    // Reject digits embedded in identifiers like "x2" or "2x".
    const bool left_ok = start == 0 || !is_alnum(text[start - 1]) ||
                         is_digit(text[start - 1]);
    const bool right_ok = i >= text.size() || !is_alnum(text[i]);
    if (left_ok && right_ok) {
      std::string num(text.substr(start, i - start));
      num.erase(std::remove(num.begin(), num.end(), ','), num.end());
      if (start > 0 && text[start - 1] == '-' &&
          (start == 1 || !is_alnum(text[start - 2]))) {
        num.insert(num.begin(), '-');
      }
      found = std::move(num);
    }
  }
  return found;
}

}  // namespace

std::string extract_answer(std::string_view raw) {
  if (auto boxed = last_boxed(raw)) {
    std::string normalized = normalize_answer(*boxed);
    if (!normalized.empty()) return normalized;
    return std::string(kExtractionFailed);
  }
  if (auto num = last_number(raw)) return normalize_answer(*num);
  return std::string(kExtractionFailed);
}

RolloutBatch RolloutBatch::from_outputs(std::string prompt_id,
                                        std::vector<std::string> outputs,
                                        double temperature) {
  RolloutBatch batch;
  batch.prompt_id = std::move(prompt_id);
  batch.answers.reserve(outputs.size());
  for (const auto& out : outputs) batch.answers.push_back(extract_answer(out));
  batch.raw_outputs = std::move(outputs);
  batch.temperature = temperature;
  return batch;
}

RolloutBatch RolloutBatch::from_answers(std::string prompt_id,
                                        std::vector<std::string> answers,
                                        double temperature) {
  RolloutBatch batch;
  batch.prompt_id = std::move(prompt_id);
  batch.raw_outputs = answers;
  batch.answers = std::move(answers);
  batch.temperature = temperature;
  return batch;
}

PseudoLabel majority_vote(const std::vector<std::string>& answers) {
  std::map<std::string, int> counts;
  std::map<std::string, std::size_t> first_seen;
  std::size_t valid = 0;
  for (std::size_t i = 0; i < answers.size(); ++i) {
    if (answers[i] == kExtractionFailed) continue;
    ++valid;
    ++counts[answers[i]];
    first_seen.emplace(answers[i], i);
  }
  if (valid == 0)
    throw AllExtractionsFailedError("no answer could be extracted from any sample");

  int max_count = 0;
  for (const auto& [value, count] : counts) max_count = std::max(max_count, count);

  const std::string* best = nullptr;
  int at_max = 0;
  for (const auto& [value, count] : counts) {
    if (count != max_count) continue;
    ++at_max;
    if (!best || first_seen.at(value) < first_seen.at(*best)) best = &value;
  }

  PseudoLabel label;
  label.value = *best;
  label.vote_count = max_count;
  label.vote_fraction = static_cast<double>(max_count) / static_cast<double>(valid);
  label.tie_broken = at_max > 1;
  return label;
}

std::vector<std::size_t> downsample(const RolloutBatch& batch, std::size_t n,
                                    std::uint64_t seed) {
  const std::size_t m = batch.size();
  if (n < 1 || n >= m)
    throw InvalidNError("downsample count must satisfy 1 <= N < M (N=" +
                        std::to_string(n) + ", M=" + std::to_string(m) + ")");
  Rng rng(seed);
  return rng.sample_without_replacement(m, n);
}

std::vector<RewardedSample> compute_rewards(const RolloutBatch& batch,
                                            const std::vector<std::size_t>& picks,
                                            const PseudoLabel& label) {
  std::vector<RewardedSample> out;
  out.reserve(picks.size());
  for (std::size_t pick : picks) {
    RewardedSample sample;
    sample.raw_output = batch.raw_outputs.at(pick);
    sample.answer = batch.answers.at(pick);
    sample.reward = (sample.answer != kExtractionFailed && sample.answer == label.value)
                        ? 1
                        : 0;
    out.push_back(std::move(sample));
  }
  return out;
}

std::string batch_log_line(const RolloutBatch& batch, const PseudoLabel& label,
                           const std::vector<std::size_t>& picks,
                           const std::vector<RewardedSample>& rewarded) {
  nlohmann::json j;
  j["prompt_id"] = batch.prompt_id;
  j["outputs"] = batch.raw_outputs;
  j["answers"] = batch.answers;
  j["label"] = label.value;
  j["picks"] = picks;
  nlohmann::json rewards = nlohmann::json::array();
  for (const auto& s : rewarded) rewards.push_back(s.reward);
  j["rewards"] = std::move(rewards);
  return j.dump();
}

}  // namespace cgttrl
