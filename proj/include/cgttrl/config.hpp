#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

namespace cgttrl {

class ConfigError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Flat run configuration. Defaults are the MATH-500 profile; see profile()
// for the AMC variant. Serialized as flat JSON with exactly these names.
struct AdaptationConfig {
  int C = 3;             // context examples per prompt; 0 disables context
  int M = 32;            // samples per query for voting
  int N = 16;            // downsampled samples for rewards
  double tau_train = 1.0;
  double tau_eval = 0.0;
  int max_tokens = 2048;  // combined input+generation budget
  int epochs = 40;
  int steps_per_epoch = 3;
  std::uint64_t seed = 0;
  std::string strategy = "tfidf";  // tfidf | random | mmr | hybrid
  double mmr_lambda = 0.5;
  int max_in_flight = 1;  // concurrent generate calls during a step

  // Throws ConfigError when any invariant is violated (1 <= N < M, C >= 0,
  // temperatures >= 0, known strategy, positive counts).
  void validate() const;

  std::string to_json() const;  // two-space indented, stable key order

  friend bool operator==(const AdaptationConfig&, const AdaptationConfig&) = default;
};

// Named defaults: "math500" (C=3, M=32) and "amc" (C=5, M=64).
AdaptationConfig config_profile(const std::string& name);

// Strict parse: unknown keys are errors, listed by name. Missing keys keep
// their defaults (start from the math500 profile).
AdaptationConfig parse_config_json(const std::string& text);
AdaptationConfig load_config(const std::filesystem::path& path);

}  // namespace cgttrl
