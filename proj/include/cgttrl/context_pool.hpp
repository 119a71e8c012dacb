#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "cgttrl/text_features.hpp"

namespace cgttrl {

class DuplicateIdError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};
class EmptyPoolError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};
class IoError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};
// Malformed input; the message names the file and, for JSONL, the line.
class FormatError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

// One worked example: query, step-by-step solution, final response.
// An example with no solution or no response is "query-only" (AMC/AIME/GPQA
// style datasets ship questions and ground truth only).
struct ContextExample {
  std::string id;
  std::string query;
  std::string solution;
  std::string response;

  bool query_only() const { return solution.empty() || response.empty(); }

  friend bool operator==(const ContextExample&, const ContextExample&) = default;
};

// Immutable pool of K examples with corpus stats fitted on the example
// queries and one precomputed TF-IDF vector per query. Build once, share
// across threads.
class PoolIndex {
 public:
  static PoolIndex build(std::vector<ContextExample> examples);

  std::size_t size() const { return examples_.size(); }
  const std::vector<ContextExample>& examples() const { return examples_; }
  const ContextExample& example(std::size_t pos) const { return examples_.at(pos); }
  const CorpusStats& stats() const { return stats_; }
  const SparseVector& features(std::size_t pos) const { return features_.at(pos); }
  const std::vector<SparseVector>& all_features() const { return features_; }

  // True when any record lacks a worked solution; such pools are loadable for
  // evaluation but cannot serve as context sources.
  bool query_only() const { return query_only_; }

  std::optional<std::size_t> position_of(std::string_view id) const;

  // Pool positions of every example except the one whose id equals
  // exclude_id, order preserved. An unknown exclude_id excludes nothing.
  std::vector<std::size_t> candidates(
      std::optional<std::string_view> exclude_id = std::nullopt) const;

  // Writes the pool JSONL at pool_path and the feature sidecar next to it.
  // Both files are deterministic functions of the pool contents.
  void persist(const std::filesystem::path& pool_path) const;
  static PoolIndex load(const std::filesystem::path& pool_path);
  static std::filesystem::path sidecar_path(const std::filesystem::path& pool_path);

 private:
  PoolIndex() = default;
  void index_ids();

  std::vector<ContextExample> examples_;
  CorpusStats stats_;
  std::vector<SparseVector> features_;
  std::unordered_map<std::string, std::size_t> by_id_;
  bool query_only_ = false;
};

// Reads one JSONL file of {"id","query","solution"?,"response"?} records.
// FormatError messages carry "<path>:<line>".
std::vector<ContextExample> read_pool_jsonl(const std::filesystem::path& path);

}  // namespace cgttrl
