#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cgttrl/backend.hpp"
#include "cgttrl/config.hpp"
#include "cgttrl/context_pool.hpp"
#include "cgttrl/prompting.hpp"
#include "cgttrl/selection.hpp"

namespace cgttrl {

struct QueryItem {
  std::string id;
  std::string query;
  std::optional<std::string> truth;  // ground truth answer, when supplied
};

// JSONL records {"id","query","truth"?}; FormatError carries "<path>:<line>".
std::vector<QueryItem> read_queries_jsonl(const std::filesystem::path& path);

struct TrainRecord {
  int step = 0;  // 1-based global step
  std::string query_id;
  std::string pseudo_label;  // empty when the vote failed or query skipped
  double vote_fraction = 0.0;
  int rewards_sum = 0;
  bool skipped = false;            // no update happened this step
  bool update_applied = false;
  std::optional<bool> label_correct;  // pseudo-label vs truth, when labeled
};

struct EvalRecord {
  std::string query_id;
  std::string answer;  // extracted; empty on failure/skip
  std::optional<bool> correct;
  bool skipped = false;
};

struct RunMetrics {
  std::vector<TrainRecord> train;
  std::vector<EvalRecord> eval;

  int total_steps = 0;
  int num_queries = 0;
  int labeled_queries = 0;
  int skipped_queries = 0;  // permanently skipped
  int updates_applied = 0;

  double accuracy = 0.0;  // eval accuracy over labeled, non-skipped queries
  std::vector<double> step_label_accuracy;  // pseudo-label accuracy per step
  // First 1-based step whose pseudo-label accuracy reaches 95% of the final
  // eval accuracy; total_steps+1 when never reached, 0 when unlabeled.
  int iterations_to_near_top = 0;

  std::int64_t generation_requests = 0;
  std::int64_t total_generated_tokens = 0;
  std::int64_t total_tokens = 0;

  // Wall-clock timing; persisted to timings.json only, never to metrics.csv
  // or summary.json, so metric files stay byte-reproducible.
  double total_seconds = 0.0;
  std::vector<double> step_seconds;

  std::string metrics_csv() const;
  std::string summary_json(const AdaptationConfig& config) const;
};

struct RunOptions {
  // When non-empty, run artifacts are written here: config.json,
  // metrics.csv, summary.json, timings.json, steps/step_NNNN.jsonl.
  std::filesystem::path out_dir;
  bool verbose = false;
  PromptTemplate prompt_template;
  EmbeddingProvider* embedding_provider = nullptr;  // required for "hybrid"
};

// The full loop: per step and query — select context (excluding the query's
// own pool id), assemble the prompt, sample M at tau_train, majority-vote,
// downsample N, reward, push the update; then one greedy evaluation pass.
// pool may be null (or C=0) for a vanilla no-context run.
RunMetrics run_adaptation(const PoolIndex* pool, const std::vector<QueryItem>& queries,
                          const AdaptationConfig& config, ModelBackend& backend,
                          const RunOptions& options = {});

// Single greedy generation per bare query; no context, no updates.
RunMetrics evaluate_zero_shot(const std::vector<QueryItem>& queries,
                              const AdaptationConfig& config, ModelBackend& backend,
                              const RunOptions& options = {});

// Context-extended prompts, single greedy generation, no updates.
RunMetrics evaluate_icl(const PoolIndex* pool, const std::vector<QueryItem>& queries,
                        const AdaptationConfig& config, ModelBackend& backend,
                        const RunOptions& options = {});

}  // namespace cgttrl
