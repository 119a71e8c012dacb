#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "cgttrl/config.hpp"

namespace cgttrl {

class UnknownQueryError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Synthetic benchmark task: a finite answer set with a known truth, initial
// policy logits, and the additive logit shift that supplying context applies
// to the true answer.
struct SimTask {
  std::string query_id;
  std::vector<std::string> answer_set;
  std::string truth;
  std::vector<double> initial_logits;
  double boost_delta = 0.0;
};

struct AnswerReward {
  std::string answer;
  double reward = 0.0;
};

// Softmax categorical policy over a finite answer set per query. Parameters
// θ are the logits; supplying context adds the per-answer boost before
// sampling but never enters the gradient — context shapes exploration, the
// update only sees θ.
class SimulatedPolicy {
 public:
  void register_task(const SimTask& task);

  // n draws from softmax((θ + boost·1[with_context]) / τ); τ=0 returns the
  // argmax answer n times with ties going to the lexicographically smallest.
  std::vector<std::string> sample(const std::string& query_id, int n,
                                  double temperature, bool with_context,
                                  std::uint64_t seed) const;

  // θ ← θ + lr · (1/N) Σᵢ Rᵢ · (onehot(aᵢ) − π), π = softmax(θ).
  void reinforce_update(const std::string& query_id,
                        const std::vector<AnswerReward>& samples,
                        double learning_rate);

  // softmax((θ + boost·1[with_context]) / τ); τ must be > 0 here.
  std::vector<double> probabilities(const std::string& query_id, bool with_context,
                                    double temperature = 1.0) const;
  std::string greedy(const std::string& query_id, bool with_context) const;

  const std::vector<std::string>& answers(const std::string& query_id) const;
  const std::vector<double>& logits(const std::string& query_id) const;
  const std::vector<double>& boosts(const std::string& query_id) const;
  std::vector<std::string> query_ids() const;

 private:
  struct Entry {
    std::vector<std::string> answers;
    std::vector<double> logits;
    std::vector<double> boosts;
  };
  const Entry& entry(const std::string& query_id) const;
  std::map<std::string, Entry> entries_;
};

// "Duel" tasks for convergence experiments: four integer answers where the
// truth starts as the runner-up, so unaided majority voting usually locks
// onto the leading distractor and only the context boost flips the vote.
std::vector<SimTask> make_duel_tasks(std::size_t count, double boost_delta,
                                     std::uint64_t seed);

struct ConvergenceRow {
  int epoch = 0;  // 1-based
  std::string task_id;
  std::string variant;  // "context" | "no_context"
  double accuracy = 0.0;
  std::uint64_t seed = 0;
};

struct ConvergenceReport {
  std::string variant;
  int total_steps = 0;
  double threshold = 0.9;
  // Mean greedy accuracy over tasks and seeds, indexed by epoch / by global
  // step (both recorded after the corresponding updates have been applied).
  std::vector<double> epoch_accuracy;
  std::vector<double> step_accuracy;
  // First 1-based step whose mean accuracy reaches threshold, averaged over
  // seeds; a seed that never reaches it contributes total_steps + 1.
  double mean_iterations_to_threshold = 0.0;
  std::vector<ConvergenceRow> rows;  // one per (epoch, task, seed)
};

// Runs the full loop (sample M → vote → downsample N → reward → update) for
// every task over config.epochs × config.steps_per_epoch steps, once per
// seed, and aggregates. Accuracy is greedy decoding against truth on the
// bare learned logits, so both variants are measured on the same footing.
ConvergenceReport run_convergence_experiment(const std::vector<SimTask>& tasks,
                                             const AdaptationConfig& config,
                                             bool with_context,
                                             const std::vector<std::uint64_t>& seeds,
                                             double learning_rate = 1.0);

// The k per-run seeds used when a simulate invocation asks for "k seeds".
std::vector<std::uint64_t> derive_seed_list(std::uint64_t base, std::size_t k);

// CSV with header epoch,task_id,variant,accuracy,seed.
std::string convergence_csv(const std::vector<ConvergenceReport>& reports);
// JSON summary: per-variant epoch accuracies and iteration counts.
std::string convergence_summary_json(const std::vector<ConvergenceReport>& reports);

}  // namespace cgttrl
