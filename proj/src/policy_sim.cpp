#include "cgttrl/policy_sim.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "cgttrl/rng.hpp"
#include "cgttrl/voting.hpp"
#include "json.hpp"

namespace cgttrl {

namespace {

// Seed-path salts so the sampling and downsampling streams never collide.
constexpr std::uint64_t kSaltSimSample = 11;
constexpr std::uint64_t kSaltSimDownsample = 12;
constexpr std::uint64_t kSaltSimSeedList = 13;
constexpr std::uint64_t kSaltTaskGen = 14;

std::vector<double> softmax(const std::vector<double>& logits) {
  double max_logit = logits.front();
  for (double l : logits) max_logit = std::max(max_logit, l);
  std::vector<double> probs(logits.size());
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    probs[i] = std::exp(logits[i] - max_logit);
    z += probs[i];
  }
  for (double& p : probs) p /= z;
  return probs;
}

}  // namespace

void SimulatedPolicy::register_task(const SimTask& task) {
  if (task.answer_set.empty())
    throw std::invalid_argument("task " + task.query_id + " has no answers");
  if (task.answer_set.size() != task.initial_logits.size())
    throw std::invalid_argument("task " + task.query_id +
                                ": logits/answers size mismatch");
  const auto truth_it =
      std::find(task.answer_set.begin(), task.answer_set.end(), task.truth);
  if (truth_it == task.answer_set.end())
    throw std::invalid_argument("task " + task.query_id +
                                ": truth not in answer set");
  Entry entry;
  entry.answers = task.answer_set;
  entry.logits = task.initial_logits;
  entry.boosts.assign(task.answer_set.size(), 0.0);
  entry.boosts[static_cast<std::size_t>(truth_it - task.answer_set.begin())] =
      task.boost_delta;
  entries_[task.query_id] = std::move(entry);
}

const SimulatedPolicy::Entry& SimulatedPolicy::entry(
    const std::string& query_id) const {
  auto it = entries_.find(query_id);
  if (it == entries_.end())
    throw UnknownQueryError("unknown query \"" + query_id + "\"");
  return it->second;
}

std::vector<double> SimulatedPolicy::probabilities(const std::string& query_id,
                                                   bool with_context,
                                                   double temperature) const {
  const Entry& e = entry(query_id);
  if (temperature <= 0.0)
    throw std::invalid_argument("probabilities requires temperature > 0");
  std::vector<double> scaled(e.logits.size());
  for (std::size_t i = 0; i < scaled.size(); ++i) {
    const double boosted = e.logits[i] + (with_context ? e.boosts[i] : 0.0);
    scaled[i] = boosted / temperature;
  }
  return softmax(scaled);
}

std::string SimulatedPolicy::greedy(const std::string& query_id,
                                    bool with_context) const {
  const Entry& e = entry(query_id);
  std::size_t best = 0;
  double best_logit = e.logits[0] + (with_context ? e.boosts[0] : 0.0);
  for (std::size_t i = 1; i < e.logits.size(); ++i) {
    const double l = e.logits[i] + (with_context ? e.boosts[i] : 0.0);
    // Ties go to the lexicographically smallest answer, not the first index.
    if (l > best_logit || (l == best_logit && e.answers[i] < e.answers[best])) {
      best = i;
      best_logit = l;
    }
  }
  return e.answers[best];
}

std::vector<std::string> SimulatedPolicy::sample(const std::string& query_id, int n,
                                                 double temperature,
                                                 bool with_context,
                                                 std::uint64_t seed) const {
  const Entry& e = entry(query_id);
  if (n < 1) throw std::invalid_argument("sample count must be >= 1");
  if (temperature < 0.0) throw std::invalid_argument("temperature must be >= 0");

  std::vector<std::string> out;
  out.reserve(static_cast<std::size_t>(n));
  if (temperature == 0.0) {
    const std::string pick = greedy(query_id, with_context);
    out.assign(static_cast<std::size_t>(n), pick);
    return out;
  }

  const std::vector<double> probs = probabilities(query_id, with_context, temperature);
  Rng rng(seed);
  for (int i = 0; i < n; ++i) {
    const double u = rng.next_double();
    double cum = 0.0;
    std::size_t pick = probs.size() - 1;  // guard against fp undershoot
    for (std::size_t k = 0; k < probs.size(); ++k) {
      cum += probs[k];
      if (u < cum) {
        pick = k;
        break;
      }
    }
    out.push_back(e.answers[pick]);
  }
  return out;
}

void SimulatedPolicy::reinforce_update(const std::string& query_id,
                                       const std::vector<AnswerReward>& samples,
                                       double learning_rate) {
  auto it = entries_.find(query_id);
  if (it == entries_.end())
    throw UnknownQueryError("unknown query \"" + query_id + "\"");
  Entry& e = it->second;
  if (samples.empty())
    throw std::invalid_argument("reinforce_update requires samples");

  // π comes from the bare parameters θ: the context boost shapes sampling
  // only and must not leak into the gradient.
  const std::vector<double> pi = softmax(e.logits);
  std::vector<double> grad(e.logits.size(), 0.0);
  for (const auto& s : samples) {
    if (s.reward == 0.0) continue;  // zero reward contributes nothing
    const auto a = std::find(e.answers.begin(), e.answers.end(), s.answer);
    if (a == e.answers.end())
      throw std::invalid_argument("rewarded answer \"" + s.answer +
                                  "\" not in the answer set of " + query_id);
    const std::size_t idx = static_cast<std::size_t>(a - e.answers.begin());
    for (std::size_t k = 0; k < grad.size(); ++k) {
      const double onehot = (k == idx) ? 1.0 : 0.0;
      grad[k] += s.reward * (onehot - pi[k]);
    }
  }
  const double scale = learning_rate / static_cast<double>(samples.size());
  for (std::size_t k = 0; k < e.logits.size(); ++k)
    e.logits[k] += scale * grad[k];
}

const std::vector<std::string>& SimulatedPolicy::answers(
    const std::string& query_id) const {
  return entry(query_id).answers;
}
const std::vector<double>& SimulatedPolicy::logits(const std::string& query_id) const {
  return entry(query_id).logits;
}
const std::vector<double>& SimulatedPolicy::boosts(const std::string& query_id) const {
  return entry(query_id).boosts;
}
std::vector<std::string> SimulatedPolicy::query_ids() const {
  std::vector<std::string> ids;
  ids.reserve(entries_.size());
  for (const auto& [id, entry] : entries_) ids.push_back(id);
  return ids;
}

std::vector<SimTask> make_duel_tasks(std::size_t count, double boost_delta,
                                     std::uint64_t seed) {
  std::vector<SimTask> tasks;
  tasks.reserve(count);
  for (std::size_t t = 0; t < count; ++t) {
    Rng rng(derive_seed(seed, {kSaltTaskGen, t}));

    // Four distinct small-integer answers; normalization leaves them alone.
    std::vector<std::string> answers;
    while (answers.size() < 4) {
      std::string candidate = std::to_string(1 + rng.next_index(999));
      if (std::find(answers.begin(), answers.end(), candidate) == answers.end())
        answers.push_back(candidate);
    }

    // Truth is the runner-up: p(truth) in [0.32, 0.42], the leading
    // distractor 0.04..0.12 ahead, the rest split over the remaining two.
    const double p_truth = 0.32 + 0.10 * rng.next_double();
    const double gap = 0.04 + 0.08 * rng.next_double();
    const double p_top = p_truth + gap;
    const double rest = 1.0 - p_truth - p_top;
    const double split = 0.25 + 0.50 * rng.next_double();
    const double p3 = rest * split;
    const double p4 = rest - p3;

    // Random placement of the four roles over the four answer slots.
    const auto order = Rng(derive_seed(seed, {kSaltTaskGen, t, 1}))
                           .sample_without_replacement(4, 4);
    std::vector<double> probs(4, 0.0);
    probs[order[0]] = p_top;
    probs[order[1]] = p_truth;
    probs[order[2]] = p3;
    probs[order[3]] = p4;

    SimTask task;
    task.query_id = "task-" + std::to_string(t);
    task.answer_set = answers;
    task.truth = answers[order[1]];
    task.initial_logits.resize(4);
    for (std::size_t i = 0; i < 4; ++i) task.initial_logits[i] = std::log(probs[i]);
    task.boost_delta = boost_delta;
    tasks.push_back(std::move(task));
  }
  return tasks;
}

ConvergenceReport run_convergence_experiment(const std::vector<SimTask>& tasks,
                                             const AdaptationConfig& config,
                                             bool with_context,
                                             const std::vector<std::uint64_t>& seeds,
                                             double learning_rate) {
  if (tasks.empty()) throw std::invalid_argument("no tasks supplied");
  if (seeds.empty()) throw std::invalid_argument("no seeds supplied");
  config.validate();

  const int total_steps = config.epochs * config.steps_per_epoch;
  ConvergenceReport report;
  report.variant = with_context ? "context" : "no_context";
  report.total_steps = total_steps;
  report.epoch_accuracy.assign(static_cast<std::size_t>(config.epochs), 0.0);
  report.step_accuracy.assign(static_cast<std::size_t>(total_steps), 0.0);

  double iteration_sum = 0.0;
  for (std::uint64_t seed : seeds) {
    SimulatedPolicy policy;
    for (const auto& task : tasks) policy.register_task(task);

    int reached_at = total_steps + 1;
    int global_step = 0;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
      for (int step = 0; step < config.steps_per_epoch; ++step, ++global_step) {
        for (std::size_t ti = 0; ti < tasks.size(); ++ti) {
          const auto& task = tasks[ti];
          const auto sample_seed = derive_seed(
              seed, {kSaltSimSample, static_cast<std::uint64_t>(global_step), ti});
          const auto answers = policy.sample(task.query_id, config.M,
                                             config.tau_train, with_context,
                                             sample_seed);
          RolloutBatch batch =
              RolloutBatch::from_answers(task.query_id, answers, config.tau_train);
          const PseudoLabel label = majority_vote(batch.answers);
          const auto picks = downsample(
              batch, static_cast<std::size_t>(config.N),
              derive_seed(seed, {kSaltSimDownsample,
                                 static_cast<std::uint64_t>(global_step), ti}));
          const auto rewarded = compute_rewards(batch, picks, label);
          std::vector<AnswerReward> update;
          update.reserve(rewarded.size());
          for (const auto& r : rewarded)
            update.push_back({r.answer, static_cast<double>(r.reward)});
          policy.reinforce_update(task.query_id, update, learning_rate);
        }

        // Accuracy after this step's updates: greedy on bare θ, so the
        // metric reflects what the policy has learned, not the boost.
        double correct = 0.0;
        for (const auto& task : tasks)
          if (policy.greedy(task.query_id, /*with_context=*/false) == task.truth)
            correct += 1.0;
        const double acc = correct / static_cast<double>(tasks.size());
        report.step_accuracy[static_cast<std::size_t>(global_step)] +=
            acc / static_cast<double>(seeds.size());
        if (reached_at > total_steps && acc >= report.threshold)
          reached_at = global_step + 1;
      }

      double epoch_correct = 0.0;
      for (const auto& task : tasks) {
        const bool ok =
            policy.greedy(task.query_id, /*with_context=*/false) == task.truth;
        epoch_correct += ok ? 1.0 : 0.0;
        report.rows.push_back(
            {epoch + 1, task.query_id, report.variant, ok ? 1.0 : 0.0, seed});
      }
      report.epoch_accuracy[static_cast<std::size_t>(epoch)] +=
          epoch_correct / static_cast<double>(tasks.size()) /
          static_cast<double>(seeds.size());
    }
    iteration_sum += static_cast<double>(reached_at);
  }
  report.mean_iterations_to_threshold =
      iteration_sum / static_cast<double>(seeds.size());
  return report;
}

std::string convergence_csv(const std::vector<ConvergenceReport>& reports) {
  std::ostringstream out;
  out << "epoch,task_id,variant,accuracy,seed\n";
  for (const auto& report : reports)
    for (const auto& row : report.rows)
      out << row.epoch << ',' << row.task_id << ',' << row.variant << ','
          << row.accuracy << ',' << row.seed << '\n';
  return out.str();
}

std::string convergence_summary_json(const std::vector<ConvergenceReport>& reports) {
  nlohmann::json j;
  for (const auto& report : reports) {
    nlohmann::json entry;
    entry["total_steps"] = report.total_steps;
    entry["threshold"] = report.threshold;
    entry["epoch_accuracy"] = report.epoch_accuracy;
    entry["step_accuracy"] = report.step_accuracy;
    entry["mean_iterations_to_threshold"] = report.mean_iterations_to_threshold;
    j[report.variant] = std::move(entry);
  }
  return j.dump(2);
}

std::vector<std::uint64_t> derive_seed_list(std::uint64_t base, std::size_t k) {
  std::vector<std::uint64_t> seeds;
  seeds.reserve(k);
  for (std::size_t i = 0; i < k; ++i)
    seeds.push_back(derive_seed(base, {kSaltSimSeedList, i}));
  return seeds;
}

}  // namespace cgttrl
