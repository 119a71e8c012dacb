#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>

#include "cgttrl/policy_sim.hpp"
#include "doctest.h"
#include "json.hpp"
#include "support/oracles.hpp"

using namespace cgttrl;

namespace {

SimTask two_answer_task(double boost = 0.0) {
  SimTask task;
  task.query_id = "duel";
  task.answer_set = {"17", "42"};
  task.truth = "42";
  // The distractor leads: π = softmax(1.0, 0.0) ≈ (0.731, 0.269).
  task.initial_logits = {1.0, 0.0};
  task.boost_delta = boost;
  return task;
}

}  // namespace

TEST_CASE("register and inspect a task") {
  SimulatedPolicy policy;
  policy.register_task(two_answer_task(2.0));
  CHECK(policy.answers("duel") == std::vector<std::string>{"17", "42"});
  CHECK(policy.logits("duel") == std::vector<double>{1.0, 0.0});
  CHECK(policy.boosts("duel") == std::vector<double>{0.0, 2.0});
  CHECK(policy.query_ids() == std::vector<std::string>{"duel"});
  CHECK_THROWS_AS(policy.sample("nope", 1, 1.0, false, 0), UnknownQueryError);
  CHECK_THROWS_AS(policy.probabilities("nope", false), UnknownQueryError);
}

TEST_CASE("probabilities match the softmax oracle") {
  SimulatedPolicy policy;
  SimTask task;
  task.query_id = "q";
  task.answer_set = {"a", "b", "c"};
  task.truth = "b";
  task.initial_logits = {0.3, -1.2, 2.0};
  task.boost_delta = 1.5;
  policy.register_task(task);

  const auto bare = policy.probabilities("q", false);
  const auto want = oracle::softmax_ref({0.3, -1.2, 2.0});
  REQUIRE(bare.size() == 3);
  double sum = 0.0;
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(bare[i] == doctest::Approx(want[i]).epsilon(1e-12));
    sum += bare[i];
  }
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));

  // Context adds the boost to the true answer only.
  const auto boosted = policy.probabilities("q", true);
  const auto want_boosted = oracle::softmax_ref({0.3, -1.2 + 1.5, 2.0});
  for (std::size_t i = 0; i < 3; ++i)
    CHECK(boosted[i] == doctest::Approx(want_boosted[i]).epsilon(1e-12));

  // Temperature rescales the logits.
  const auto cold = policy.probabilities("q", false, 0.5);
  const auto want_cold = oracle::softmax_ref({0.6, -2.4, 4.0});
  for (std::size_t i = 0; i < 3; ++i)
    CHECK(cold[i] == doctest::Approx(want_cold[i]).epsilon(1e-12));

  CHECK_THROWS_AS(policy.probabilities("q", false, 0.0), std::invalid_argument);
}

TEST_CASE("greedy decoding and zero-temperature sampling") {
  SimulatedPolicy policy;
  policy.register_task(two_answer_task(2.0));
  CHECK(policy.greedy("duel", false) == "17");
  CHECK(policy.greedy("duel", true) == "42");  // boost flips the argmax

  const auto samples = policy.sample("duel", 5, 0.0, false, 123);
  REQUIRE(samples.size() == 5);
  for (const auto& s : samples) CHECK(s == "17");

  // Ties at the top go to the lexicographically smallest answer.
  SimTask tie;
  tie.query_id = "tie";
  tie.answer_set = {"zebra", "apple", "mango"};
  tie.truth = "apple";
  tie.initial_logits = {1.0, 1.0, 1.0};
  SimulatedPolicy tie_policy;
  tie_policy.register_task(tie);
  CHECK(tie_policy.greedy("tie", false) == "apple");
  CHECK(tie_policy.sample("tie", 3, 0.0, false, 9)[0] == "apple");
}

TEST_CASE("sampling is seeded and matches its distribution") {
  SimulatedPolicy policy;
  SimTask task;
  task.query_id = "u";
  task.answer_set = {"a", "b", "c", "d"};
  task.truth = "a";
  task.initial_logits = {0.0, 0.0, 0.0, 0.0};
  policy.register_task(task);

  const auto once = policy.sample("u", 32, 1.0, false, 77);
  const auto again = policy.sample("u", 32, 1.0, false, 77);
  CHECK(once == again);
  CHECK(policy.sample("u", 32, 1.0, false, 78) != once);

  // 100000 uniform draws: each answer within 3 sigma of 25%.
  std::map<std::string, int> freq;
  for (const auto& s : policy.sample("u", 100000, 1.0, false, 5)) ++freq[s];
  const double sigma = std::sqrt(100000 * 0.25 * 0.75);
  for (const auto& [answer, n] : freq) {
    CHECK(n > 25000 - 3 * sigma);
    CHECK(n < 25000 + 3 * sigma);
  }
}

TEST_CASE("sampling respects the boosted distribution") {
  SimulatedPolicy policy;
  policy.register_task(two_answer_task(4.0));
  // softmax(1, 4): truth probability ≈ 0.9526.
  std::map<std::string, int> freq;
  for (const auto& s : policy.sample("duel", 20000, 1.0, true, 3)) ++freq[s];
  const double p = std::exp(4.0) / (std::exp(1.0) + std::exp(4.0));
  const double sigma = std::sqrt(20000 * p * (1 - p));
  CHECK(freq["42"] > 20000 * p - 3 * sigma);
  CHECK(freq["42"] < 20000 * p + 3 * sigma);
}

TEST_CASE("reinforce update matches the finite-difference gradient") {
  std::mt19937_64 rng(401);
  std::uniform_int_distribution<int> k_dist(2, 6);
  std::uniform_real_distribution<double> logit_dist(-2.0, 2.0);
  std::uniform_int_distribution<int> n_dist(1, 12);
  std::uniform_int_distribution<int> reward_dist(0, 1);

  for (int iter = 0; iter < 60; ++iter) {
    const int k = k_dist(rng);
    SimTask task;
    task.query_id = "g";
    for (int i = 0; i < k; ++i) {
      task.answer_set.push_back("ans" + std::to_string(i));
      task.initial_logits.push_back(logit_dist(rng));
    }
    task.truth = task.answer_set[0];
    SimulatedPolicy policy;
    policy.register_task(task);

    const int n = n_dist(rng);
    std::uniform_int_distribution<int> pick(0, k - 1);
    std::vector<AnswerReward> samples;
    std::vector<std::pair<std::size_t, double>> oracle_samples;
    bool any_reward = false;
    for (int i = 0; i < n; ++i) {
      const int idx = pick(rng);
      const double reward = reward_dist(rng);
      any_reward |= reward > 0;
      samples.push_back({task.answer_set[static_cast<std::size_t>(idx)], reward});
      oracle_samples.push_back({static_cast<std::size_t>(idx), reward});
    }
    if (!any_reward) {
      // All-zero reward batches must leave θ untouched.
      policy.reinforce_update("g", samples, 0.7);
      CHECK(policy.logits("g") == task.initial_logits);
      continue;
    }

    const double lr = 0.7;
    policy.reinforce_update("g", samples, lr);
    const auto grad = oracle::fd_gradient(task.initial_logits, oracle_samples);
    const auto& updated = policy.logits("g");
    for (int d = 0; d < k; ++d) {
      const double analytic =
          (updated[static_cast<std::size_t>(d)] -
           task.initial_logits[static_cast<std::size_t>(d)]) /
          lr;
      CHECK(std::abs(analytic - grad[static_cast<std::size_t>(d)]) <=
            1e-6 * std::max(1.0, std::abs(grad[static_cast<std::size_t>(d)])));
    }
    // The distribution stays normalized after the update.
    double sum = 0.0;
    for (double p : policy.probabilities("g", false)) sum += p;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("rewarding an answer raises its probability") {
  SimulatedPolicy policy;
  policy.register_task(two_answer_task());
  const double before = policy.probabilities("duel", false)[1];
  policy.reinforce_update("duel", {{"42", 1.0}}, 0.5);
  const double after = policy.probabilities("duel", false)[1];
  CHECK(after > before);

  // The boost never enters the parameters, only sampling.
  SimulatedPolicy boosted;
  boosted.register_task(two_answer_task(5.0));
  boosted.reinforce_update("duel", {{"42", 1.0}}, 0.5);
  CHECK(boosted.logits("duel") == policy.logits("duel"));
}

TEST_CASE("uniform reward over on-policy samples drifts theta only within noise") {
  SimulatedPolicy policy;
  SimTask task;
  task.query_id = "base";
  task.answer_set = {"a", "b", "c", "d"};
  task.truth = "a";
  task.initial_logits = {0.4, -0.3, 0.1, 0.9};
  policy.register_task(task);

  const auto drawn = policy.sample("base", 20000, 1.0, false, 17);
  std::vector<AnswerReward> samples;
  for (const auto& a : drawn) samples.push_back({a, 1.0});
  policy.reinforce_update("base", samples, 1.0);
  // E[onehot − π] = 0 when rewards are uniform, so the shift is sampling
  // noise of order sqrt(p(1−p)/N) ≈ 0.0035.
  for (std::size_t d = 0; d < 4; ++d)
    CHECK(std::abs(policy.logits("base")[d] - task.initial_logits[d]) < 0.02);
}

TEST_CASE("reinforce update rejects unknown rewarded answers") {
  SimulatedPolicy policy;
  policy.register_task(two_answer_task());
  CHECK_THROWS_AS(policy.reinforce_update("duel", {{"999", 1.0}}, 1.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(policy.reinforce_update("missing", {{"42", 1.0}}, 1.0),
                  UnknownQueryError);
  // Unknown answers with zero reward are inert and tolerated (extraction
  // failures produce them).
  policy.reinforce_update("duel", {{"garbage", 0.0}, {"42", 1.0}}, 0.5);
  CHECK(policy.probabilities("duel", false)[1] > 0.269);
}

TEST_CASE("make_duel_tasks shapes and determinism") {
  const auto tasks = make_duel_tasks(50, 2.0, 99);
  REQUIRE(tasks.size() == 50);
  const auto same = make_duel_tasks(50, 2.0, 99);
  std::set<std::string> ids;
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    const auto& task = tasks[t];
    CHECK(task.query_id == same[t].query_id);
    CHECK(task.answer_set == same[t].answer_set);
    CHECK(task.initial_logits == same[t].initial_logits);
    ids.insert(task.query_id);

    REQUIRE(task.answer_set.size() == 4);
    REQUIRE(task.initial_logits.size() == 4);
    CHECK(task.boost_delta == 2.0);
    std::set<std::string> distinct(task.answer_set.begin(), task.answer_set.end());
    CHECK(distinct.size() == 4);
    CHECK(std::count(task.answer_set.begin(), task.answer_set.end(), task.truth) == 1);

    // The truth starts strictly second: one answer above it, two below.
    const auto probs = oracle::softmax_ref(task.initial_logits);
    const std::size_t truth_idx = static_cast<std::size_t>(
        std::find(task.answer_set.begin(), task.answer_set.end(), task.truth) -
        task.answer_set.begin());
    int above = 0, below = 0;
    for (std::size_t i = 0; i < 4; ++i) {
      if (i == truth_idx) continue;
      (probs[i] > probs[truth_idx] ? above : below) += 1;
    }
    CHECK(above == 1);
    CHECK(below == 2);

    // The boost delta of 2 pushes the truth past 0.5.
    SimulatedPolicy policy;
    policy.register_task(task);
    CHECK(policy.probabilities("" + task.query_id, false)[truth_idx] < 0.5);
    CHECK(policy.probabilities(task.query_id, true)[truth_idx] > 0.5);
  }
  CHECK(ids.size() == 50);
  CHECK(make_duel_tasks(5, 2.0, 100)[0].initial_logits !=
        tasks[0].initial_logits);
}

TEST_CASE("convergence experiment separates context from no context") {
  const auto tasks = make_duel_tasks(10, 2.0, 7);
  AdaptationConfig config;
  config.M = 32;
  config.N = 16;
  config.epochs = 4;
  config.steps_per_epoch = 2;
  config.seed = 13;
  const auto seeds = derive_seed_list(13, 2);
  REQUIRE(seeds.size() == 2);
  CHECK(seeds[0] != seeds[1]);

  const auto with = run_convergence_experiment(tasks, config, true, seeds);
  const auto without = run_convergence_experiment(tasks, config, false, seeds);

  CHECK(with.variant == "context");
  CHECK(without.variant == "no_context");
  CHECK(with.total_steps == 8);
  REQUIRE(with.epoch_accuracy.size() == 4);
  REQUIRE(with.step_accuracy.size() == 8);
  CHECK(with.rows.size() == 4 * 10 * 2);

  // Context must win from the first epoch and converge at least as fast.
  CHECK(with.epoch_accuracy[0] > without.epoch_accuracy[0]);
  CHECK(with.epoch_accuracy.back() > without.epoch_accuracy.back());
  CHECK(with.mean_iterations_to_threshold < without.mean_iterations_to_threshold);
  for (double acc : with.epoch_accuracy) {
    CHECK(acc >= 0.0);
    CHECK(acc <= 1.0);
  }

  // Rows carry 1-based epochs and per-task binary accuracy.
  for (const auto& row : with.rows) {
    CHECK(row.epoch >= 1);
    CHECK(row.epoch <= 4);
    CHECK((row.accuracy == 0.0 || row.accuracy == 1.0));
    CHECK(row.variant == "context");
  }
}

TEST_CASE("zero boost makes both variants identical") {
  const auto tasks = make_duel_tasks(6, 0.0, 21);
  AdaptationConfig config;
  config.M = 16;
  config.N = 8;
  config.epochs = 3;
  config.steps_per_epoch = 2;
  const auto seeds = derive_seed_list(5, 2);
  const auto with = run_convergence_experiment(tasks, config, true, seeds);
  const auto without = run_convergence_experiment(tasks, config, false, seeds);
  CHECK(with.epoch_accuracy == without.epoch_accuracy);
  CHECK(with.step_accuracy == without.step_accuracy);
  CHECK(with.mean_iterations_to_threshold == without.mean_iterations_to_threshold);
  REQUIRE(with.rows.size() == without.rows.size());
  for (std::size_t i = 0; i < with.rows.size(); ++i) {
    CHECK(with.rows[i].accuracy == without.rows[i].accuracy);
    CHECK(with.rows[i].task_id == without.rows[i].task_id);
    CHECK(with.rows[i].epoch == without.rows[i].epoch);
    CHECK(with.rows[i].seed == without.rows[i].seed);
  }

  // And the experiment itself is reproducible.
  const auto replay = run_convergence_experiment(tasks, config, true, seeds);
  CHECK(replay.epoch_accuracy == with.epoch_accuracy);
  CHECK(replay.step_accuracy == with.step_accuracy);
}

TEST_CASE("convergence csv and summary render") {
  const auto tasks = make_duel_tasks(3, 2.0, 31);
  AdaptationConfig config;
  config.M = 8;
  config.N = 4;
  config.epochs = 2;
  config.steps_per_epoch = 1;
  const auto seeds = derive_seed_list(2, 1);
  const auto with = run_convergence_experiment(tasks, config, true, seeds);
  const auto without = run_convergence_experiment(tasks, config, false, seeds);

  const auto csv = convergence_csv({with, without});
  CHECK(csv.rfind("epoch,task_id,variant,accuracy,seed\n", 0) == 0);
  const auto lines = std::count(csv.begin(), csv.end(), '\n');
  CHECK(lines == 1 + 2 * 3 * 1 * 2);  // header + epochs*tasks*seeds*variants

  const auto summary = nlohmann::json::parse(convergence_summary_json({with, without}));
  REQUIRE(summary.contains("context"));
  REQUIRE(summary.contains("no_context"));
  CHECK(summary["context"]["epoch_accuracy"].size() == 2);
  CHECK(summary["context"].contains("mean_iterations_to_threshold"));
  CHECK(summary["context"]["total_steps"] == 2);
}
