#include "cgttrl/orchestrator.hpp"

#include <charconv>
#include <chrono>
#include <fstream>
#include <future>
#include <sstream>

#include "cgttrl/rng.hpp"
#include "cgttrl/voting.hpp"
#include "json.hpp"

namespace cgttrl {

using nlohmann::json;

namespace {

constexpr std::uint64_t kSaltSelect = 1;
constexpr std::uint64_t kSaltDownsample = 2;
constexpr std::uint64_t kSaltEval = 3;

// Shortest round-trip decimal form, so metric files are byte-stable.
std::string format_double(double value) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

std::string csv_bool(bool b) { return b ? "1" : "0"; }

ContextSet select_context(const PoolIndex* pool, const QueryItem& query,
                          const AdaptationConfig& config,
                          EmbeddingProvider* provider, std::uint64_t random_seed) {
  if (!pool || config.C == 0) {
    ContextSet empty;
    empty.strategy_tag = "none";
    return empty;
  }
  const std::size_t c = static_cast<std::size_t>(config.C);
  if (config.strategy == "random")
    return select_random(*pool, c, random_seed, query.id);
  if (config.strategy == "hybrid") {
    if (!provider)
      throw ProviderUnavailableError(
          "strategy \"hybrid\" requires an embedding provider");
    return select_hybrid(*provider, *pool, query.query, c, query.id);
  }
  const auto scored = score_all(*pool, query.query, query.id);
  if (config.strategy == "mmr") return select_mmr(*pool, scored, c, config.mmr_lambda);
  return select_top_c(*pool, scored, c);
}

GenerationResult generate_with_retry(ModelBackend& backend,
                                     const GenerationRequest& req) {
  try {
    return backend.generate(req);
  } catch (const BackendError& e) {
    if (!e.retryable()) throw;
    return backend.generate(req);
  }
}

struct StepsLog {
  std::filesystem::path dir;
  std::ofstream file;

  void open_step(int step) {
    if (dir.empty()) return;
    char name[32];
    std::snprintf(name, sizeof(name), "step_%04d.jsonl", step);
    file.close();
    file.open(dir / name);
  }
  void line(const std::string& text) {
    if (file.is_open()) file << text << '\n';
  }
};

std::string event_line(const std::string& query_id, const std::string& event,
                       const std::string& reason) {
  json j;
  j["prompt_id"] = query_id;
  j["event"] = event;
  j["reason"] = reason;
  return j.dump();
}

// Tracks per-run backend usage; totals must equal the sum of per-request
// stats by construction.
void absorb(RunMetrics& metrics, const BackendStats& stats) {
  metrics.generation_requests += 1;
  metrics.total_generated_tokens += stats.generated_tokens;
  metrics.total_tokens += stats.total_tokens;
}

struct PreparedQuery {
  std::size_t index = 0;
  AssembledPrompt prompt;
};

void finalize_accuracy(RunMetrics& metrics) {
  int correct = 0;
  int counted = 0;
  for (const auto& record : metrics.eval) {
    if (!record.correct.has_value()) continue;
    ++counted;
    if (*record.correct) ++correct;
  }
  metrics.accuracy =
      counted > 0 ? static_cast<double>(correct) / static_cast<double>(counted) : 0.0;
}

void finalize_iterations(RunMetrics& metrics) {
  if (metrics.labeled_queries == 0 || metrics.total_steps == 0) {
    metrics.iterations_to_near_top = 0;
    return;
  }
  const double target = 0.95 * metrics.accuracy;
  metrics.iterations_to_near_top = metrics.total_steps + 1;
  for (std::size_t s = 0; s < metrics.step_label_accuracy.size(); ++s) {
    if (metrics.step_label_accuracy[s] >= target) {
      metrics.iterations_to_near_top = static_cast<int>(s) + 1;
      break;
    }
  }
}

void write_artifacts(const RunMetrics& metrics, const AdaptationConfig& config,
                     const std::filesystem::path& out_dir) {
  if (out_dir.empty()) return;
  std::filesystem::create_directories(out_dir);
  {
    std::ofstream f(out_dir / "config.json");
    f << config.to_json() << '\n';
  }
  {
    std::ofstream f(out_dir / "metrics.csv");
    f << metrics.metrics_csv();
  }
  {
    std::ofstream f(out_dir / "summary.json");
    f << metrics.summary_json(config) << '\n';
  }
  {
    json t;
    t["total_seconds"] = metrics.total_seconds;
    t["step_seconds"] = metrics.step_seconds;
    t["mean_step_seconds"] =
        metrics.step_seconds.empty()
            ? 0.0
            : metrics.total_seconds /
                  static_cast<double>(metrics.step_seconds.size());
    std::ofstream f(out_dir / "timings.json");
    f << t.dump(2) << '\n';
  }
}

// Shared by the eval pass of run_adaptation and by the two baseline modes.
// with_context selects per-strategy context for each query; queries whose
// index is in `skip` produce skipped records without touching the backend.
void evaluate_pass(const PoolIndex* pool, const std::vector<QueryItem>& queries,
                   const AdaptationConfig& config, ModelBackend& backend,
                   const RunOptions& options, bool with_context,
                   const std::vector<bool>& skip, RunMetrics& metrics) {
  for (std::size_t qi = 0; qi < queries.size(); ++qi) {
    const QueryItem& query = queries[qi];
    EvalRecord record;
    record.query_id = query.id;
    if (skip[qi]) {
      record.skipped = true;
      metrics.eval.push_back(std::move(record));
      continue;
    }
    try {
      const auto seed = derive_seed(config.seed, {kSaltEval, 0, qi});
      const ContextSet context =
          with_context
              ? select_context(pool, query, config, options.embedding_provider, seed)
              : select_context(nullptr, query, config, nullptr, seed);
      const AssembledPrompt prompt = assemble_prompt(
          context, query.query, options.prompt_template,
          static_cast<std::size_t>(config.max_tokens));
      GenerationRequest req;
      req.prompt = prompt.text;
      req.n = 1;
      req.temperature = config.tau_eval;
      req.max_tokens = config.max_tokens;
      const GenerationResult result = generate_with_retry(backend, req);
      absorb(metrics, result.stats);
      record.answer = extract_answer(result.completions.at(0));
      if (query.truth.has_value())
        record.correct = !record.answer.empty() &&
                         record.answer == normalize_answer(*query.truth);
    } catch (const BackendError&) {
      record.skipped = true;
    } catch (const QueryExceedsBudgetError&) {
      record.skipped = true;
    }
    metrics.eval.push_back(std::move(record));
  }
}

}  // namespace

std::vector<QueryItem> read_queries_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<QueryItem> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    const std::string at = path.string() + ":" + std::to_string(line_no);
    if (j.is_discarded() || !j.is_object())
      throw FormatError(at + ": expected a JSON object");
    if (!j.contains("id") || !j["id"].is_string())
      throw FormatError(at + ": missing string field \"id\"");
    if (!j.contains("query") || !j["query"].is_string())
      throw FormatError(at + ": missing string field \"query\"");
    QueryItem item;
    item.id = j["id"].get<std::string>();
    item.query = j["query"].get<std::string>();
    if (j.contains("truth")) {
      if (!j["truth"].is_string())
        throw FormatError(at + ": field \"truth\" must be a string");
      item.truth = j["truth"].get<std::string>();
    }
    out.push_back(std::move(item));
  }
  return out;
}

std::string RunMetrics::metrics_csv() const {
  std::ostringstream out;
  out << "phase,step,query_id,pseudo_label,vote_fraction,rewards_sum,answer,"
         "correct,skipped\n";
  for (const auto& r : train) {
    out << "train," << r.step << ',' << r.query_id << ',' << r.pseudo_label << ','
        << format_double(r.vote_fraction) << ',' << r.rewards_sum << ",,";
    if (r.label_correct.has_value()) out << csv_bool(*r.label_correct);
    out << ',' << csv_bool(r.skipped) << '\n';
  }
  for (const auto& r : eval) {
    out << "eval,," << r.query_id << ",,,," << r.answer << ',';
    if (r.correct.has_value()) out << csv_bool(*r.correct);
    out << ',' << csv_bool(r.skipped) << '\n';
  }
  return out.str();
}

std::string RunMetrics::summary_json(const AdaptationConfig& config) const {
  json j;
  j["strategy"] = config.strategy;
  j["C"] = config.C;
  j["total_steps"] = total_steps;
  j["num_queries"] = num_queries;
  j["labeled_queries"] = labeled_queries;
  j["skipped_queries"] = skipped_queries;
  j["updates_applied"] = updates_applied;
  j["accuracy"] = accuracy;
  j["step_label_accuracy"] = step_label_accuracy;
  j["iterations_to_near_top"] = iterations_to_near_top;
  j["generation_requests"] = generation_requests;
  j["total_generated_tokens"] = total_generated_tokens;
  j["total_tokens"] = total_tokens;
  j["mean_generated_tokens_per_request"] =
      generation_requests > 0
          ? static_cast<double>(total_generated_tokens) /
                static_cast<double>(generation_requests)
          : 0.0;
  j["mean_total_tokens_per_request"] =
      generation_requests > 0 ? static_cast<double>(total_tokens) /
                                    static_cast<double>(generation_requests)
                              : 0.0;
  return j.dump(2);
}

RunMetrics run_adaptation(const PoolIndex* pool, const std::vector<QueryItem>& queries,
                          const AdaptationConfig& config, ModelBackend& backend,
                          const RunOptions& options) {
  config.validate();
  const auto run_start = std::chrono::steady_clock::now();

  RunMetrics metrics;
  metrics.num_queries = static_cast<int>(queries.size());
  for (const auto& q : queries)
    if (q.truth.has_value()) ++metrics.labeled_queries;
  metrics.total_steps = config.epochs * config.steps_per_epoch;

  StepsLog log;
  if (!options.out_dir.empty()) {
    log.dir = options.out_dir / "steps";
    std::filesystem::create_directories(log.dir);
  }

  std::vector<bool> skipped(queries.size(), false);
  std::int64_t update_counter = 0;

  for (int step = 0; step < metrics.total_steps; ++step) {
    const auto step_start = std::chrono::steady_clock::now();
    log.open_step(step + 1);

    // Phase A: selection + assembly, sequential and deterministic.
    std::vector<PreparedQuery> prepared;
    std::vector<std::string> prompt_text(queries.size());
    for (std::size_t qi = 0; qi < queries.size(); ++qi) {
      if (skipped[qi]) continue;
      try {
        const auto select_seed = derive_seed(
            config.seed, {kSaltSelect, static_cast<std::uint64_t>(step), qi});
        const ContextSet context = select_context(
            pool, queries[qi], config, options.embedding_provider, select_seed);
        AssembledPrompt prompt = assemble_prompt(
            context, queries[qi].query, options.prompt_template,
            static_cast<std::size_t>(config.max_tokens));
        prompt_text[qi] = prompt.text;
        prepared.push_back({qi, std::move(prompt)});
      } catch (const QueryExceedsBudgetError& e) {
        skipped[qi] = true;
        log.line(event_line(queries[qi].id, "query_skipped", e.what()));
      }
    }

    // Phase B: generation, windowed up to max_in_flight concurrent calls.
    std::vector<std::optional<GenerationResult>> results(queries.size());
    const std::size_t window = static_cast<std::size_t>(config.max_in_flight);
    for (std::size_t base = 0; base < prepared.size(); base += window) {
      const std::size_t end = std::min(base + window, prepared.size());
      std::vector<std::future<GenerationResult>> inflight;
      for (std::size_t i = base; i < end; ++i) {
        GenerationRequest req;
        req.prompt = prepared[i].prompt.text;
        req.n = config.M;
        req.temperature = config.tau_train;
        req.max_tokens = config.max_tokens;
        inflight.push_back(std::async(
            window == 1 ? std::launch::deferred : std::launch::async,
            [&backend, req] { return generate_with_retry(backend, req); }));
      }
      for (std::size_t i = base; i < end; ++i) {
        const std::size_t qi = prepared[i].index;
        try {
          GenerationResult r = inflight[i - base].get();
          absorb(metrics, r.stats);
          results[qi] = std::move(r);
        } catch (const BackendError& e) {
          skipped[qi] = true;
          log.line(event_line(queries[qi].id, "query_skipped", e.what()));
        }
      }
    }

    // Phase C: vote → downsample → reward → update, strictly serialized in
    // dataset order.
    int labeled_correct = 0;
    for (std::size_t qi = 0; qi < queries.size(); ++qi) {
      TrainRecord record;
      record.step = step + 1;
      record.query_id = queries[qi].id;
      if (!results[qi].has_value()) {
        record.skipped = true;
        if (queries[qi].truth.has_value()) record.label_correct = false;
        metrics.train.push_back(std::move(record));
        continue;
      }
      RolloutBatch batch = RolloutBatch::from_outputs(
          queries[qi].id, std::move(results[qi]->completions), config.tau_train);

      PseudoLabel label;
      try {
        label = majority_vote(batch.answers);
      } catch (const AllExtractionsFailedError& e) {
        record.skipped = true;
        if (queries[qi].truth.has_value()) record.label_correct = false;
        log.line(event_line(queries[qi].id, "vote_failed", e.what()));
        metrics.train.push_back(std::move(record));
        continue;
      }
      record.pseudo_label = label.value;
      record.vote_fraction = label.vote_fraction;
      if (queries[qi].truth.has_value()) {
        record.label_correct = label.value == normalize_answer(*queries[qi].truth);
        if (*record.label_correct) ++labeled_correct;
      }

      const auto down_seed = derive_seed(
          config.seed, {kSaltDownsample, static_cast<std::uint64_t>(step), qi});
      const auto picks =
          downsample(batch, static_cast<std::size_t>(config.N), down_seed);
      const auto rewarded = compute_rewards(batch, picks, label);
      for (const auto& r : rewarded) record.rewards_sum += r.reward;
      log.line(batch_log_line(batch, label, picks, rewarded));

      // One update per query per step; retry once on transport faults, give
      // up on this step's update otherwise (the trainer is non-idempotent).
      UpdateBatch update;
      update.prompt = prompt_text[qi];
      update.samples = rewarded;
      update.step_id = update_counter++;
      try {
        try {
          backend.apply_update(update);
        } catch (const BackendError& e) {
          if (!e.retryable()) throw;
          backend.apply_update(update);
        }
        record.update_applied = true;
        ++metrics.updates_applied;
      } catch (const BackendError& e) {
        log.line(event_line(queries[qi].id, "update_skipped", e.what()));
      }
      metrics.train.push_back(std::move(record));
    }

    metrics.step_label_accuracy.push_back(
        metrics.labeled_queries > 0
            ? static_cast<double>(labeled_correct) /
                  static_cast<double>(metrics.labeled_queries)
            : 0.0);
    metrics.step_seconds.push_back(
        std::chrono::duration<double>(std::chrono::steady_clock::now() - step_start)
            .count());
  }

  evaluate_pass(pool, queries, config, backend, options, /*with_context=*/true,
                skipped, metrics);
  for (std::size_t qi = 0; qi < queries.size(); ++qi)
    if (skipped[qi]) ++metrics.skipped_queries;

  finalize_accuracy(metrics);
  finalize_iterations(metrics);
  metrics.total_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - run_start)
          .count();
  write_artifacts(metrics, config, options.out_dir);
  return metrics;
}

RunMetrics evaluate_zero_shot(const std::vector<QueryItem>& queries,
                              const AdaptationConfig& config, ModelBackend& backend,
                              const RunOptions& options) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  RunMetrics metrics;
  metrics.num_queries = static_cast<int>(queries.size());
  for (const auto& q : queries)
    if (q.truth.has_value()) ++metrics.labeled_queries;
  evaluate_pass(nullptr, queries, config, backend, options, /*with_context=*/false,
                std::vector<bool>(queries.size(), false), metrics);
  for (const auto& record : metrics.eval)
    if (record.skipped) ++metrics.skipped_queries;
  finalize_accuracy(metrics);
  metrics.total_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_artifacts(metrics, config, options.out_dir);
  return metrics;
}

RunMetrics evaluate_icl(const PoolIndex* pool, const std::vector<QueryItem>& queries,
                        const AdaptationConfig& config, ModelBackend& backend,
                        const RunOptions& options) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  RunMetrics metrics;
  metrics.num_queries = static_cast<int>(queries.size());
  for (const auto& q : queries)
    if (q.truth.has_value()) ++metrics.labeled_queries;
  evaluate_pass(pool, queries, config, backend, options, /*with_context=*/true,
                std::vector<bool>(queries.size(), false), metrics);
  for (const auto& record : metrics.eval)
    if (record.skipped) ++metrics.skipped_queries;
  finalize_accuracy(metrics);
  metrics.total_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_artifacts(metrics, config, options.out_dir);
  return metrics;
}

}  // namespace cgttrl
