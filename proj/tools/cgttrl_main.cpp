#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "cgttrl/backend.hpp"
#include "cgttrl/config.hpp"
#include "cgttrl/context_pool.hpp"
#include "cgttrl/orchestrator.hpp"
#include "cgttrl/policy_sim.hpp"
#include "cgttrl/prompting.hpp"
#include "cgttrl/selection.hpp"
#include "json.hpp"

namespace {

using namespace cgttrl;
using nlohmann::json;

struct GlobalOpts {
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  bool verbose = false;
};

// --query accepts either literal text or a path to a file holding the text.
std::string read_query_arg(const std::string& value) {
  if (std::filesystem::exists(value) &&
      std::filesystem::is_regular_file(value)) {
    std::ifstream in(value);
    if (!in) throw IoError("cannot open " + value);
    std::stringstream buf;
    buf << in.rdbuf();
    std::string text = buf.str();
    while (!text.empty() && (text.back() == '\n' || text.back() == '\r'))
      text.pop_back();
    return text;
  }
  return value;
}

AdaptationConfig make_config(const std::string& config_path,
                             const GlobalOpts& global) {
  AdaptationConfig cfg =
      config_path.empty() ? AdaptationConfig{} : load_config(config_path);
  if (global.seed) cfg.seed = *global.seed;
  return cfg;
}

void apply_override(int count, int value, int* field) {
  if (count > 0) *field = value;
}

std::unique_ptr<HttpBackend> make_http_backend(const std::string& url,
                                               const GlobalOpts& global,
                                               std::ofstream& http_log) {
  auto backend = std::make_unique<HttpBackend>(url);
  if (global.verbose && !global.out_dir.empty()) {
    std::filesystem::create_directories(global.out_dir);
    http_log.open(std::filesystem::path(global.out_dir) / "http_log.jsonl",
                  std::ios::app);
    backend->set_traffic_sink(
        [&http_log](const std::string& line) { http_log << line << '\n'; });
  }
  return backend;
}

json context_set_json(const ContextSet& set) {
  json out;
  out["strategy"] = set.strategy_tag;
  json selected = json::array();
  for (std::size_t i = 0; i < set.members.size(); ++i) {
    json item;
    item["id"] = set.members[i].id;
    item["score"] = set.scores[i];
    selected.push_back(std::move(item));
  }
  out["selected"] = std::move(selected);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CG-TTRL: context-guided test-time reinforcement learning"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::simple);

  GlobalOpts global;
  app.add_option("--seed", global.seed, "Override the run seed");
  app.add_option("--out", global.out_dir, "Directory for run artifacts");
  app.add_flag("--verbose", global.verbose, "Log backend traffic");

  // pool build <jsonl> -o <index>
  auto* pool_cmd = app.add_subcommand("pool", "Context pool maintenance");
  pool_cmd->require_subcommand(1);
  auto* pool_build = pool_cmd->add_subcommand("build", "Build a pool index");
  std::string pool_input;
  std::string pool_output;
  pool_build->add_option("jsonl", pool_input, "Pool JSONL of worked examples")
      ->required();
  pool_build->add_option("-o,--output", pool_output, "Index output path")
      ->required();

  // select
  auto* select_cmd = app.add_subcommand("select", "Rank context examples");
  std::string sel_index, sel_query, sel_strategy = "tfidf", sel_exclude;
  int sel_c = 3;
  double sel_lambda = 0.5;
  select_cmd->add_option("--index", sel_index, "Pool index path")->required();
  select_cmd->add_option("--query", sel_query, "Query text or file")->required();
  select_cmd->add_option("--strategy", sel_strategy, "tfidf|random|mmr|hybrid");
  select_cmd->add_option("-C,--count", sel_c, "Context examples to select");
  select_cmd->add_option("--exclude-id", sel_exclude, "Pool id to exclude");
  select_cmd->add_option("--mmr-lambda", sel_lambda, "MMR trade-off in [0,1]");

  // shared run/eval options
  std::string run_index, run_queries, run_config, run_backend, run_template;
  int ov_c = 0, ov_m = 0, ov_n = 0, ov_epochs = 0, ov_steps = 0, ov_inflight = 0;
  std::string ov_strategy;
  double ov_lambda = 0.5;

  auto add_config_overrides = [&](CLI::App* cmd) {
    cmd->add_option("-C", ov_c, "Override C");
    cmd->add_option("-M", ov_m, "Override M");
    cmd->add_option("-N", ov_n, "Override N");
    cmd->add_option("--epochs", ov_epochs, "Override epochs");
    cmd->add_option("--steps-per-epoch", ov_steps, "Override steps_per_epoch");
    cmd->add_option("--strategy", ov_strategy, "Override strategy");
    cmd->add_option("--mmr-lambda", ov_lambda, "Override mmr_lambda");
    cmd->add_option("--max-in-flight", ov_inflight, "Override max_in_flight");
    cmd->add_option("--template", run_template, "Prompt template file");
  };

  auto* run_cmd = app.add_subcommand("run", "Run CG-TTRL adaptation");
  run_cmd->add_option("--index", run_index, "Pool index path (optional when C=0)");
  run_cmd->add_option("--queries", run_queries, "Query JSONL")->required();
  run_cmd->add_option("--config", run_config, "Config JSON file");
  run_cmd->add_option("--backend", run_backend, "Backend base URL")->required();
  add_config_overrides(run_cmd);

  auto* eval_cmd = app.add_subcommand("eval", "Evaluate without adaptation");
  std::string eval_mode;
  eval_cmd->add_option("--mode", eval_mode, "zeroshot|icl")->required();
  eval_cmd->add_option("--index", run_index, "Pool index path (icl mode)");
  eval_cmd->add_option("--queries", run_queries, "Query JSONL")->required();
  eval_cmd->add_option("--config", run_config, "Config JSON file");
  eval_cmd->add_option("--backend", run_backend, "Backend base URL")->required();
  add_config_overrides(eval_cmd);

  auto* sim_cmd = app.add_subcommand("simulate", "Convergence simulation");
  int sim_tasks = 50, sim_seeds = 5;
  double sim_boost = 2.0, sim_lr = 1.0;
  sim_cmd->add_option("--tasks", sim_tasks, "Number of synthetic tasks");
  sim_cmd->add_option("--boost", sim_boost, "Context logit boost delta");
  sim_cmd->add_option("--seeds", sim_seeds, "Number of evaluation seeds");
  sim_cmd->add_option("--config", run_config, "Config JSON file");
  sim_cmd->add_option("--lr", sim_lr, "REINFORCE learning rate");

  CLI11_PARSE(app, argc, argv);

  try {
    if (pool_build->parsed()) {
      const auto examples = read_pool_jsonl(pool_input);
      const PoolIndex index = PoolIndex::build(examples);
      index.persist(pool_output);
      json out;
      out["examples"] = index.size();
      out["vocab"] = index.stats().vocab_size();
      out["index"] = pool_output;
      out["features"] = PoolIndex::sidecar_path(pool_output).string();
      std::cout << out.dump(2) << '\n';
      return 0;
    }

    if (select_cmd->parsed()) {
      const PoolIndex index = PoolIndex::load(sel_index);
      const std::string query = read_query_arg(sel_query);
      const std::optional<std::string_view> exclude =
          sel_exclude.empty() ? std::nullopt
                              : std::optional<std::string_view>(sel_exclude);
      const std::uint64_t seed = global.seed.value_or(0);
      ContextSet set;
      if (sel_strategy == "tfidf") {
        set = select_top_c(index, score_all(index, query, exclude),
                           static_cast<std::size_t>(sel_c));
      } else if (sel_strategy == "random") {
        set = select_random(index, static_cast<std::size_t>(sel_c), seed, exclude);
      } else if (sel_strategy == "mmr") {
        set = select_mmr(index, score_all(index, query, exclude),
                         static_cast<std::size_t>(sel_c), sel_lambda);
      } else if (sel_strategy == "hybrid") {
        TfidfDensifyProvider provider(index);
        set = select_hybrid(provider, index, query,
                            static_cast<std::size_t>(sel_c), exclude);
      } else {
        std::cerr << "error: unknown strategy \"" << sel_strategy << "\"\n";
        return 2;
      }
      std::cout << context_set_json(set).dump(2) << '\n';
      return 0;
    }

    if (run_cmd->parsed() || eval_cmd->parsed()) {
      AdaptationConfig cfg = make_config(run_config, global);
      apply_override(static_cast<int>(run_cmd->count("-C") + eval_cmd->count("-C")),
                     ov_c, &cfg.C);
      apply_override(static_cast<int>(run_cmd->count("-M") + eval_cmd->count("-M")),
                     ov_m, &cfg.M);
      apply_override(static_cast<int>(run_cmd->count("-N") + eval_cmd->count("-N")),
                     ov_n, &cfg.N);
      apply_override(
          static_cast<int>(run_cmd->count("--epochs") + eval_cmd->count("--epochs")),
          ov_epochs, &cfg.epochs);
      apply_override(static_cast<int>(run_cmd->count("--steps-per-epoch") +
                                      eval_cmd->count("--steps-per-epoch")),
                     ov_steps, &cfg.steps_per_epoch);
      apply_override(static_cast<int>(run_cmd->count("--max-in-flight") +
                                      eval_cmd->count("--max-in-flight")),
                     ov_inflight, &cfg.max_in_flight);
      if (run_cmd->count("--strategy") || eval_cmd->count("--strategy"))
        cfg.strategy = ov_strategy;
      if (run_cmd->count("--mmr-lambda") || eval_cmd->count("--mmr-lambda"))
        cfg.mmr_lambda = ov_lambda;
      cfg.validate();

      std::optional<PoolIndex> index;
      if (!run_index.empty()) index = PoolIndex::load(run_index);
      const bool needs_pool =
          cfg.C > 0 && (run_cmd->parsed() || eval_mode == "icl");
      if (needs_pool && !index) {
        std::cerr << "error: --index is required when C > 0\n";
        return 2;
      }

      const auto queries = read_queries_jsonl(run_queries);
      std::ofstream http_log;
      auto backend = make_http_backend(run_backend, global, http_log);

      RunOptions options;
      options.out_dir = global.out_dir;
      options.verbose = global.verbose;
      if (!run_template.empty())
        options.prompt_template = PromptTemplate::from_file(run_template);
      std::optional<TfidfDensifyProvider> provider;
      if (cfg.strategy == "hybrid" && index) {
        provider.emplace(*index);
        options.embedding_provider = &*provider;
      }

      RunMetrics metrics;
      if (run_cmd->parsed()) {
        metrics = run_adaptation(index ? &*index : nullptr, queries, cfg,
                                 *backend, options);
      } else if (eval_mode == "zeroshot") {
        metrics = evaluate_zero_shot(queries, cfg, *backend, options);
      } else if (eval_mode == "icl") {
        metrics = evaluate_icl(index ? &*index : nullptr, queries, cfg, *backend,
                               options);
      } else {
        std::cerr << "error: --mode must be zeroshot or icl\n";
        return 2;
      }
      std::cout << metrics.summary_json(cfg) << '\n';
      return 0;
    }

    if (sim_cmd->parsed()) {
      AdaptationConfig cfg = make_config(run_config, global);
      if (run_config.empty()) {
        // Simulation default: short horizon, the convergence story is
        // visible within a few epochs.
        cfg.epochs = 5;
        cfg.steps_per_epoch = 3;
        if (global.seed) cfg.seed = *global.seed;
      }
      cfg.validate();
      if (sim_tasks < 1 || sim_seeds < 1) {
        std::cerr << "error: --tasks and --seeds must be >= 1\n";
        return 2;
      }
      const auto tasks = make_duel_tasks(static_cast<std::size_t>(sim_tasks),
                                         sim_boost, cfg.seed);
      const auto seeds =
          derive_seed_list(cfg.seed, static_cast<std::size_t>(sim_seeds));
      const auto with = run_convergence_experiment(tasks, cfg, true, seeds, sim_lr);
      const auto without =
          run_convergence_experiment(tasks, cfg, false, seeds, sim_lr);
      const std::vector<ConvergenceReport> reports{with, without};
      if (!global.out_dir.empty()) {
        std::filesystem::create_directories(global.out_dir);
        const auto dir = std::filesystem::path(global.out_dir);
        std::ofstream csv(dir / "convergence.csv");
        csv << convergence_csv(reports);
        std::ofstream summary(dir / "convergence_summary.json");
        summary << convergence_summary_json(reports) << '\n';
      }
      std::cout << convergence_summary_json(reports) << '\n';
      return 0;
    }

    std::cerr << "error: no subcommand\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
