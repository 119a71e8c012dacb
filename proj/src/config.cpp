#include "cgttrl/config.hpp"

#include <fstream>
#include <sstream>

#include "cgttrl/context_pool.hpp"
#include "json.hpp"

namespace cgttrl {

using nlohmann::json;

void AdaptationConfig::validate() const {
  if (M < 1) throw ConfigError("M must be >= 1");
  if (N < 1 || N >= M) throw ConfigError("N must satisfy 1 <= N < M");
  if (C < 0) throw ConfigError("C must be >= 0");
  if (tau_train < 0.0 || tau_eval < 0.0)
    throw ConfigError("temperatures must be >= 0");
  if (max_tokens < 1) throw ConfigError("max_tokens must be >= 1");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (steps_per_epoch < 1) throw ConfigError("steps_per_epoch must be >= 1");
  if (strategy != "tfidf" && strategy != "random" && strategy != "mmr" &&
      strategy != "hybrid")
    throw ConfigError("unknown strategy \"" + strategy +
                      "\" (expected tfidf|random|mmr|hybrid)");
  if (mmr_lambda < 0.0 || mmr_lambda > 1.0)
    throw ConfigError("mmr_lambda must be in [0,1]");
  if (max_in_flight < 1) throw ConfigError("max_in_flight must be >= 1");
}

std::string AdaptationConfig::to_json() const {
  json j;
  j["C"] = C;
  j["M"] = M;
  j["N"] = N;
  j["tau_train"] = tau_train;
  j["tau_eval"] = tau_eval;
  j["max_tokens"] = max_tokens;
  j["epochs"] = epochs;
  j["steps_per_epoch"] = steps_per_epoch;
  j["seed"] = seed;
  j["strategy"] = strategy;
  j["mmr_lambda"] = mmr_lambda;
  j["max_in_flight"] = max_in_flight;
  return j.dump(2);
}

AdaptationConfig config_profile(const std::string& name) {
  if (name == "math500") return AdaptationConfig{};
  if (name == "amc") {
    AdaptationConfig cfg;
    cfg.C = 5;
    cfg.M = 64;
    cfg.epochs = 50;
    cfg.steps_per_epoch = 2;
    return cfg;
  }
  throw ConfigError("unknown config profile \"" + name +
                    "\" (expected math500|amc)");
}

AdaptationConfig parse_config_json(const std::string& text) {
  json j = json::parse(text, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded() || !j.is_object())
    throw ConfigError("config is not a JSON object");

  AdaptationConfig cfg;
  std::string unknown;
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "C")
        cfg.C = value.get<int>();
      else if (key == "M")
        cfg.M = value.get<int>();
      else if (key == "N")
        cfg.N = value.get<int>();
      else if (key == "tau_train")
        cfg.tau_train = value.get<double>();
      else if (key == "tau_eval")
        cfg.tau_eval = value.get<double>();
      else if (key == "max_tokens")
        cfg.max_tokens = value.get<int>();
      else if (key == "epochs")
        cfg.epochs = value.get<int>();
      else if (key == "steps_per_epoch")
        cfg.steps_per_epoch = value.get<int>();
      else if (key == "seed")
        cfg.seed = value.get<std::uint64_t>();
      else if (key == "strategy")
        cfg.strategy = value.get<std::string>();
      else if (key == "mmr_lambda")
        cfg.mmr_lambda = value.get<double>();
      else if (key == "max_in_flight")
        cfg.max_in_flight = value.get<int>();
      else
        unknown += unknown.empty() ? key : (", " + key);
    } catch (const json::exception&) {
      throw ConfigError("config field \"" + key + "\" has the wrong type");
    }
  }
  if (!unknown.empty())
    throw ConfigError("unknown config field(s): " + unknown);
  cfg.validate();
  return cfg;
}

AdaptationConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return parse_config_json(buf.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

}  // namespace cgttrl
