#include "latinv/config.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "latinv/error.hpp"

namespace latinv {

using nlohmann::json;

namespace {

void reject_unknown(const json& j, std::initializer_list<const char*> known, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  std::set<std::string> k(known.begin(), known.end());
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!k.count(it.key())) throw ConfigError("unknown key '" + it.key() + "' in " + where);
  }
}

template <typename T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (auto it = j.find(key); it != j.end()) {
    try {
      out = it->get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(where + "." + key + ": " + e.what());
    }
  }
}

std::string kind_name(OracleSpec::Kind k) { return k == OracleSpec::Kind::synthetic ? "synthetic" : "external"; }

}  // namespace

void ExperimentConfig::validate() const {
  env.validate();
  agent.validate();
  if (warmup_steps > 0 && agent.replay_capacity < 1) throw ConfigError("replay capacity must be positive");
  for (auto c : classes) {
    if (c >= env.num_classes) throw ConfigError("class " + std::to_string(c) + " outside [0, K)");
  }
  if (eval.neighbor_k < 1) throw ConfigError("evaluation.neighbor_k must be >= 1");
  for (Real a : sweep.alphas) {
    if (!(a >= 0 && a <= 1)) throw ConfigError("sweep alpha " + std::to_string(a) + " outside [0, 1]");
  }
  if (!std::is_sorted(sweep.episode_checkpoints.begin(), sweep.episode_checkpoints.end())) {
    throw ConfigError("sweep.episode_checkpoints must be ascending");
  }
  if (jobs < 1) throw ConfigError("jobs must be >= 1");
  if (oracle.kind == OracleSpec::Kind::external && oracle.command.empty()) {
    throw ConfigError("external oracle needs a command");
  }
}

std::vector<std::size_t> ExperimentConfig::target_classes() const {
  if (!classes.empty()) return classes;
  std::vector<std::size_t> all(env.num_classes);
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return all;
}

SyntheticParams ExperimentConfig::world_params() const {
  SyntheticParams p = oracle.synthetic;
  p.latent_dim = env.latent_dim;
  p.num_classes = env.num_classes;
  p.seed = seeds.world;
  return p;
}

void to_json(json& j, const EnvConfig& c) {
  j = json{{"latent_dim", c.latent_dim},
           {"num_classes", c.num_classes},
           {"alpha", c.alpha},
           {"reward_weights", {c.weights.state, c.weights.action, c.weights.margin}},
           {"epsilon", c.epsilon},
           {"max_step", c.max_step},
           {"action_scale", c.action_scale},
           {"dedup_queries", c.dedup_queries}};
}

void from_json(const json& j, EnvConfig& c) {
  const std::string w = "env";
  reject_unknown(j,
                 {"latent_dim", "num_classes", "alpha", "reward_weights", "epsilon", "max_step", "action_scale",
                  "dedup_queries", "target_class"},
                 w);
  read(j, "latent_dim", c.latent_dim, w);
  read(j, "num_classes", c.num_classes, w);
  read(j, "target_class", c.target_class, w);
  read(j, "alpha", c.alpha, w);
  if (auto it = j.find("reward_weights"); it != j.end()) {
    if (!it->is_array() || it->size() != 3) throw ConfigError("env.reward_weights must hold three numbers");
    c.weights = RewardWeights{(*it)[0].get<Real>(), (*it)[1].get<Real>(), (*it)[2].get<Real>()};
  }
  read(j, "epsilon", c.epsilon, w);
  read(j, "max_step", c.max_step, w);
  read(j, "action_scale", c.action_scale, w);
  read(j, "dedup_queries", c.dedup_queries, w);
}

void to_json(json& j, const AgentHyperparams& h) {
  j = json{{"algorithm", to_string(h.algorithm)},
           {"gamma", h.gamma},
           {"tau", h.tau},
           {"learning_rate", h.learning_rate},
           {"batch_size", h.batch_size},
           {"replay_capacity", h.replay_capacity},
           {"hidden_layers", h.hidden_layers},
           {"activation", to_string(h.activation)},
           {"sac",
            {{"auto_temperature", h.sac.auto_temperature},
             {"initial_temperature", h.sac.initial_temperature},
             {"target_entropy", h.sac.target_entropy ? json(*h.sac.target_entropy) : json(nullptr)},
             {"log_std_min", h.sac.log_std.min},
             {"log_std_max", h.sac.log_std.max}}},
           {"td3",
            {{"policy_delay", h.td3.policy_delay},
             {"target_noise", h.td3.target_noise},
             {"noise_clip", h.td3.noise_clip},
             {"exploration_noise", h.td3.exploration_noise}}},
           {"ddpg", {{"exploration_noise", h.ddpg.exploration_noise}}}};
}

void from_json(const json& j, AgentHyperparams& h) {
  const std::string w = "agent";
  reject_unknown(j,
                 {"algorithm", "gamma", "tau", "learning_rate", "batch_size", "replay_capacity", "hidden_layers",
                  "activation", "sac", "td3", "ddpg", "action_scale"},
                 w);
  if (auto it = j.find("algorithm"); it != j.end()) h.algorithm = algorithm_from_string(it->get<std::string>());
  read(j, "gamma", h.gamma, w);
  read(j, "tau", h.tau, w);
  read(j, "learning_rate", h.learning_rate, w);
  read(j, "batch_size", h.batch_size, w);
  read(j, "replay_capacity", h.replay_capacity, w);
  read(j, "hidden_layers", h.hidden_layers, w);
  read(j, "action_scale", h.action_scale, w);
  if (auto it = j.find("activation"); it != j.end()) h.activation = activation_from_string(it->get<std::string>());
  if (auto it = j.find("sac"); it != j.end()) {
    const json& s = *it;
    reject_unknown(s, {"auto_temperature", "initial_temperature", "target_entropy", "log_std_min", "log_std_max"},
                   "agent.sac");
    read(s, "auto_temperature", h.sac.auto_temperature, "agent.sac");
    read(s, "initial_temperature", h.sac.initial_temperature, "agent.sac");
    if (auto te = s.find("target_entropy"); te != s.end()) {
      if (te->is_null()) {
        h.sac.target_entropy.reset();
      } else {
        h.sac.target_entropy = te->get<Real>();
      }
    }
    read(s, "log_std_min", h.sac.log_std.min, "agent.sac");
    read(s, "log_std_max", h.sac.log_std.max, "agent.sac");
  }
  if (auto it = j.find("td3"); it != j.end()) {
    reject_unknown(*it, {"policy_delay", "target_noise", "noise_clip", "exploration_noise"}, "agent.td3");
    read(*it, "policy_delay", h.td3.policy_delay, "agent.td3");
    read(*it, "target_noise", h.td3.target_noise, "agent.td3");
    read(*it, "noise_clip", h.td3.noise_clip, "agent.td3");
    read(*it, "exploration_noise", h.td3.exploration_noise, "agent.td3");
  }
  if (auto it = j.find("ddpg"); it != j.end()) {
    reject_unknown(*it, {"exploration_noise"}, "agent.ddpg");
    read(*it, "exploration_noise", h.ddpg.exploration_noise, "agent.ddpg");
  }
}

void to_json(json& j, const SyntheticParams& p) {
  j = json{{"seed", p.seed},
           {"latent_dim", p.latent_dim},
           {"feature_dim", p.feature_dim},
           {"num_classes", p.num_classes},
           {"separation", p.separation},
           {"temperature", p.temperature},
           {"perturbation", p.perturbation}};
}

void to_json(json& j, const ExperimentConfig& c) {
  json oracle{{"kind", kind_name(c.oracle.kind)}};
  if (c.oracle.kind == OracleSpec::Kind::synthetic) {
    oracle["feature_dim"] = c.oracle.synthetic.feature_dim;
    oracle["separation"] = c.oracle.synthetic.separation;
    oracle["temperature"] = c.oracle.synthetic.temperature;
    oracle["perturbation"] = c.oracle.synthetic.perturbation;
  } else {
    oracle["command"] = c.oracle.command;
    oracle["eval_command"] = c.oracle.eval_command;
    oracle["private_features"] = c.oracle.private_features;
  }
  json agent = c.agent;
  agent.erase("action_scale");
  j = json{{"version", kConfigVersion},
           {"env", c.env},
           {"agent", agent},
           {"oracle", oracle},
           {"classes", c.classes},
           {"max_episodes", c.max_episodes},
           {"warmup_steps", c.warmup_steps},
           {"seeds", {{"world", c.seeds.world}, {"agent", c.seeds.agent}, {"episodes", c.seeds.episodes}}},
           {"evaluation",
            {{"dc_samples", c.eval.dc_samples},
             {"neighbor_k", c.eval.neighbor_k},
             {"private_samples", c.eval.private_samples}}},
           {"sweep",
            {{"alphas", c.sweep.alphas},
             {"samples_per_class", c.sweep.samples_per_class},
             {"episode_checkpoints", c.sweep.episode_checkpoints}}},
           {"checkpoint_every", c.checkpoint_every},
           {"output_dir", c.output_dir},
           {"jobs", c.jobs}};
  j["env"].erase("target_class");
}

void from_json(const json& j, ExperimentConfig& c) {
  const std::string w = "config";
  reject_unknown(j,
                 {"version", "env", "agent", "oracle", "classes", "max_episodes", "warmup_steps", "seeds",
                  "evaluation", "sweep", "checkpoint_every", "output_dir", "jobs"},
                 w);
  if (auto v = j.find("version"); v != j.end() && v->get<int>() != kConfigVersion) {
    throw ConfigError("config version " + std::to_string(v->get<int>()) + " is not supported (expected " +
                      std::to_string(kConfigVersion) + ")");
  }
  if (auto it = j.find("env"); it != j.end()) from_json(*it, c.env);
  if (auto it = j.find("agent"); it != j.end()) from_json(*it, c.agent);
  c.agent.action_scale = c.env.action_scale;
  if (auto it = j.find("oracle"); it != j.end()) {
    const json& o = *it;
    reject_unknown(o,
                   {"kind", "feature_dim", "separation", "temperature", "perturbation", "command", "eval_command",
                    "private_features"},
                   "oracle");
    std::string kind = "synthetic";
    read(o, "kind", kind, "oracle");
    if (kind == "synthetic") {
      c.oracle.kind = OracleSpec::Kind::synthetic;
    } else if (kind == "external") {
      c.oracle.kind = OracleSpec::Kind::external;
    } else {
      throw ConfigError("oracle.kind must be 'synthetic' or 'external'");
    }
    read(o, "feature_dim", c.oracle.synthetic.feature_dim, "oracle");
    read(o, "separation", c.oracle.synthetic.separation, "oracle");
    read(o, "temperature", c.oracle.synthetic.temperature, "oracle");
    read(o, "perturbation", c.oracle.synthetic.perturbation, "oracle");
    read(o, "command", c.oracle.command, "oracle");
    read(o, "eval_command", c.oracle.eval_command, "oracle");
    read(o, "private_features", c.oracle.private_features, "oracle");
  }
  read(j, "classes", c.classes, w);
  read(j, "max_episodes", c.max_episodes, w);
  read(j, "warmup_steps", c.warmup_steps, w);
  if (auto it = j.find("seeds"); it != j.end()) {
    reject_unknown(*it, {"world", "agent", "episodes"}, "seeds");
    read(*it, "world", c.seeds.world, "seeds");
    read(*it, "agent", c.seeds.agent, "seeds");
    read(*it, "episodes", c.seeds.episodes, "seeds");
  }
  if (auto it = j.find("evaluation"); it != j.end()) {
    reject_unknown(*it, {"dc_samples", "neighbor_k", "private_samples"}, "evaluation");
    read(*it, "dc_samples", c.eval.dc_samples, "evaluation");
    read(*it, "neighbor_k", c.eval.neighbor_k, "evaluation");
    read(*it, "private_samples", c.eval.private_samples, "evaluation");
  }
  if (auto it = j.find("sweep"); it != j.end()) {
    reject_unknown(*it, {"alphas", "samples_per_class", "episode_checkpoints"}, "sweep");
    read(*it, "alphas", c.sweep.alphas, "sweep");
    read(*it, "samples_per_class", c.sweep.samples_per_class, "sweep");
    read(*it, "episode_checkpoints", c.sweep.episode_checkpoints, "sweep");
  }
  read(j, "checkpoint_every", c.checkpoint_every, w);
  read(j, "output_dir", c.output_dir, w);
  read(j, "jobs", c.jobs, w);
}

ExperimentConfig parse_config(const std::string& text) {
  json j = json::parse(text, nullptr, false, /*ignore_comments=*/true);
  if (j.is_discarded()) throw ConfigError("config is not valid JSON");
  ExperimentConfig c;
  try {
    from_json(j, c);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

void apply_oracle_flag(ExperimentConfig& c, const std::string& flag) {
  if (flag.rfind("cmd:", 0) == 0) {
    c.oracle.kind = OracleSpec::Kind::external;
    c.oracle.command = flag.substr(4);
    if (c.oracle.command.empty()) throw ConfigError("--oracle cmd: needs a command");
    return;
  }
  if (flag.rfind("synth:", 0) == 0 || flag == "synth") {
    c.oracle.kind = OracleSpec::Kind::synthetic;
    std::stringstream ss(flag.size() > 6 ? flag.substr(6) : std::string());
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (item.empty()) continue;
      const auto eq = item.find('=');
      if (eq == std::string::npos) throw ConfigError("--oracle synth: expected key=value, got '" + item + "'");
      const std::string key = item.substr(0, eq);
      const std::string val = item.substr(eq + 1);
      try {
        if (key == "seed") {
          c.seeds.world = std::stoull(val);
        } else if (key == "d" || key == "feature_dim") {
          c.oracle.synthetic.feature_dim = std::stoul(val);
        } else if (key == "k" || key == "latent_dim") {
          c.env.latent_dim = std::stoul(val);
        } else if (key == "K" || key == "num_classes") {
          c.env.num_classes = std::stoul(val);
        } else if (key == "separation") {
          c.oracle.synthetic.separation = std::stod(val);
        } else if (key == "temperature") {
          c.oracle.synthetic.temperature = std::stod(val);
        } else if (key == "perturbation") {
          c.oracle.synthetic.perturbation = std::stod(val);
        } else {
          throw ConfigError("--oracle synth: unknown key '" + key + "'");
        }
      } catch (const std::logic_error&) {
        throw ConfigError("--oracle synth: bad value for '" + key + "': '" + val + "'");
      }
    }
    return;
  }
  throw ConfigError("--oracle must start with 'synth:' or 'cmd:'");
}

void apply_override(ExperimentConfig& c, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("override '" + assignment + "' is not key=value");
  const std::string path = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json doc = c;
  json value = json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;  // bare strings
  json::json_pointer ptr("/" + [&] {
    std::string p = path;
    std::replace(p.begin(), p.end(), '.', '/');
    return p;
  }());
  if (!doc.contains(ptr)) throw ConfigError("override: unknown key '" + path + "'");
  doc[ptr] = value;
  ExperimentConfig updated;
  try {
    from_json(doc, updated);
  } catch (const json::exception& e) {
    throw ConfigError("override '" + assignment + "': " + e.what());
  }
  updated.validate();
  c = updated;
}

}  // namespace latinv
