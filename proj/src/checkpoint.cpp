#include "latinv/checkpoint.hpp"

#include <fstream>
#include <iterator>

#include "latinv/config.hpp"
#include "latinv/error.hpp"

namespace latinv {

using nlohmann::json;

json matrix_to_json(const Matrix& m) { return json{{"rows", m.rows}, {"cols", m.cols}, {"values", m.values}}; }

Matrix matrix_from_json(const json& j) {
  return Matrix(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>(),
                j.at("values").get<std::vector<Real>>());
}

json network_to_json(const MlpNetwork& net) {
  json layers = json::array();
  for (std::size_t i = 0; i < net.num_layers(); ++i) {
    layers.push_back(json{{"weights", matrix_to_json(net.weights(i))}, {"biases", matrix_to_json(net.biases(i))}});
  }
  return json{{"layer_sizes", net.layer_sizes()}, {"activation", to_string(net.hidden_activation())}, {"layers", layers}};
}

MlpNetwork network_from_json(const json& j) {
  std::vector<Matrix> w;
  std::vector<Matrix> b;
  for (const auto& l : j.at("layers")) {
    w.push_back(matrix_from_json(l.at("weights")));
    b.push_back(matrix_from_json(l.at("biases")));
  }
  return MlpNetwork(j.at("layer_sizes").get<std::vector<std::size_t>>(),
                    activation_from_string(j.at("activation").get<std::string>()), std::move(w), std::move(b));
}

json adam_to_json(const AdamState& s) {
  return json{{"first_moment", s.first_moment}, {"second_moment", s.second_moment}, {"step_count", s.step_count},
              {"learning_rate", s.learning_rate}, {"beta1", s.beta1},   {"beta2", s.beta2},
              {"numeric_eps", s.numeric_eps}};
}

AdamState adam_from_json(const json& j) {
  AdamState s;
  s.first_moment = j.at("first_moment").get<std::vector<std::vector<Real>>>();
  s.second_moment = j.at("second_moment").get<std::vector<std::vector<Real>>>();
  s.step_count = j.at("step_count").get<std::uint64_t>();
  s.learning_rate = j.at("learning_rate").get<Real>();
  s.beta1 = j.at("beta1").get<Real>();
  s.beta2 = j.at("beta2").get<Real>();
  s.numeric_eps = j.at("numeric_eps").get<Real>();
  return s;
}

json agent_to_json(const AgentBundle& a) {
  json critics = json::array();
  json targets = json::array();
  json opts = json::array();
  for (std::size_t i = 0; i < a.critics.size(); ++i) {
    critics.push_back(network_to_json(a.critics[i]));
    targets.push_back(network_to_json(a.target_critics[i]));
    opts.push_back(adam_to_json(a.critic_opts[i]));
  }
  json hyper = a.hyper;
  hyper["action_scale"] = a.hyper.action_scale;
  json j{{"algorithm", to_string(a.algorithm)},
         {"hyper", hyper},
         {"latent_dim", a.latent_dim},
         {"policy", network_to_json(a.policy)},
         {"critics", critics},
         {"target_critics", targets},
         {"policy_opt", adam_to_json(a.policy_opt)},
         {"critic_opts", opts},
         {"log_temperature", a.log_temperature},
         {"temperature_opt", adam_to_json(a.temperature_opt)},
         {"update_count", a.update_count},
         {"rng", rng_state(a.rng)}};
  if (a.algorithm != Algorithm::sac) j["target_policy"] = network_to_json(a.target_policy);
  return j;
}

AgentBundle agent_from_json(const json& j) {
  AgentBundle a;
  a.algorithm = algorithm_from_string(j.at("algorithm").get<std::string>());
  from_json(j.at("hyper"), a.hyper);
  a.latent_dim = j.at("latent_dim").get<std::size_t>();
  a.policy = network_from_json(j.at("policy"));
  if (a.algorithm != Algorithm::sac) a.target_policy = network_from_json(j.at("target_policy"));
  for (const auto& c : j.at("critics")) a.critics.push_back(network_from_json(c));
  for (const auto& c : j.at("target_critics")) a.target_critics.push_back(network_from_json(c));
  a.policy_opt = adam_from_json(j.at("policy_opt"));
  for (const auto& o : j.at("critic_opts")) a.critic_opts.push_back(adam_from_json(o));
  a.log_temperature = j.at("log_temperature").get<Real>();
  a.temperature_opt = adam_from_json(j.at("temperature_opt"));
  a.update_count = j.at("update_count").get<std::uint64_t>();
  restore_rng_state(a.rng, j.at("rng").get<std::string>());
  const std::size_t expected = a.algorithm == Algorithm::ddpg ? 1 : 2;
  if (a.critics.size() != expected || a.target_critics.size() != expected || a.critic_opts.size() != expected) {
    throw InvalidInput("checkpoint: wrong number of critics for " + std::string(to_string(a.algorithm)));
  }
  return a;
}

json buffer_to_json(const ReplayBuffer& buffer) {
  const std::size_t k = buffer.latent_dim();
  const auto& recs = buffer.storage();
  // Flat columns keep CBOR compact.
  std::vector<Real> states;
  std::vector<Real> actions;
  std::vector<Real> next_states;
  std::vector<Real> rewards;
  std::vector<bool> dones;
  states.reserve(recs.size() * k);
  actions.reserve(recs.size() * k);
  next_states.reserve(recs.size() * k);
  for (const auto& r : recs) {
    states.insert(states.end(), r.state.begin(), r.state.end());
    actions.insert(actions.end(), r.action.begin(), r.action.end());
    next_states.insert(next_states.end(), r.next_state.begin(), r.next_state.end());
    rewards.push_back(r.reward);
    dones.push_back(r.done);
  }
  return json{{"capacity", buffer.capacity()}, {"latent_dim", k},          {"head", buffer.head()},
              {"states", states},              {"actions", actions},       {"next_states", next_states},
              {"rewards", rewards},            {"dones", dones}};
}

ReplayBuffer buffer_from_json(const json& j) {
  const auto k = j.at("latent_dim").get<std::size_t>();
  const auto states = j.at("states").get<std::vector<Real>>();
  const auto actions = j.at("actions").get<std::vector<Real>>();
  const auto next_states = j.at("next_states").get<std::vector<Real>>();
  const auto rewards = j.at("rewards").get<std::vector<Real>>();
  const auto dones = j.at("dones").get<std::vector<bool>>();
  const std::size_t n = rewards.size();
  if (states.size() != n * k || actions.size() != n * k || next_states.size() != n * k || dones.size() != n) {
    throw InvalidInput("checkpoint: replay columns have inconsistent lengths");
  }
  std::vector<TransitionRecord> recs(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto slice = [&](const std::vector<Real>& v) {
      return LatentVector(v.begin() + static_cast<std::ptrdiff_t>(i * k), v.begin() + static_cast<std::ptrdiff_t>((i + 1) * k));
    };
    recs[i] = TransitionRecord{slice(states), slice(actions), rewards[i], slice(next_states), dones[i]};
  }
  return ReplayBuffer::restore(j.at("capacity").get<std::size_t>(), k, std::move(recs), j.at("head").get<std::size_t>());
}

void write_checkpoint_file(const std::filesystem::path& path, const json& doc) {
  json wrapped{{"format", "latinv-checkpoint"}, {"version", kCheckpointVersion}, {"body", doc}};
  const auto bytes = json::to_cbor(wrapped);
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open checkpoint for writing: " + tmp);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("failed writing checkpoint: " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move checkpoint into place at " + path.string() + ": " + ec.message());
}

json read_checkpoint_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  json wrapped = json::from_cbor(bytes, true, false);
  if (wrapped.is_discarded() || !wrapped.is_object() || wrapped.value("format", "") != "latinv-checkpoint") {
    throw IoError("not a checkpoint file: " + path.string());
  }
  if (wrapped.at("version").get<int>() != kCheckpointVersion) {
    throw IoError("unsupported checkpoint version in " + path.string());
  }
  return wrapped.at("body");
}

void save_agent(const AgentBundle& agent, const std::filesystem::path& path) {
  write_checkpoint_file(path, json{{"agent", agent_to_json(agent)}});
}

AgentBundle load_agent(const std::filesystem::path& path) {
  return agent_from_json(read_checkpoint_file(path).at("agent"));
}

}  // namespace latinv
