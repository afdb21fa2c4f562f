#pragma once

#include <filesystem>

#include <nlohmann/json.hpp>

#include "latinv/adam.hpp"
#include "latinv/agents.hpp"
#include "latinv/mlp.hpp"
#include "latinv/replay.hpp"

// Checkpoints are CBOR documents (self-describing, binary, exact doubles).
// Every random engine is stored alongside the parameters, so a restored agent
// continues bit-for-bit where the saved one stopped.

namespace latinv {

inline constexpr int kCheckpointVersion = 1;

nlohmann::json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const nlohmann::json& j);

nlohmann::json network_to_json(const MlpNetwork& net);
MlpNetwork network_from_json(const nlohmann::json& j);

nlohmann::json adam_to_json(const AdamState& s);
AdamState adam_from_json(const nlohmann::json& j);

nlohmann::json agent_to_json(const AgentBundle& agent);
AgentBundle agent_from_json(const nlohmann::json& j);

nlohmann::json buffer_to_json(const ReplayBuffer& buffer);
ReplayBuffer buffer_from_json(const nlohmann::json& j);

/// Writes atomically (temp file + rename). Throws IoError with the path.
void write_checkpoint_file(const std::filesystem::path& path, const nlohmann::json& doc);
nlohmann::json read_checkpoint_file(const std::filesystem::path& path);

void save_agent(const AgentBundle& agent, const std::filesystem::path& path);
AgentBundle load_agent(const std::filesystem::path& path);

}  // namespace latinv
