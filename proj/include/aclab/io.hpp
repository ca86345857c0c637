#pragma once

#include <string>

#include <json.hpp>

#include "aclab/dqc.hpp"

namespace aclab {

using json = nlohmann::json;

// Shortest decimal that keeps 15 significant digits.
std::string format_number(double x);

json mdp_to_json(const Mdp& m);
// Validates the result; malformed documents raise Error.
Mdp mdp_from_json(const json& j);

json data_to_json(const DataDist& d);
DataDist data_from_json(const json& j, int num_states, int num_actions);

json value_table_to_json(const ValueTable& v);
std::string value_table_csv(const ValueTable& v);
json chunk_q_to_json(const ChunkQTable& q);
std::string chunk_q_csv(const ChunkQTable& q);
json policy_to_json(const AcPolicy& p);

json agent_config_to_json(const AgentConfig& c);
// Missing keys keep their defaults; unknown keys raise Error.
AgentConfig agent_config_from_json(const json& j);

json read_json_file(const std::string& path);
std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace aclab
