#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"

#include "fatigue/chain.hpp"
#include "fatigue/harness.hpp"
#include "fatigue/three_cc.hpp"
#include "fatigue/torque.hpp"

// Declarative JSON documents for models, tasks and run configuration. Every
// reader rejects unknown enum values and missing required keys with a
// ConfigError naming the offending key.

namespace fatigue {

using Json = nlohmann::json;

Json to_json(const ThreeCCParams& p);
ThreeCCParams params_from_json(const Json& j);

Json to_json(const TorqueBoundTable& b);
TorqueBoundTable bounds_from_json(const Json& j);

Json to_json(const ChainModel& m);
ChainModel model_from_json(const Json& j);

Json to_json(const TaskScript& t);
TaskScript task_from_json(const Json& j);

Json to_json(const SimConfig& c);
SimConfig sim_config_from_json(const Json& j);

Json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const Json& j);

ChainModel load_model(const std::filesystem::path& path);
TaskScript load_task(const std::filesystem::path& path);
SimConfig load_sim_config(const std::filesystem::path& path);

}  // namespace fatigue
