#pragma once

#include <json.hpp>

#include "odemm/model.hpp"

namespace odemm {

nlohmann::json model_config_to_json(const ModelConfig& cfg);
// strict => unknown keys rejected
ModelConfig model_config_from_json(const nlohmann::json& j, bool strict = true);

nlohmann::json train_config_to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j, bool strict = true);

}  // namespace odemm
