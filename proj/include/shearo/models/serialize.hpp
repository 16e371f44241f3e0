#pragma once

#include <json.hpp>

#include "shearo/models/autoencoder.hpp"
#include "shearo/models/stfpm.hpp"
#include "shearo/synthgen/synthgen.hpp"

// JSON converters for the config types that appear in checkpoints, run
// configs and reports.

namespace shearo::nn {
void to_json(nlohmann::json& j, const BackboneConfig& c);
void from_json(const nlohmann::json& j, BackboneConfig& c);
}  // namespace shearo::nn

namespace shearo::models {
void to_json(nlohmann::json& j, const AeConfig& c);
void from_json(const nlohmann::json& j, AeConfig& c);
void to_json(nlohmann::json& j, const ConvAeConfig& c);
void from_json(const nlohmann::json& j, ConvAeConfig& c);
void to_json(nlohmann::json& j, const StfpmConfig& c);
void from_json(const nlohmann::json& j, StfpmConfig& c);
}  // namespace shearo::models

namespace shearo::synthgen {
void to_json(nlohmann::json& j, const SpecimenSpec& c);
void from_json(const nlohmann::json& j, SpecimenSpec& c);
void to_json(nlohmann::json& j, const ShearConfig& c);
void from_json(const nlohmann::json& j, ShearConfig& c);
void to_json(nlohmann::json& j, const NoiseSpec& c);
void from_json(const nlohmann::json& j, NoiseSpec& c);
void to_json(nlohmann::json& j, const CampaignSpec& c);
void from_json(const nlohmann::json& j, CampaignSpec& c);
void to_json(nlohmann::json& j, const GeneratorConfig& c);
void from_json(const nlohmann::json& j, GeneratorConfig& c);
}  // namespace shearo::synthgen
