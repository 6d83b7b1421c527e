// SPDX-License-Identifier: Apache-2.0
//
// nlohmann-json converters for the core model/schedule structs, shared by
// checkpoints and run configs.
#pragma once

#include <json.hpp>

#include "psdebnn/inference.hpp"
#include "psdebnn/schedule.hpp"

namespace psdebnn {

void to_json(nlohmann::json& j, const WeightPartition& p);
void from_json(const nlohmann::json& j, WeightPartition& p);

void to_json(nlohmann::json& j, const MlpSpec& s);
void from_json(const nlohmann::json& j, MlpSpec& s);

void to_json(nlohmann::json& j, const RegimeSchedule& s);
void from_json(const nlohmann::json& j, RegimeSchedule& s);

void to_json(nlohmann::json& j, const ModelSpec& s);
void from_json(const nlohmann::json& j, ModelSpec& s);

}  // namespace psdebnn
