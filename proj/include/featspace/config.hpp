#pragma once

// JSON forms of the training and fusion experiment descriptions. Missing
// keys take the struct defaults; unknown keys are rejected with BadSpec so a
// typo cannot silently fall back to a default.

#include <string>

#include <json.hpp>

#include "featspace/fusion.hpp"
#include "featspace/toytrain.hpp"

namespace featspace {

struct TrainExperiment {
  DatasetSpec data;
  MlpSpec model;  // input_dim and num_classes follow `data`
  TrainConfig train;
};

nlohmann::ordered_json to_json(const DatasetSpec& d);
nlohmann::ordered_json to_json(const MlpSpec& m);
nlohmann::ordered_json to_json(const TrainConfig& c);
nlohmann::ordered_json to_json(const TrainExperiment& e);
nlohmann::ordered_json to_json(const FusionExperimentConfig& f);

DatasetSpec dataset_spec_from_json(const nlohmann::ordered_json& j);
MlpSpec mlp_spec_from_json(const nlohmann::ordered_json& j);
TrainConfig train_config_from_json(const nlohmann::ordered_json& j);
TrainExperiment train_experiment_from_json(const nlohmann::ordered_json& j);
FusionExperimentConfig fusion_config_from_json(const nlohmann::ordered_json& j);

/// Reads a JSON file; throws Io or BadSpec.
nlohmann::ordered_json load_json(const std::string& path);

std::string to_string(LossKind k);
std::string to_string(OptimizerKind k);

}  // namespace featspace
