#include "featspace/config.hpp"

#include <initializer_list>

#include "featspace/io.hpp"

namespace featspace {

namespace {

using json = nlohmann::ordered_json;

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  require(j.is_object(), ErrorCode::BadSpec, where + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (const char* a : allowed) known = known || key == a;
    require(known, ErrorCode::BadSpec, "unknown key '" + key + "' in " + where);
  }
}

template <typename T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::BadSpec, where + "." + key + ": " + e.what());
  }
}

LossKind parse_loss(const std::string& s) {
  if (s == "softmax") return LossKind::Softmax;
  if (s == "l2_softmax") return LossKind::L2Softmax;
  throw Error(ErrorCode::BadSpec, "unknown loss '" + s + "' (expected softmax or l2_softmax)");
}

OptimizerKind parse_optimizer(const std::string& s) {
  if (s == "sgd") return OptimizerKind::Sgd;
  if (s == "adam") return OptimizerKind::Adam;
  throw Error(ErrorCode::BadSpec, "unknown optimizer '" + s + "' (expected sgd or adam)");
}

json extractor_json(const ExtractorSpec& e) {
  return {{"dataset", to_json(e.data)}, {"model", to_json(e.model)}, {"train", to_json(e.train)}};
}

ExtractorSpec extractor_from_json(const json& j, const std::string& where) {
  check_keys(j, {"dataset", "model", "train"}, where);
  ExtractorSpec e;
  if (j.contains("dataset")) e.data = dataset_spec_from_json(j.at("dataset"));
  if (j.contains("model")) e.model = mlp_spec_from_json(j.at("model"));
  if (j.contains("train")) e.train = train_config_from_json(j.at("train"));
  e.model.input_dim = e.data.input_dim;
  e.model.num_classes = e.data.num_classes;
  return e;
}

}  // namespace

std::string to_string(LossKind k) { return k == LossKind::Softmax ? "softmax" : "l2_softmax"; }
std::string to_string(OptimizerKind k) { return k == OptimizerKind::Sgd ? "sgd" : "adam"; }

json to_json(const DatasetSpec& d) {
  return {{"num_classes", d.num_classes},         {"input_dim", d.input_dim},
          {"train_per_class", d.train_per_class}, {"test_per_class", d.test_per_class},
          {"spread", d.spread},                   {"nuisance_groups", d.nuisance_groups},
          {"group_offset", d.group_offset},       {"prototype_scale", d.prototype_scale},
          {"seed", d.seed}};
}

json to_json(const MlpSpec& m) {
  return {{"input_dim", m.input_dim},
          {"hidden", m.hidden},
          {"feature_dim", m.feature_dim},
          {"num_classes", m.num_classes},
          {"head_bias", m.head_bias}};
}

json to_json(const TrainConfig& c) {
  return {{"loss", to_string(c.loss)},
          {"scale", c.scale},
          {"optimizer", to_string(c.optimizer)},
          {"learning_rate", c.learning_rate},
          {"decay_rate", c.decay_rate},
          {"decay_steps", c.decay_steps},
          {"batch_size", c.batch_size},
          {"epochs", c.epochs},
          {"seed", c.seed},
          {"probe_size", c.probe_size},
          {"adam_beta1", c.adam_beta1},
          {"adam_beta2", c.adam_beta2},
          {"adam_epsilon", c.adam_epsilon}};
}

json to_json(const TrainExperiment& e) {
  return {{"dataset", to_json(e.data)}, {"model", to_json(e.model)}, {"train", to_json(e.train)}};
}

json to_json(const FusionExperimentConfig& f) {
  return {{"modality_v", extractor_json(f.modality_v)},
          {"modality_a", extractor_json(f.modality_a)},
          {"fusion",
           {{"hidden", f.fusion.hidden}, {"feature_dim", f.fusion.feature_dim}, {"train", to_json(f.fusion.train)}}},
          {"leave_out_group", f.leave_out_group},
          {"seed", f.seed}};
}

DatasetSpec dataset_spec_from_json(const json& j) {
  const std::string w = "dataset";
  check_keys(j, {"num_classes", "input_dim", "train_per_class", "test_per_class", "spread", "nuisance_groups",
                 "group_offset", "prototype_scale", "seed"},
             w);
  DatasetSpec d;
  read(j, "num_classes", d.num_classes, w);
  read(j, "input_dim", d.input_dim, w);
  read(j, "train_per_class", d.train_per_class, w);
  read(j, "test_per_class", d.test_per_class, w);
  read(j, "spread", d.spread, w);
  read(j, "nuisance_groups", d.nuisance_groups, w);
  read(j, "group_offset", d.group_offset, w);
  read(j, "prototype_scale", d.prototype_scale, w);
  read(j, "seed", d.seed, w);
  return d;
}

MlpSpec mlp_spec_from_json(const json& j) {
  const std::string w = "model";
  check_keys(j, {"input_dim", "hidden", "feature_dim", "num_classes", "head_bias"}, w);
  MlpSpec m;
  read(j, "input_dim", m.input_dim, w);
  read(j, "hidden", m.hidden, w);
  read(j, "feature_dim", m.feature_dim, w);
  read(j, "num_classes", m.num_classes, w);
  read(j, "head_bias", m.head_bias, w);
  return m;
}

TrainConfig train_config_from_json(const json& j) {
  const std::string w = "train";
  check_keys(j, {"loss", "scale", "optimizer", "learning_rate", "decay_rate", "decay_steps", "batch_size", "epochs",
                 "seed", "probe_size", "adam_beta1", "adam_beta2", "adam_epsilon"},
             w);
  TrainConfig c;
  std::string loss = to_string(c.loss);
  std::string opt = to_string(c.optimizer);
  read(j, "loss", loss, w);
  read(j, "optimizer", opt, w);
  c.loss = parse_loss(loss);
  c.optimizer = parse_optimizer(opt);
  read(j, "scale", c.scale, w);
  read(j, "learning_rate", c.learning_rate, w);
  read(j, "decay_rate", c.decay_rate, w);
  read(j, "decay_steps", c.decay_steps, w);
  read(j, "batch_size", c.batch_size, w);
  read(j, "epochs", c.epochs, w);
  read(j, "seed", c.seed, w);
  read(j, "probe_size", c.probe_size, w);
  read(j, "adam_beta1", c.adam_beta1, w);
  read(j, "adam_beta2", c.adam_beta2, w);
  read(j, "adam_epsilon", c.adam_epsilon, w);
  validate(c);
  return c;
}

TrainExperiment train_experiment_from_json(const json& j) {
  check_keys(j, {"dataset", "model", "train"}, "train experiment");
  TrainExperiment e;
  if (j.contains("dataset")) e.data = dataset_spec_from_json(j.at("dataset"));
  if (j.contains("model")) e.model = mlp_spec_from_json(j.at("model"));
  if (j.contains("train")) e.train = train_config_from_json(j.at("train"));
  e.model.input_dim = e.data.input_dim;
  e.model.num_classes = e.data.num_classes;
  return e;
}

FusionExperimentConfig fusion_config_from_json(const json& j) {
  check_keys(j, {"modality_v", "modality_a", "fusion", "leave_out_group", "seed"}, "fusion experiment");
  FusionExperimentConfig f;
  if (j.contains("modality_v")) f.modality_v = extractor_from_json(j.at("modality_v"), "modality_v");
  if (j.contains("modality_a")) f.modality_a = extractor_from_json(j.at("modality_a"), "modality_a");
  if (j.contains("fusion")) {
    const json& fj = j.at("fusion");
    check_keys(fj, {"hidden", "feature_dim", "train"}, "fusion");
    read(fj, "hidden", f.fusion.hidden, "fusion");
    read(fj, "feature_dim", f.fusion.feature_dim, "fusion");
    if (fj.contains("train")) f.fusion.train = train_config_from_json(fj.at("train"));
  }
  read(j, "leave_out_group", f.leave_out_group, "fusion experiment");
  read(j, "seed", f.seed, "fusion experiment");
  return f;
}

json load_json(const std::string& path) {
  const std::string text = io::read_file(path);
  try {
    return json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::BadSpec, path + ": " + e.what());
  }
}

}  // namespace featspace
