#include "featspace/toytrain.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>

#include "featspace/kernels.hpp"

namespace featspace {

namespace {

constexpr double kNormEpsilon = 1e-12;

std::vector<double> random_direction(std::mt19937_64& rng, std::size_t dim) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> v(dim);
  double n = 0.0;
  while (n == 0.0) {
    for (double& x : v) x = gauss(rng);
    n = norm(v);
  }
  for (double& x : v) x /= n;
  return v;
}

std::vector<std::string> default_class_names(std::size_t n) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < n; ++i) names.push_back("class" + std::to_string(i));
  return names;
}

// Activations kept for the backward pass. inputs[l] feeds layer l; the last
// entry of `inputs` is the head input.
struct ForwardCache {
  std::vector<std::vector<double>> inputs;
  std::vector<double> features;
  std::vector<double> logits;
  double feature_radius = 0.0;  // sqrt(|f|^2 + eps), L2 only
};

void dense(const DenseLayer& layer, std::span<const double> x, std::vector<double>& out) {
  out.assign(layer.weights.rows(), 0.0);
  kernels::active().gemv(layer.weights.data().data(), layer.weights.rows(), layer.weights.cols(), x.data(),
                         out.data());
  if (!layer.bias.empty()) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += layer.bias[i];
  }
}

ForwardCache forward(const MlpModel& model, const TrainConfig& config, std::span<const double> input) {
  ForwardCache cache;
  const auto& layers = model.layers();
  cache.inputs.emplace_back(input.begin(), input.end());
  std::vector<double> out;
  for (std::size_t l = 0; l + 1 < layers.size(); ++l) {
    dense(layers[l], cache.inputs.back(), out);
    for (double& v : out) v = std::max(v, 0.0);
    cache.inputs.push_back(out);
  }
  cache.features = cache.inputs.back();
  if (config.loss == LossKind::L2Softmax) {
    cache.feature_radius = std::sqrt(kernels::sum_squares(cache.features) + kNormEpsilon);
    cache.inputs.back() = head_input(cache.features, config);
  }
  dense(layers.back(), cache.inputs.back(), cache.logits);
  return cache;
}

std::vector<DenseLayer> zero_like(const std::vector<DenseLayer>& layers) {
  std::vector<DenseLayer> out;
  out.reserve(layers.size());
  for (const auto& l : layers) {
    out.push_back({Matrix(l.weights.rows(), l.weights.cols()), std::vector<double>(l.bias.size(), 0.0)});
  }
  return out;
}

double cross_entropy(std::span<const double> logits, std::size_t label) {
  const double zmax = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (double z : logits) total += std::exp(z - zmax);
  return std::log(total) + zmax - logits[label];
}

std::size_t argmax(std::span<const double> z) {
  return static_cast<std::size_t>(std::distance(z.begin(), std::max_element(z.begin(), z.end())));
}

// FNV-1a over the raw parameter bytes.
std::string parameter_digest(const MlpModel& model, std::size_t epoch) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int b = 0; b < 8; ++b) {
      h ^= (bits >> (8 * b)) & 0xFFU;
      h *= 1099511628211ULL;
    }
  };
  for (const auto& l : model.layers()) {
    for (double v : l.weights.data()) mix(v);
    for (double v : l.bias) mix(v);
  }
  char buf[48];
  std::snprintf(buf, sizeof buf, "e%04zu-%016llx", epoch, static_cast<unsigned long long>(h));
  return buf;
}

class Optimizer {
 public:
  Optimizer(const TrainConfig& config, const std::vector<DenseLayer>& shape)
      : config_(config), m_(zero_like(shape)), v_(zero_like(shape)) {}

  void step(std::vector<DenseLayer>& params, const std::vector<DenseLayer>& grad) {
    ++t_;
    double lr = config_.learning_rate;
    if (config_.decay_steps > 0) {
      lr *= std::pow(config_.decay_rate, static_cast<double>(t_ - 1) / static_cast<double>(config_.decay_steps));
    }
    for (std::size_t l = 0; l < params.size(); ++l) {
      update(params[l].weights.data(), grad[l].weights.data(), m_[l].weights.data(), v_[l].weights.data(), lr);
      update(params[l].bias, grad[l].bias, m_[l].bias, v_[l].bias, lr);
    }
  }

 private:
  void update(std::span<double> p, std::span<const double> g, std::span<double> m, std::span<double> v,
              double lr) const {
    if (config_.optimizer == OptimizerKind::Sgd) {
      for (std::size_t i = 0; i < p.size(); ++i) p[i] -= lr * g[i];
      return;
    }
    const double b1 = config_.adam_beta1;
    const double b2 = config_.adam_beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = b1 * m[i] + (1.0 - b1) * g[i];
      v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
      p[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + config_.adam_epsilon);
    }
  }

  const TrainConfig& config_;
  std::vector<DenseLayer> m_;
  std::vector<DenseLayer> v_;
  std::size_t t_ = 0;
};

}  // namespace

Dataset make_synthetic_dataset(const DatasetSpec& spec) {
  require(spec.num_classes >= 2, ErrorCode::BadSpec, "dataset needs at least 2 classes");
  require(spec.input_dim >= 1, ErrorCode::BadSpec, "input dimension must be positive");
  require(spec.train_per_class >= 1, ErrorCode::BadSpec, "train split needs at least one sample per class");
  require(std::isfinite(spec.spread) && spec.spread >= 0.0, ErrorCode::BadSpec, "spread must be finite and >= 0");
  require(std::isfinite(spec.group_offset) && spec.group_offset >= 0.0, ErrorCode::BadSpec,
          "group offset must be finite and >= 0");
  require(std::isfinite(spec.prototype_scale) && spec.prototype_scale > 0.0, ErrorCode::BadSpec,
          "prototype scale must be positive");

  std::mt19937_64 rng(spec.seed);
  std::vector<std::vector<double>> prototypes;
  for (std::size_t c = 0; c < spec.num_classes; ++c) {
    auto p = random_direction(rng, spec.input_dim);
    for (double& x : p) x *= spec.prototype_scale;
    prototypes.push_back(std::move(p));
  }
  std::vector<std::vector<double>> offsets;
  for (std::size_t g = 0; g < spec.nuisance_groups; ++g) {
    auto o = random_direction(rng, spec.input_dim);
    for (double& x : o) x *= spec.group_offset;
    offsets.push_back(std::move(o));
  }

  std::normal_distribution<double> noise(0.0, 1.0);
  std::size_t next_id = 0;
  auto fill = [&](LabeledFeatureSet& set, std::size_t per_class, Split split) {
    set.split = split;
    set.num_classes = spec.num_classes;
    set.class_names = default_class_names(spec.num_classes);
    set.vectors = Matrix(0, spec.input_dim);
    std::vector<double> x(spec.input_dim);
    for (std::size_t c = 0; c < spec.num_classes; ++c) {
      for (std::size_t k = 0; k < per_class; ++k) {
        const int group = spec.nuisance_groups > 0 ? static_cast<int>(k % spec.nuisance_groups) : 0;
        for (std::size_t d = 0; d < spec.input_dim; ++d) {
          x[d] = prototypes[c][d] + spec.spread * noise(rng);
          if (spec.nuisance_groups > 0) x[d] += offsets[static_cast<std::size_t>(group)][d];
        }
        set.vectors.append_row(x);
        set.labels.push_back(c);
        if (spec.nuisance_groups > 0) set.groups.push_back(group);
        set.ids.push_back(next_id++);
      }
    }
  };

  Dataset out;
  fill(out.train, spec.train_per_class, Split::Train);
  fill(out.test, spec.test_per_class, Split::Test);
  return out;
}

MlpModel::MlpModel(const MlpSpec& spec, std::uint64_t seed) : spec_(spec) {
  require(spec.input_dim >= 1, ErrorCode::BadSpec, "input width must be positive");
  require(spec.feature_dim >= 1 || spec.hidden.empty(), ErrorCode::BadSpec,
          "a zero-width feature layer is only allowed without hidden layers");
  require(spec.num_classes >= 2, ErrorCode::BadSpec, "model needs at least 2 classes");
  for (std::size_t h : spec.hidden) require(h >= 1, ErrorCode::BadSpec, "hidden widths must be positive");

  std::vector<std::size_t> sizes{spec.input_dim};
  sizes.insert(sizes.end(), spec.hidden.begin(), spec.hidden.end());
  if (spec.feature_dim > 0) sizes.push_back(spec.feature_dim);
  sizes.push_back(spec.num_classes);

  std::mt19937_64 rng(seed);
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const std::size_t fan_in = sizes[l];
    const bool is_head = l + 2 == sizes.size();
    const double limit = std::sqrt((is_head ? 3.0 : 6.0) / static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-limit, limit);
    DenseLayer layer{Matrix(sizes[l + 1], fan_in), {}};
    for (double& w : layer.weights.data()) w = dist(rng);
    if (!is_head || spec.head_bias) layer.bias.assign(sizes[l + 1], 0.0);
    layers_.push_back(std::move(layer));
  }
}

std::vector<double> MlpModel::features(std::span<const double> input) const {
  require(input.size() == spec_.input_dim, ErrorCode::DimensionMismatch, "input length differs from model input");
  std::vector<double> x(input.begin(), input.end());
  std::vector<double> out;
  for (std::size_t l = 0; l + 1 < layers_.size(); ++l) {
    dense(layers_[l], x, out);
    for (double& v : out) v = std::max(v, 0.0);
    x.swap(out);
  }
  return x;
}

ClassifierHead MlpModel::head() const {
  const DenseLayer& h = layers_.back();
  std::optional<std::vector<double>> bias;
  if (!h.bias.empty()) bias = h.bias;
  return ClassifierHead(h.weights, bias);
}

void validate(const TrainConfig& c) {
  require(c.epochs >= 1, ErrorCode::BadSpec, "epochs must be >= 1");
  require(c.batch_size >= 1, ErrorCode::BadSpec, "batch size must be >= 1");
  require(std::isfinite(c.learning_rate) && c.learning_rate >= 0.0, ErrorCode::BadSpec,
          "learning rate must be finite and >= 0");
  require(c.loss != LossKind::L2Softmax || (std::isfinite(c.scale) && c.scale > 0.0), ErrorCode::BadSpec,
          "L2-Softmax scale must be positive");
  require(c.decay_rate > 0.0 && c.decay_rate <= 1.0, ErrorCode::BadSpec, "decay rate must lie in (0, 1]");
  require(c.probe_size >= 1, ErrorCode::BadSpec, "probe size must be >= 1");
  require(c.adam_beta1 >= 0.0 && c.adam_beta1 < 1.0 && c.adam_beta2 >= 0.0 && c.adam_beta2 < 1.0 &&
              c.adam_epsilon > 0.0,
          ErrorCode::BadSpec, "invalid adaptive-moment hyperparameters");
}

std::vector<double> head_input(std::span<const double> features, const TrainConfig& config) {
  std::vector<double> h(features.begin(), features.end());
  if (config.loss == LossKind::L2Softmax) {
    const double r = std::sqrt(kernels::sum_squares(features) + kNormEpsilon);
    for (double& v : h) v *= config.scale / r;
  }
  return h;
}

std::vector<double> model_logits(const MlpModel& model, const TrainConfig& config, std::span<const double> input) {
  return forward(model, config, input).logits;
}

std::size_t predict(const MlpModel& model, const TrainConfig& config, std::span<const double> input) {
  return argmax(model_logits(model, config, input));
}

LossAndGradient loss_and_gradient(const MlpModel& model, const TrainConfig& config, const LabeledFeatureSet& data,
                                  std::span<const std::size_t> rows) {
  require(!rows.empty(), ErrorCode::EmptyBatch, "gradient of an empty batch");
  require(data.dim() == model.spec().input_dim, ErrorCode::DimensionMismatch, "data width differs from model input");
  const auto& layers = model.layers();
  LossAndGradient out{0.0, zero_like(layers)};
  const double inv_batch = 1.0 / static_cast<double>(rows.size());

  std::vector<double> delta;
  std::vector<double> prev;
  for (std::size_t row : rows) {
    const std::size_t label = data.labels.at(row);
    const ForwardCache cache = forward(model, config, data.vectors.row(row));
    out.loss += cross_entropy(cache.logits, label) * inv_batch;

    // dL/dz = softmax(z) - onehot(label)
    const double zmax = *std::max_element(cache.logits.begin(), cache.logits.end());
    delta.resize(cache.logits.size());
    double total = 0.0;
    for (std::size_t j = 0; j < delta.size(); ++j) total += (delta[j] = std::exp(cache.logits[j] - zmax));
    for (double& d : delta) d /= total;
    delta[label] -= 1.0;
    for (double& d : delta) d *= inv_batch;

    for (std::size_t l = layers.size(); l-- > 0;) {
      const DenseLayer& layer = layers[l];
      DenseLayer& g = out.gradient[l];
      const std::vector<double>& x = cache.inputs[l];
      for (std::size_t i = 0; i < delta.size(); ++i) {
        if (delta[i] == 0.0) continue;
        kernels::axpy(delta[i], x, g.weights.row(i));
        if (!g.bias.empty()) g.bias[i] += delta[i];
      }
      if (l == 0) break;
      prev.assign(x.size(), 0.0);
      for (std::size_t i = 0; i < delta.size(); ++i) {
        if (delta[i] != 0.0) kernels::axpy(delta[i], layer.weights.row(i), prev);
      }
      if (l + 1 == layers.size() && config.loss == LossKind::L2Softmax) {
        // h = s f / r with r = sqrt(|f|^2 + eps): dL/df = s/r (dL/dh - f (f . dL/dh) / r^2)
        const double r = cache.feature_radius;
        const double fd = kernels::dot(cache.features, prev);
        for (std::size_t k = 0; k < prev.size(); ++k) {
          prev[k] = config.scale / r * (prev[k] - cache.features[k] * fd / (r * r));
        }
      }
      // ReLU mask of the activations that produced x.
      const std::vector<double>& act = l + 1 == layers.size() ? cache.features : x;
      for (std::size_t k = 0; k < prev.size(); ++k) {
        if (act[k] <= 0.0) prev[k] = 0.0;
      }
      delta.swap(prev);
    }
  }
  return out;
}

Evaluation evaluate(const MlpModel& model, const TrainConfig& config, const LabeledFeatureSet& data) {
  require(data.size() > 0, ErrorCode::EmptyBatch, "evaluation on an empty set");
  Evaluation e;
  std::size_t correct = 0;
  for (std::size_t r = 0; r < data.size(); ++r) {
    const ForwardCache cache = forward(model, config, data.vectors.row(r));
    e.loss += cross_entropy(cache.logits, data.labels[r]);
    if (argmax(cache.logits) == data.labels[r]) ++correct;
  }
  e.loss /= static_cast<double>(data.size());
  e.accuracy = static_cast<double>(correct) / static_cast<double>(data.size());
  return e;
}

std::optional<double> TrainTrace::loss_ratio() const {
  if (epochs.empty() || !epochs.back().test_loss || epochs.back().train_loss <= 0.0) return std::nullopt;
  return *epochs.back().test_loss / epochs.back().train_loss;
}

TrainResult train(const MlpSpec& spec, const TrainConfig& config, const LabeledFeatureSet& train_set,
                  const LabeledFeatureSet* test_set, const EpochCallback& on_epoch) {
  validate(config);
  train_set.validate(true);
  require(train_set.size() > 0, ErrorCode::EmptyBatch, "empty training set");
  require(train_set.dim() == spec.input_dim, ErrorCode::DimensionMismatch, "training data width differs from model");
  require(train_set.num_classes == spec.num_classes, ErrorCode::ClassMismatch,
          "training data class count differs from model");
  if (test_set != nullptr) {
    require(test_set->dim() == spec.input_dim, ErrorCode::DimensionMismatch, "test data width differs from model");
  }

  TrainResult result{MlpModel(spec, config.seed), {}};
  MlpModel& model = result.model;
  TrainTrace& trace = result.trace;

  std::mt19937_64 shuffle_rng(config.seed ^ 0x9E3779B97F4A7C15ULL);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);

  std::vector<std::size_t> probe_rows = order;
  std::mt19937_64 probe_rng(config.seed ^ 0xC2B2AE3D27D4EB4FULL);
  std::shuffle(probe_rows.begin(), probe_rows.end(), probe_rng);
  probe_rows.resize(std::min(config.probe_size, probe_rows.size()));
  std::sort(probe_rows.begin(), probe_rows.end());
  trace.probe_size = probe_rows.size();

  SensitivityOptions probe_options;
  probe_options.fold_out_bias = true;

  Optimizer optimizer(config, model.layers());
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      const LossAndGradient lg =
          loss_and_gradient(model, config, train_set, std::span<const std::size_t>(order).subspan(start, end - start));
      if (!std::isfinite(lg.loss)) {
        throw DivergenceError("non-finite loss at epoch " + std::to_string(epoch), trace);
      }
      optimizer.step(model.layers(), lg.gradient);
      ++trace.steps;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    const Evaluation tr = evaluate(model, config, train_set);
    rec.train_loss = tr.loss;
    rec.train_accuracy = tr.accuracy;
    if (test_set != nullptr && test_set->size() > 0) {
      const Evaluation te = evaluate(model, config, *test_set);
      rec.test_loss = te.loss;
      rec.test_accuracy = te.accuracy;
    }
    if (!std::isfinite(rec.train_loss) || (rec.test_loss && !std::isfinite(*rec.test_loss))) {
      throw DivergenceError("non-finite loss after epoch " + std::to_string(epoch), trace);
    }

    std::vector<std::vector<double>> probe;
    probe.reserve(probe_rows.size());
    for (std::size_t r : probe_rows) probe.push_back(head_input(model.features(train_set.vectors.row(r)), config));
    try {
      rec.probe = gradient_magnitude_summary(probe, model.head(), probe_options);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::EmptyBatch) throw;
      rec.probe = {};
      rec.probe.skipped_zero = probe.size();
    }
    rec.snapshot_id = parameter_digest(model, epoch);
    if (on_epoch) on_epoch(model, rec);
    trace.epochs.push_back(std::move(rec));
  }
  return result;
}

FeatureExport export_features(const MlpModel& model, const TrainConfig& config, const LabeledFeatureSet& data) {
  require(data.dim() == model.spec().input_dim, ErrorCode::DimensionMismatch, "data width differs from model input");
  LabeledFeatureSet features;
  features.vectors = Matrix(0, model.feature_width());
  for (std::size_t r = 0; r < data.size(); ++r) features.vectors.append_row(model.features(data.vectors.row(r)));
  features.labels = data.labels;
  features.groups = data.groups;
  features.ids = data.ids;
  features.split = data.split;
  features.num_classes = data.num_classes;
  features.class_names = data.class_names.empty() ? default_class_names(data.num_classes) : data.class_names;
  ClassifierHead head = model.head();
  head = ClassifierHead(head.weights(), head.bias(), features.class_names);
  return {std::move(features), std::move(head), config.loss, config.scale};
}

}  // namespace featspace
