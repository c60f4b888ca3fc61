#include "semi3/backbone.hpp"

#include "semi3/errors.hpp"
#include "semi3/ops.hpp"

#include <cmath>

namespace semi3 {

std::string to_string(Role role) {
  switch (role) {
    case Role::kSketch:
      return "sketch";
    case Role::kImage:
      return "image";
    case Role::kEdgemap:
      return "edgemap";
  }
  return "sketch";
}

Role parse_role(const std::string& text) {
  for (Role r : {Role::kSketch, Role::kImage, Role::kEdgemap}) {
    if (to_string(r) == text) return r;
  }
  throw ContractError("invalid branch role '" + text + "'");
}

BackboneConfig BackboneConfig::vgg19(std::size_t num_classes) {
  BackboneConfig c;
  c.in_channels = 3;
  c.input_size = 224;
  c.stages = {{2, 64}, {2, 128}, {4, 256}, {4, 512}, {4, 512}};
  c.fc_dims = {4096, 4096};
  c.embed_dim = 256;
  c.num_classes = num_classes;
  return c;
}

void BackboneConfig::validate() const {
  if (in_channels == 0) throw ConfigError("in_channels must be positive");
  if (stages.empty()) throw ConfigError("backbone needs at least one stage");
  if (embed_dim == 0 || num_classes == 0) throw ConfigError("embed_dim and num_classes must be positive");
  for (std::size_t d : fc_dims) {
    if (d == 0) throw ConfigError("fc widths must be positive");
  }
  std::size_t side = input_size;
  for (std::size_t s = 0; s < stages.size(); ++s) {
    if (stages[s].convs == 0 || stages[s].channels == 0) {
      throw ConfigError("stage " + std::to_string(s + 1) + " needs at least one conv and one channel");
    }
    if (side < 2) {
      throw ConfigError("spatial size collapses to " + std::to_string(side) + " before pool of stage " +
                        std::to_string(s + 1));
    }
    side /= 2;
  }
}

std::size_t BackboneConfig::feature_channels() const {
  validate();
  return stages.back().channels;
}

std::size_t BackboneConfig::feature_size() const {
  validate();
  std::size_t side = input_size;
  for (std::size_t s = 0; s < stages.size(); ++s) side /= 2;
  return side;
}

std::size_t BackboneConfig::flattened_size() const {
  const std::size_t side = feature_size();
  return feature_channels() * side * side;
}

Shape BackboneConfig::feature_shape(std::size_t batch) const {
  const std::size_t side = feature_size();
  return {batch, feature_channels(), side, side};
}

Branch::Branch(const BackboneConfig& config, Role role)
    : config_(config), role_(role), prefix_(to_string(role) + ".") {
  config_.validate();
  for (std::size_t s = 0; s < config_.stages.size(); ++s) {
    std::vector<Layer> stage;
    for (std::size_t k = 0; k < config_.stages[s].convs; ++k) {
      const std::string base = prefix_ + "conv" + std::to_string(s + 1) + "_" + std::to_string(k + 1);
      stage.push_back({base + ".weight", base + ".bias"});
    }
    convs_.push_back(std::move(stage));
  }
  for (std::size_t i = 0; i < config_.fc_dims.size(); ++i) {
    const std::string base = prefix_ + "fc" + std::to_string(i + 1);
    fcs_.push_back({base + ".weight", base + ".bias"});
  }
  embed_ = {prefix_ + "embed.weight", prefix_ + "embed.bias"};
  classifier_ = {prefix_ + "cls.weight", prefix_ + "cls.bias"};
}

Branch Branch::build(const BackboneConfig& config, Role role, ParameterStore& store) {
  Branch branch(config, role);
  std::size_t channels = config.in_channels;
  for (std::size_t s = 0; s < config.stages.size(); ++s) {
    for (const Layer& layer : branch.convs_[s]) {
      const std::size_t out = config.stages[s].channels;
      const double fan_in = static_cast<double>(channels * 9);
      store.add(layer.weight, {out, channels, 3, 3}, Init::gaussian(std::sqrt(2.0 / fan_in)));
      store.add(layer.bias, {out}, Init::zeros());
      channels = out;
    }
  }
  std::size_t width = config.flattened_size();
  for (std::size_t i = 0; i < config.fc_dims.size(); ++i) {
    store.add(branch.fcs_[i].weight, {config.fc_dims[i], width},
              Init::gaussian(std::sqrt(2.0 / static_cast<double>(width))));
    store.add(branch.fcs_[i].bias, {config.fc_dims[i]}, Init::zeros());
    width = config.fc_dims[i];
  }
  store.add(branch.embed_.weight, {config.embed_dim, width},
            Init::gaussian(std::sqrt(1.0 / static_cast<double>(width))));
  store.add(branch.embed_.bias, {config.embed_dim}, Init::zeros());
  store.add(branch.classifier_.weight, {config.num_classes, config.embed_dim},
            Init::gaussian(std::sqrt(1.0 / static_cast<double>(config.embed_dim))));
  store.add(branch.classifier_.bias, {config.num_classes}, Init::zeros());
  return branch;
}

std::vector<std::string> Branch::conv_parameter_names() const {
  std::vector<std::string> names;
  for (const auto& stage : convs_) {
    for (const Layer& layer : stage) {
      names.push_back(layer.weight);
      names.push_back(layer.bias);
    }
  }
  return names;
}

std::vector<std::string> Branch::head_parameter_names() const {
  std::vector<std::string> names;
  for (const Layer& layer : fcs_) {
    names.push_back(layer.weight);
    names.push_back(layer.bias);
  }
  for (const Layer* layer : {&embed_, &classifier_}) {
    names.push_back(layer->weight);
    names.push_back(layer->bias);
  }
  return names;
}

std::vector<std::string> Branch::parameter_names() const {
  std::vector<std::string> names = conv_parameter_names();
  const std::vector<std::string> head = head_parameter_names();
  names.insert(names.end(), head.begin(), head.end());
  return names;
}

Var parameter_var(Recording& recording, const ParameterStore& store, const std::string& name) {
  return recording.parameter(store.get(name));
}

Var Branch::forward_feature_map(const ParameterStore& store, const Var& x) const {
  const Shape& shape = x.shape();
  if (shape.size() != 4 || shape[1] != config_.in_channels || shape[2] != config_.input_size ||
      shape[3] != config_.input_size) {
    throw DimensionError(prefix_ + " branch expects [N," + std::to_string(config_.in_channels) + "," +
                         std::to_string(config_.input_size) + "," + std::to_string(config_.input_size) +
                         "] input, got " + shape_string(shape));
  }
  Recording& rec = x.recording();
  Var h = x;
  for (const auto& stage : convs_) {
    for (const Layer& layer : stage) {
      h = relu(conv2d(h, parameter_var(rec, store, layer.weight), parameter_var(rec, store, layer.bias), 1, 1));
    }
    h = maxpool2d(h, 2, 2);
  }
  return h;
}

BranchOutput Branch::forward_embedding(const ParameterStore& store, const Var& feature_map) const {
  const Shape expected = config_.feature_shape(feature_map.shape().empty() ? 0 : feature_map.dim(0));
  if (feature_map.shape() != expected) {
    throw DimensionError(prefix_ + " head expects " + shape_string(expected) + ", got " +
                         shape_string(feature_map.shape()));
  }
  Recording& rec = feature_map.recording();
  Var h = flatten(feature_map);
  for (const Layer& layer : fcs_) {
    h = relu(linear(h, parameter_var(rec, store, layer.weight), parameter_var(rec, store, layer.bias)));
  }
  BranchOutput out;
  out.pre_norm = linear(h, parameter_var(rec, store, embed_.weight), parameter_var(rec, store, embed_.bias));
  out.embedding = l2_normalize(out.pre_norm);
  out.logits = linear(out.pre_norm, parameter_var(rec, store, classifier_.weight),
                      parameter_var(rec, store, classifier_.bias));
  return out;
}

}  // namespace semi3
