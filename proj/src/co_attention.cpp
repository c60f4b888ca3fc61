#include "semi3/co_attention.hpp"

#include "semi3/errors.hpp"
#include "semi3/ops.hpp"

#include <cmath>

namespace semi3 {

AttentionModule::AttentionModule(Role role, std::size_t channels, std::size_t reduction)
    : channels_(channels), reduction_(reduction), prefix_("attention." + to_string(role) + ".") {
  if (reduction == 0 || channels == 0 || channels % reduction != 0) {
    throw ConfigError("attention reduction " + std::to_string(reduction) + " must divide channel count " +
                      std::to_string(channels));
  }
  names_ = {prefix_ + "fc1.weight", prefix_ + "fc1.bias", prefix_ + "fc2.weight", prefix_ + "fc2.bias"};
}

AttentionModule AttentionModule::build(Role role, std::size_t channels, std::size_t reduction,
                                       ParameterStore& store) {
  AttentionModule module(role, channels, reduction);
  const std::size_t hidden = module.hidden();
  store.add(module.fc1_weight(), {hidden, channels}, Init::gaussian(std::sqrt(2.0 / static_cast<double>(channels))));
  store.add(module.fc1_bias(), {hidden}, Init::zeros());
  store.add(module.fc2_weight(), {channels, hidden}, Init::gaussian(std::sqrt(1.0 / static_cast<double>(hidden))));
  store.add(module.fc2_bias(), {channels}, Init::zeros());
  return module;
}

std::vector<std::string> AttentionModule::parameter_names() const { return {names_.begin(), names_.end()}; }

Var attention_mask(const ParameterStore& store, const AttentionModule& module, const Var& x) {
  if (x.shape().size() != 4 || x.dim(1) != module.channels()) {
    throw DimensionError(module.prefix() + " expects " + std::to_string(module.channels()) +
                         " channels, got " + shape_string(x.shape()));
  }
  Recording& rec = x.recording();
  const Var pooled = global_avg_pool(x);
  const Var hidden = relu(linear(pooled, parameter_var(rec, store, module.fc1_weight()),
                                 parameter_var(rec, store, module.fc1_bias())));
  return sigmoid(linear(hidden, parameter_var(rec, store, module.fc2_weight()),
                        parameter_var(rec, store, module.fc2_bias())));
}

Var co_mask(const Var& image_mask, const Var& edgemap_mask) { return mul(image_mask, edgemap_mask); }

CoAttentionOutput apply_co_attention(const ParameterStore& store, const AttentionModule& image_attention,
                                     const AttentionModule& edgemap_attention, const Var& image_features,
                                     const Var& edgemap_features) {
  if (image_features.shape() != edgemap_features.shape()) {
    throw DimensionError("co-attention inputs differ: " + shape_string(image_features.shape()) + " vs " +
                         shape_string(edgemap_features.shape()));
  }
  CoAttentionOutput out;
  out.image_mask = attention_mask(store, image_attention, image_features);
  out.edgemap_mask = attention_mask(store, edgemap_attention, edgemap_features);
  out.co_mask = co_mask(out.image_mask, out.edgemap_mask);
  out.image = channel_scale(image_features, out.co_mask);
  out.edgemap = channel_scale(edgemap_features, out.co_mask);
  return out;
}

Var apply_self_attention(const ParameterStore& store, const AttentionModule& sketch_attention,
                         const Var& sketch_features) {
  return channel_scale(sketch_features, attention_mask(store, sketch_attention, sketch_features));
}

}  // namespace semi3
