#pragma once

#include "semi3/autodiff.hpp"
#include "semi3/backbone.hpp"
#include "semi3/param_store.hpp"

#include <array>
#include <string>
#include <utility>

namespace semi3 {

/// Channel attention: GAP -> FC(c -> c/r) -> ReLU -> FC(c/r -> c) -> sigmoid.
/// Weights live in the store under "attention.<role>.".
class AttentionModule {
 public:
  AttentionModule(Role role, std::size_t channels, std::size_t reduction);

  static AttentionModule build(Role role, std::size_t channels, std::size_t reduction, ParameterStore& store);

  std::size_t channels() const noexcept { return channels_; }
  std::size_t reduction() const noexcept { return reduction_; }
  std::size_t hidden() const noexcept { return channels_ / reduction_; }
  const std::string& prefix() const noexcept { return prefix_; }
  std::vector<std::string> parameter_names() const;

  const std::string& fc1_weight() const noexcept { return names_[0]; }
  const std::string& fc1_bias() const noexcept { return names_[1]; }
  const std::string& fc2_weight() const noexcept { return names_[2]; }
  const std::string& fc2_bias() const noexcept { return names_[3]; }

 private:
  std::size_t channels_;
  std::size_t reduction_;
  std::string prefix_;
  std::array<std::string, 4> names_;
};

// [N, C, h, w] -> [N, C] mask with entries in (0, 1).
Var attention_mask(const ParameterStore& store, const AttentionModule& module, const Var& x);

// Element-wise product of the two branch masks.
Var co_mask(const Var& image_mask, const Var& edgemap_mask);

struct CoAttentionOutput {
  Var image;
  Var edgemap;
  Var image_mask;
  Var edgemap_mask;
  Var co_mask;
};

// Both feature maps are rescaled by the same co-mask.
CoAttentionOutput apply_co_attention(const ParameterStore& store, const AttentionModule& image_attention,
                                     const AttentionModule& edgemap_attention, const Var& image_features,
                                     const Var& edgemap_features);

// The sketch branch reweights itself with its own mask.
Var apply_self_attention(const ParameterStore& store, const AttentionModule& sketch_attention,
                         const Var& sketch_features);

}  // namespace semi3
