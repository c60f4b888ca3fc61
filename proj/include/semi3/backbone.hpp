#pragma once

#include "semi3/autodiff.hpp"
#include "semi3/param_store.hpp"

#include <string>
#include <vector>

namespace semi3 {

enum class Role { kSketch, kImage, kEdgemap };

std::string to_string(Role role);
Role parse_role(const std::string& text);

// `convs` 3x3 convolutions (pad 1, each followed by ReLU), then a 2x2
// max-pool with stride 2.
struct Stage {
  std::size_t convs = 1;
  std::size_t channels = 8;
};

/// Layout shared by all three branches.
struct BackboneConfig {
  std::size_t in_channels = 3;
  std::size_t input_size = 16;
  std::vector<Stage> stages{{1, 8}, {1, 16}};
  std::vector<std::size_t> fc_dims{64};
  std::size_t embed_dim = 32;
  std::size_t num_classes = 8;

  // VGG19 feature extractor and FC widths with a 256-d embedding.
  static BackboneConfig vgg19(std::size_t num_classes);

  // Throws ConfigError when the layout is degenerate.
  void validate() const;
  std::size_t feature_channels() const;
  // Spatial side after the last pool.
  std::size_t feature_size() const;
  std::size_t flattened_size() const;
  Shape feature_shape(std::size_t batch) const;
};

struct BranchOutput {
  Var embedding;  // unit rows
  Var logits;
  Var pre_norm;  // embedding-layer output before L2 normalization
};

/// One feature-mapping branch plus its embedding head. Parameters live in the
/// store under "<role>." names; tying is the store's concern.
class Branch {
 public:
  Branch(const BackboneConfig& config, Role role);

  static Branch build(const BackboneConfig& config, Role role, ParameterStore& store);

  Role role() const noexcept { return role_; }
  const std::string& prefix() const noexcept { return prefix_; }
  const BackboneConfig& config() const noexcept { return config_; }
  std::vector<std::string> parameter_names() const;
  std::vector<std::string> conv_parameter_names() const;
  std::vector<std::string> head_parameter_names() const;

  // Output of the last pooling stage.
  Var forward_feature_map(const ParameterStore& store, const Var& x) const;
  BranchOutput forward_embedding(const ParameterStore& store, const Var& feature_map) const;

 private:
  struct Layer {
    std::string weight;
    std::string bias;
  };

  BackboneConfig config_;
  Role role_;
  std::string prefix_;
  std::vector<std::vector<Layer>> convs_;
  std::vector<Layer> fcs_;
  Layer embed_;
  Layer classifier_;
};

Var parameter_var(Recording& recording, const ParameterStore& store, const std::string& name);

}  // namespace semi3
