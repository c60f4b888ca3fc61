#pragma once

#include "semi3/backbone.hpp"
#include "semi3/co_attention.hpp"
#include "semi3/losses.hpp"
#include "semi3/param_store.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>

namespace semi3 {

struct ModelConfig {
  BackboneConfig backbone;
  std::size_t reduction = 4;
  ShareStrategy share = ShareStrategy::kSemi3;
  bool use_co_attention = true;
  LossWeights weights;
  std::uint64_t seed = 7;

  void validate() const;
};

struct PairEmbedding {
  BranchOutput image;
  BranchOutput edgemap;
};

/// Three branches, three attention modules and the tying plan over one
/// parameter store. Construction registers every parameter untied.
class Semi3Model {
 public:
  explicit Semi3Model(ModelConfig config);

  Semi3Model(Semi3Model&&) = default;
  Semi3Model& operator=(Semi3Model&&) = default;

  // Alias parameters per the share plan. Velocity buffers restart at zero.
  void tie();
  bool tied() const noexcept { return !store_.groups().empty() || plan_.rules.empty(); }

  TripleOutput forward_triple(Recording& rec, const Tensor& sketches, const Tensor& images,
                              const Tensor& edgemaps) const;
  // One branch without attention, as used by pretraining.
  BranchOutput forward_single(Recording& rec, Role role, const Tensor& x) const;

  BranchOutput embed_sketches(Recording& rec, const Tensor& sketches) const;
  PairEmbedding embed_pairs(Recording& rec, const Tensor& images, const Tensor& edgemaps) const;

  const ModelConfig& config() const noexcept { return config_; }
  void set_use_co_attention(bool on) { config_.use_co_attention = on; }
  void set_loss_weights(const LossWeights& weights);

  ParameterStore& store() noexcept { return store_; }
  const ParameterStore& store() const noexcept { return store_; }
  const SharePlan& plan() const noexcept { return plan_; }
  const Branch& branch(Role role) const;
  const AttentionModule& attention(Role role) const;

  std::vector<std::string> branch_parameter_names() const;
  std::vector<std::string> attention_parameter_names() const;

 private:
  ModelConfig config_;
  ParameterStore store_;
  SharePlan plan_;
  std::vector<Branch> branches_;
  std::vector<AttentionModule> attention_;
};

// Little-endian binary layout:
//   "S3NET001"
//   u32 parameter count
//   per name: u32 name length, name bytes, u8 rank, u64 dims..., f64 values...
//   u32 group-entry count, per entry: u32 name length, name, u32 group length, group id
//   u32 config length, model configuration as key = value text
void save_checkpoint(const Semi3Model& model, const std::filesystem::path& path);
Semi3Model load_checkpoint(const std::filesystem::path& path);

}  // namespace semi3
