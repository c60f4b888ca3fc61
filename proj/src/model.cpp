#include "semi3/model.hpp"

#include "semi3/errors.hpp"

namespace semi3 {
namespace {

constexpr Role kRoles[] = {Role::kSketch, Role::kImage, Role::kEdgemap};

std::size_t slot(Role role) { return static_cast<std::size_t>(role); }

}  // namespace

void ModelConfig::validate() const {
  backbone.validate();
  weights.validate();
  const std::size_t channels = backbone.feature_channels();
  if (reduction == 0 || channels % reduction != 0) {
    throw ConfigError("reduction " + std::to_string(reduction) + " must divide final channel count " +
                      std::to_string(channels));
  }
}

Semi3Model::Semi3Model(ModelConfig config)
    : config_(std::move(config)), store_(config_.seed), plan_(SharePlan::make(config_.share)) {
  config_.validate();
  for (Role role : kRoles) branches_.push_back(Branch::build(config_.backbone, role, store_));
  const std::size_t channels = config_.backbone.feature_channels();
  for (Role role : kRoles) attention_.push_back(AttentionModule::build(role, channels, config_.reduction, store_));
}

void Semi3Model::tie() {
  store_.tie(plan_);
  for (const auto& p : store_.unique_parameters()) p->velocity = Tensor(p->value.shape());
}

void Semi3Model::set_loss_weights(const LossWeights& weights) {
  weights.validate();
  config_.weights = weights;
}

const Branch& Semi3Model::branch(Role role) const { return branches_.at(slot(role)); }
const AttentionModule& Semi3Model::attention(Role role) const { return attention_.at(slot(role)); }

std::vector<std::string> Semi3Model::branch_parameter_names() const {
  std::vector<std::string> names;
  for (const Branch& b : branches_) {
    const auto own = b.parameter_names();
    names.insert(names.end(), own.begin(), own.end());
  }
  return names;
}

std::vector<std::string> Semi3Model::attention_parameter_names() const {
  std::vector<std::string> names;
  for (const AttentionModule& a : attention_) {
    const auto own = a.parameter_names();
    names.insert(names.end(), own.begin(), own.end());
  }
  return names;
}

BranchOutput Semi3Model::forward_single(Recording& rec, Role role, const Tensor& x) const {
  const Branch& b = branch(role);
  return b.forward_embedding(store_, b.forward_feature_map(store_, rec.constant(x)));
}

BranchOutput Semi3Model::embed_sketches(Recording& rec, const Tensor& sketches) const {
  const Branch& b = branch(Role::kSketch);
  Var features = b.forward_feature_map(store_, rec.constant(sketches));
  if (config_.use_co_attention) features = apply_self_attention(store_, attention(Role::kSketch), features);
  return b.forward_embedding(store_, features);
}

PairEmbedding Semi3Model::embed_pairs(Recording& rec, const Tensor& images, const Tensor& edgemaps) const {
  if (images.shape() != edgemaps.shape()) {
    throw DimensionError("image batch " + shape_string(images.shape()) + " vs edgemap batch " +
                         shape_string(edgemaps.shape()));
  }
  const Branch& bi = branch(Role::kImage);
  const Branch& be = branch(Role::kEdgemap);
  Var fi = bi.forward_feature_map(store_, rec.constant(images));
  Var fe = be.forward_feature_map(store_, rec.constant(edgemaps));
  if (config_.use_co_attention) {
    const CoAttentionOutput co = apply_co_attention(store_, attention(Role::kImage), attention(Role::kEdgemap), fi, fe);
    fi = co.image;
    fe = co.edgemap;
  }
  return {bi.forward_embedding(store_, fi), be.forward_embedding(store_, fe)};
}

TripleOutput Semi3Model::forward_triple(Recording& rec, const Tensor& sketches, const Tensor& images,
                                        const Tensor& edgemaps) const {
  if (sketches.shape() != images.shape() || images.shape() != edgemaps.shape()) {
    throw DimensionError("triple shapes differ: " + shape_string(sketches.shape()) + ", " +
                         shape_string(images.shape()) + ", " + shape_string(edgemaps.shape()));
  }
  const BranchOutput s = embed_sketches(rec, sketches);
  const PairEmbedding ie = embed_pairs(rec, images, edgemaps);
  return {s.embedding, ie.image.embedding, ie.edgemap.embedding, s.logits, ie.image.logits, ie.edgemap.logits};
}

}  // namespace semi3
