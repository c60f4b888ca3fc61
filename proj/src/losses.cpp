#include "semi3/losses.hpp"

#include "semi3/errors.hpp"
#include "semi3/ops.hpp"

#include <cmath>

namespace semi3 {

void LossWeights::validate() const {
  for (double v : {alpha, beta, gamma, m1, m2}) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError("loss weights and margins must be finite and >= 0");
  }
}

Var alignment_loss(const Var& f_image, const Var& f_edgemap) {
  return mean(row_squared_distance(f_image, f_edgemap));
}

Var contrastive_loss(const Var& fa, const Var& fb, const Tensor& similarity, double margin) {
  if (margin < 0.0) throw ContractError("contrastive margin must be >= 0");
  if (fa.shape().size() != 2 || similarity.shape() != Shape{fa.dim(0)}) {
    throw DimensionError("contrastive_loss: labels " + shape_string(similarity.shape()) + " vs embeddings " +
                         shape_string(fa.shape()));
  }
  Recording& rec = fa.recording();
  Tensor dissimilarity = similarity;
  dissimilarity.values().array() = 1.0 - similarity.values().array();
  const Var d = row_distance(fa, fb);
  const Var positive = mul(rec.constant(similarity), d);
  const Var negative = mul(rec.constant(std::move(dissimilarity)), relu(affine(d, -1.0, margin)));
  return mean(positive + negative);
}

Var cross_entropy_loss(const Var& logits, const Tensor& onehot) {
  return softmax_cross_entropy(logits, logits.recording().constant(onehot));
}

HybridLoss hybrid_loss(const TripleOutput& out, const TripleLabels& labels, const LossWeights& weights) {
  const Var ce_s = cross_entropy_loss(out.logits_sketch, labels.onehot_sketch);
  const Var ce_i = cross_entropy_loss(out.logits_image, labels.onehot_image);
  const Var ce_e = cross_entropy_loss(out.logits_edgemap, labels.onehot_image);
  const Var si = contrastive_loss(out.f_sketch, out.f_image, labels.similarity, weights.m2);
  const Var align = alignment_loss(out.f_image, out.f_edgemap);
  const Var se = contrastive_loss(out.f_sketch, out.f_edgemap, labels.similarity, weights.m1);

  HybridLoss loss;
  loss.components = {ce_s.value().item(), ce_i.value().item(), ce_e.value().item(),
                     si.value().item(),   align.value().item(), se.value().item()};
  loss.total = ce_s + ce_i + ce_e;
  if (weights.alpha != 0.0) loss.total = loss.total + weights.alpha * si;
  if (weights.beta != 0.0) loss.total = loss.total + weights.beta * align;
  if (weights.gamma != 0.0) loss.total = loss.total + weights.gamma * se;
  return loss;
}

double combine(const LossComponents& c, const LossWeights& w) {
  return c.ce_sketch + c.ce_image + c.ce_edgemap + w.alpha * c.sketch_image + w.beta * c.alignment +
         w.gamma * c.sketch_edgemap;
}

Tensor onehot(const std::vector<std::size_t>& categories, std::size_t num_classes) {
  Tensor t({categories.size(), num_classes});
  for (std::size_t i = 0; i < categories.size(); ++i) {
    if (categories[i] >= num_classes) {
      throw ContractError("category " + std::to_string(categories[i]) + " outside " + std::to_string(num_classes) +
                          " classes");
    }
    t[i * num_classes + categories[i]] = 1.0;
  }
  return t;
}

}  // namespace semi3
