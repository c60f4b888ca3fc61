#pragma once

#include "semi3/autodiff.hpp"

namespace semi3 {

struct LossWeights {
  double alpha = 10.0;   // sketch-image contrastive
  double beta = 100.0;   // image-edgemap alignment
  double gamma = 10.0;   // sketch-edgemap contrastive
  double m1 = 0.3;       // sketch-edgemap margin
  double m2 = 0.3;       // sketch-image margin

  void validate() const;
};

// Embeddings and logits of the three branches for one batch.
struct TripleOutput {
  Var f_sketch, f_image, f_edgemap;
  Var logits_sketch, logits_image, logits_edgemap;
};

struct TripleLabels {
  Tensor onehot_sketch;   // [N, K]
  Tensor onehot_image;    // [N, K]; the edgemap shares the image's label
  Tensor similarity;      // [N], 1 when sketch and image share a category
};

struct LossComponents {
  double ce_sketch = 0.0;
  double ce_image = 0.0;
  double ce_edgemap = 0.0;
  double sketch_image = 0.0;
  double alignment = 0.0;
  double sketch_edgemap = 0.0;

  double cross_entropy() const { return ce_sketch + ce_image + ce_edgemap; }
};

// Batch mean of ||fI - fE||^2.
Var alignment_loss(const Var& f_image, const Var& f_edgemap);

// Batch mean of l*d + (1-l)*max(0, margin - d) with Euclidean d.
Var contrastive_loss(const Var& fa, const Var& fb, const Tensor& similarity, double margin);

Var cross_entropy_loss(const Var& logits, const Tensor& onehot);

struct HybridLoss {
  Var total;
  LossComponents components;
};

// Sum of the three cross-entropies plus alpha*L_SI + beta*L_align + gamma*L_SE.
// Terms with a zero weight are left out of the graph.
HybridLoss hybrid_loss(const TripleOutput& outputs, const TripleLabels& labels, const LossWeights& weights);

// Scalar form of the same combination, for recomputing logged totals.
double combine(const LossComponents& components, const LossWeights& weights);

Tensor onehot(const std::vector<std::size_t>& categories, std::size_t num_classes);

}  // namespace semi3
