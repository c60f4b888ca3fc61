#include "semi3/grad_check.hpp"

#include "semi3/co_attention.hpp"
#include "semi3/losses.hpp"
#include "semi3/ops.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace semi3 {
namespace {

double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max(1.0, std::abs(numeric));
}

Tensor uniform(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = dist(rng);
  return t;
}

// Contracts a tensor-valued op against a fixed random weighting so every
// output element contributes to the scalar.
LossBuilder projected(std::function<Var(const std::vector<Var>&)> op, Tensor weights) {
  return [op = std::move(op), weights = std::move(weights)](const std::vector<Var>& in) {
    const Var out = op(in);
    return sum(mul(out, out.recording().constant(weights.reshaped(out.shape()))));
  };
}

}  // namespace

GradCheckResult check_gradients(const std::string& name, const std::vector<Tensor>& inputs, const LossBuilder& loss,
                                double step, double tolerance) {
  GradCheckResult result{name, 0.0, tolerance, 0};
  std::vector<Tensor> analytic;
  {
    Recording rec;
    std::vector<Var> vars;
    for (const Tensor& t : inputs) vars.push_back(rec.variable(t));
    const GradMap grads = rec.backward(loss(vars));
    for (const Var& v : vars) analytic.push_back(grads.of(v));
  }
  auto evaluate = [&](const std::vector<Tensor>& point) {
    Recording rec;
    std::vector<Var> vars;
    for (const Tensor& t : point) vars.push_back(rec.constant(t));
    return loss(vars).value().item();
  };
  std::vector<Tensor> point = inputs;
  for (std::size_t k = 0; k < point.size(); ++k) {
    for (std::size_t i = 0; i < point[k].size(); ++i) {
      const double saved = point[k][i];
      point[k][i] = saved + step;
      const double up = evaluate(point);
      point[k][i] = saved - step;
      const double down = evaluate(point);
      point[k][i] = saved;
      result.max_error = std::max(result.max_error, relative_error(analytic[k][i], (up - down) / (2.0 * step)));
      ++result.coordinates;
    }
  }
  return result;
}

GradCheckResult check_parameter_gradients(const std::string& name, Semi3Model& model,
                                          const std::function<Var(Recording&)>& loss, double step, double tolerance) {
  GradCheckResult result{name, 0.0, tolerance, 0};
  GradMap grads;
  Recording rec;
  grads = rec.backward(loss(rec));
  for (const auto& p : model.store().unique_parameters()) {
    const Tensor analytic = grads.of(*p);
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double saved = p->value[i];
      p->value[i] = saved + step;
      Recording up_rec;
      const double up = loss(up_rec).value().item();
      p->value[i] = saved - step;
      Recording down_rec;
      const double down = loss(down_rec).value().item();
      p->value[i] = saved;
      result.max_error = std::max(result.max_error, relative_error(analytic[i], (up - down) / (2.0 * step)));
      ++result.coordinates;
    }
  }
  return result;
}

std::vector<GradCheckResult> run_gradient_suite(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<GradCheckResult> results;
  auto check = [&](const std::string& name, std::vector<Tensor> inputs, const LossBuilder& loss) {
    results.push_back(check_gradients(name, inputs, loss));
  };
  auto proj = [&](Shape out_shape, std::function<Var(const std::vector<Var>&)> op) {
    return projected(std::move(op), uniform(std::move(out_shape), rng));
  };

  check("conv2d pad1 stride1", {uniform({2, 2, 5, 5}, rng), uniform({3, 2, 3, 3}, rng), uniform({3}, rng)},
      proj({2, 3, 5, 5}, [](auto& v) { return conv2d(v[0], v[1], v[2], 1, 1); }));
  check("conv2d pad0 stride2", {uniform({1, 2, 7, 7}, rng), uniform({2, 2, 3, 3}, rng), uniform({2}, rng)},
      proj({1, 2, 3, 3}, [](auto& v) { return conv2d(v[0], v[1], v[2], 2, 0); }));
  check("maxpool2d", {uniform({2, 3, 6, 6}, rng)}, proj({2, 3, 3, 3}, [](auto& v) { return maxpool2d(v[0], 2, 2); }));
  check("linear", {uniform({3, 5}, rng), uniform({4, 5}, rng), uniform({4}, rng)},
      proj({3, 4}, [](auto& v) { return linear(v[0], v[1], v[2]); }));
  check("relu", {uniform({4, 6}, rng)}, proj({4, 6}, [](auto& v) { return relu(v[0]); }));
  check("sigmoid", {uniform({4, 6}, rng, -4.0, 4.0)}, proj({4, 6}, [](auto& v) { return sigmoid(v[0]); }));
  check("global_avg_pool", {uniform({2, 3, 4, 5}, rng)}, proj({2, 3}, [](auto& v) { return global_avg_pool(v[0]); }));
  check("elementwise_mul", {uniform({3, 4}, rng), uniform({3, 4}, rng)},
      proj({3, 4}, [](auto& v) { return mul(v[0], v[1]); }));
  check("channel_scale", {uniform({2, 3, 4, 4}, rng), uniform({2, 3}, rng)},
      proj({2, 3, 4, 4}, [](auto& v) { return channel_scale(v[0], v[1]); }));
  check("l2_normalize", {uniform({3, 5}, rng)}, proj({3, 5}, [](auto& v) { return l2_normalize(v[0]); }));
  check("add/sub/affine", {uniform({2, 3}, rng), uniform({2, 3}, rng)},
      proj({2, 3}, [](auto& v) { return affine(add(v[0], v[1]), 1.7, 0.2) - v[1]; }));
  check("flatten/mean", {uniform({2, 2, 3}, rng)}, [](auto& v) { return mean(mul(flatten(v[0]), flatten(v[0]))); });
  check("row_squared_distance", {uniform({3, 4}, rng), uniform({3, 4}, rng)},
      proj({3}, [](auto& v) { return row_squared_distance(v[0], v[1]); }));
  check("row_distance", {uniform({3, 4}, rng), uniform({3, 4}, rng)},
      proj({3}, [](auto& v) { return row_distance(v[0], v[1]); }));
  {
    Tensor labels = onehot({2, 0, 3}, 4);
    check("softmax_cross_entropy", {uniform({3, 4}, rng, -3.0, 3.0)},
        [labels](auto& v) { return cross_entropy_loss(v[0], labels); });
  }
  check("composite conv2d-relu-gap-sum", {uniform({1, 2, 5, 5}, rng), uniform({3, 2, 3, 3}, rng), uniform({3}, rng)},
      [](auto& v) { return sum(global_avg_pool(relu(conv2d(v[0], v[1], v[2], 1, 1)))); });

  // Attention: module weights enter as plain inputs here.
  {
    const std::size_t c = 8, r = 4;
    const Tensor w1i = uniform({c / r, c}, rng), b1i = uniform({c / r}, rng), w2i = uniform({c, c / r}, rng),
                 b2i = uniform({c}, rng);
    const Tensor w1e = uniform({c / r, c}, rng), b1e = uniform({c / r}, rng), w2e = uniform({c, c / r}, rng),
                 b2e = uniform({c}, rng);
    auto mask = [](const Var& x, const Var& w1, const Var& b1, const Var& w2, const Var& b2) {
      return sigmoid(linear(relu(linear(global_avg_pool(x), w1, b1)), w2, b2));
    };
    check("attention_mask", {uniform({2, c, 3, 3}, rng), w1i, b1i, w2i, b2i},
        proj({2, c}, [mask](auto& v) { return mask(v[0], v[1], v[2], v[3], v[4]); }));
    check("apply_co_attention",
        {uniform({2, c, 3, 3}, rng), uniform({2, c, 3, 3}, rng), w1i, b1i, w2i, b2i, w1e, b1e, w2e, b2e},
        [mask, wi = uniform({2, c, 3, 3}, rng), we = uniform({2, c, 3, 3}, rng)](auto& v) {
          const Var co = co_mask(mask(v[0], v[2], v[3], v[4], v[5]), mask(v[1], v[6], v[7], v[8], v[9]));
          Recording& rec = v[0].recording();
          return sum(mul(channel_scale(v[0], co), rec.constant(wi))) +
                 sum(mul(channel_scale(v[1], co), rec.constant(we)));
        });
  }

  // Loss terms on unit embeddings.
  {
    const Tensor sim({4}, {1.0, 0.0, 1.0, 0.0});
    check("alignment_loss", {uniform({4, 6}, rng), uniform({4, 6}, rng)},
        [](auto& v) { return alignment_loss(l2_normalize(v[0]), l2_normalize(v[1])); });
    // Margin 1.5 keeps the negative hinge active for random unit pairs.
    check("contrastive_loss", {uniform({4, 6}, rng), uniform({4, 6}, rng)},
        [sim](auto& v) { return contrastive_loss(l2_normalize(v[0]), l2_normalize(v[1]), sim, 1.5); });
  }

  // End to end through the whole three-branch model.
  {
    ModelConfig config;
    config.seed = seed;
    Semi3Model model(config);
    model.tie();
    // Non-zero biases so no parameter sits on a ReLU kink by construction.
    for (const auto& p : model.store().unique_parameters()) {
      if (p->value.rank() == 1) p->value = uniform(p->value.shape(), rng, -0.1, 0.1);
    }
    const BackboneConfig& bb = config.backbone;
    const Shape in{2, bb.in_channels, bb.input_size, bb.input_size};
    const Tensor s = uniform(in, rng, 0.0, 1.0), i = uniform(in, rng, 0.0, 1.0), e = uniform(in, rng, 0.0, 1.0);
    TripleLabels labels{onehot({1, 4}, bb.num_classes), onehot({1, 6}, bb.num_classes), Tensor({2}, {1.0, 0.0})};
    LossWeights weights;
    weights.m1 = weights.m2 = 1.5;
    results.push_back(check_parameter_gradients("end-to-end hybrid loss", model, [&](Recording& rec) {
      return hybrid_loss(model.forward_triple(rec, s, i, e), labels, weights).total;
    }));
  }
  return results;
}

}  // namespace semi3
