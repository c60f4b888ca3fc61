#include "oracles.hpp"
#include "semi3/errors.hpp"
#include "semi3/losses.hpp"
#include "semi3/model.hpp"
#include "semi3/ops.hpp"

#include <doctest.h>

#include <cmath>

using namespace semi3;

namespace {

Tensor unit_rows(std::mt19937_64& rng, std::size_t n, std::size_t d) {
  Tensor t = oracle::random_tensor(rng, {n, d});
  auto m = t.matrix(n, d);
  for (Eigen::Index r = 0; r < m.rows(); ++r) m.row(r).normalize();
  return t;
}

double scalar(const Var& v) { return v.value().item(); }

}  // namespace

TEST_CASE("alignment loss examples") {
  Recording rec;
  Tensor a({1, 2}, {1, 0}), b({1, 2}, {0, 1}), c({1, 2}, {-1, 0});
  CHECK(scalar(alignment_loss(rec.constant(a), rec.constant(a))) == 0.0);
  CHECK(std::abs(scalar(alignment_loss(rec.constant(a), rec.constant(b))) - 2.0) <= 1e-15);
  CHECK(std::abs(scalar(alignment_loss(rec.constant(a), rec.constant(c))) - 4.0) <= 1e-15);
  CHECK_THROWS_AS(alignment_loss(rec.constant(a), rec.constant(Tensor({1, 3}))), DimensionError);
}

TEST_CASE("contrastive loss examples") {
  Recording rec;
  Tensor a({1, 2}, {1, 0}), b({1, 2}, {0, 1});
  CHECK(scalar(contrastive_loss(rec.constant(a), rec.constant(a), Tensor({1}, {1.0}), 0.3)) == 0.0);
  CHECK(scalar(contrastive_loss(rec.constant(a), rec.constant(b), Tensor({1}, {0.0}), 0.3)) == 0.0);
  CHECK(std::abs(scalar(contrastive_loss(rec.constant(a), rec.constant(a), Tensor({1}, {0.0}), 0.3)) - 0.3) <= 1e-15);
  CHECK(std::abs(scalar(contrastive_loss(rec.constant(a), rec.constant(b), Tensor({1}, {1.0}), 0.3)) -
                 std::sqrt(2.0)) <= 1e-15);
  CHECK_THROWS_AS(contrastive_loss(rec.constant(a), rec.constant(b), Tensor({1}, {1.0}), -0.1), ContractError);
  CHECK_THROWS_AS(contrastive_loss(rec.constant(a), rec.constant(b), Tensor({2}), 0.3), DimensionError);

  // Coincident positive pair: gradient is the zero subgradient.
  auto fa = rec.variable(a);
  auto g = rec.backward(contrastive_loss(fa, rec.constant(a), Tensor({1}, {1.0}), 0.3));
  CHECK(g.of(fa).values().norm() == 0.0);
}

TEST_CASE("pair losses: symmetry and range over random unit vectors") {
  std::mt19937_64 rng(23);
  Recording rec;
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = oracle::pick(rng, 1, 6), d = oracle::pick(rng, 1, 12);
    Tensor a = unit_rows(rng, n, d), b = unit_rows(rng, n, d);
    Tensor sim({n});
    for (std::size_t i = 0; i < n; ++i) sim[i] = static_cast<double>(oracle::pick(rng, 0, 1));
    const double margin = std::uniform_real_distribution<double>(0.0, 3.0)(rng);
    const double ab = scalar(alignment_loss(rec.constant(a), rec.constant(b)));
    CHECK(ab == scalar(alignment_loss(rec.constant(b), rec.constant(a))));
    CHECK(ab >= 0.0);
    CHECK(ab <= 4.0 + 1e-12);
    const double c = scalar(contrastive_loss(rec.constant(a), rec.constant(b), sim, margin));
    CHECK(c == scalar(contrastive_loss(rec.constant(b), rec.constant(a), sim, margin)));
    CHECK(c >= 0.0);
    CHECK(c <= std::max(2.0, margin) + 1e-12);

    // Unit rows: squared distance equals 2 - 2 cos.
    double oracle_mean = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      double dot = 0.0;
      for (std::size_t k = 0; k < d; ++k) dot += a.at({r, k}) * b.at({r, k});
      oracle_mean += 2.0 - 2.0 * dot;
    }
    CHECK(std::abs(ab - oracle_mean / static_cast<double>(n)) <= 1e-12);
  }
}

TEST_CASE("hybrid loss weighting") {
  LossComponents c;
  c.ce_sketch = 0.5;
  c.ce_image = 0.25;
  c.ce_edgemap = 0.25;
  c.sketch_image = 0.2;
  c.alignment = 0.01;
  c.sketch_edgemap = 0.1;
  CHECK(std::abs(combine(c, LossWeights{}) - 5.0) <= 1e-12);
  CHECK(combine(LossComponents{}, LossWeights{}) == 0.0);

  std::mt19937_64 rng(24);
  std::uniform_real_distribution<double> u(0.0, 5.0);
  for (int trial = 0; trial < 100; ++trial) {
    LossComponents r{u(rng), u(rng), u(rng), u(rng), u(rng), u(rng)};
    LossWeights w{u(rng), u(rng), u(rng), 0.3, 0.3};
    const double direct = r.ce_sketch + r.ce_image + r.ce_edgemap + w.alpha * r.sketch_image +
                          w.beta * r.alignment + w.gamma * r.sketch_edgemap;
    CHECK(std::abs(combine(r, w) - direct) <= 1e-12);
  }

  LossWeights bad;
  bad.beta = -1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("onehot") {
  Tensor t = onehot({2, 0}, 3);
  CHECK(bitwise_equal(t, Tensor({2, 3}, {0, 0, 1, 1, 0, 0})));
  CHECK_THROWS_AS(onehot({3}, 3), ContractError);
}

namespace {

struct Batch {
  TripleOutput out;
  TripleLabels labels;
};

Batch make_batch(const std::vector<Var>& leaves) {
  Batch b;
  b.out.f_sketch = l2_normalize(leaves[0]);
  b.out.f_image = l2_normalize(leaves[1]);
  b.out.f_edgemap = l2_normalize(leaves[2]);
  b.out.logits_sketch = leaves[3];
  b.out.logits_image = leaves[4];
  b.out.logits_edgemap = leaves[5];
  b.labels.onehot_sketch = onehot({0, 2, 1, 1}, 3);
  b.labels.onehot_image = onehot({0, 1, 1, 2}, 3);
  b.labels.similarity = Tensor({4}, {1, 0, 1, 0});
  return b;
}

}  // namespace

TEST_CASE("hybrid loss total equals the weighted components; beta = 0 drops alignment bitwise") {
  std::mt19937_64 rng(25);
  std::vector<Tensor> values;
  for (int i = 0; i < 3; ++i) values.push_back(oracle::random_tensor(rng, {4, 6}));
  for (int i = 0; i < 3; ++i) values.push_back(oracle::random_tensor(rng, {4, 3}));

  {
    Recording rec;
    std::vector<Var> leaves;
    for (const auto& v : values) leaves.push_back(rec.variable(v));
    Batch b = make_batch(leaves);
    auto loss = hybrid_loss(b.out, b.labels, LossWeights{});
    CHECK(std::abs(loss.total.value().item() - combine(loss.components, LossWeights{})) <= 1e-12);
  }

  LossWeights no_align;
  no_align.beta = 0.0;
  Recording r1, r2;
  std::vector<Var> l1, l2;
  for (const auto& v : values) {
    l1.push_back(r1.variable(v));
    l2.push_back(r2.variable(v));
  }
  Batch b1 = make_batch(l1);
  auto g1 = r1.backward(hybrid_loss(b1.out, b1.labels, no_align).total);

  Batch b2 = make_batch(l2);
  const Var manual = cross_entropy_loss(b2.out.logits_sketch, b2.labels.onehot_sketch) +
                     cross_entropy_loss(b2.out.logits_image, b2.labels.onehot_image) +
                     cross_entropy_loss(b2.out.logits_edgemap, b2.labels.onehot_image) +
                     no_align.alpha * contrastive_loss(b2.out.f_sketch, b2.out.f_image, b2.labels.similarity, 0.3) +
                     no_align.gamma * contrastive_loss(b2.out.f_sketch, b2.out.f_edgemap, b2.labels.similarity, 0.3);
  auto g2 = r2.backward(manual);
  for (std::size_t i = 0; i < l1.size(); ++i) CHECK(bitwise_equal(g1.of(l1[i]), g2.of(l2[i])));
}
