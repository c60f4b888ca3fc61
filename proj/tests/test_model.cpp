#include "oracles.hpp"
#include "semi3/errors.hpp"
#include "semi3/model.hpp"
#include "semi3/ops.hpp"

#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>

using namespace semi3;
namespace fs = std::filesystem;

namespace {

struct Inputs {
  Tensor s, i, e;
};

Inputs random_inputs(std::mt19937_64& rng, std::size_t n, std::size_t side = 16) {
  return {oracle::random_tensor(rng, {n, 3, side, side}, 0.0, 1.0), oracle::random_tensor(rng, {n, 3, side, side}, 0.0, 1.0),
          oracle::random_tensor(rng, {n, 3, side, side}, 0.0, 1.0)};
}

fs::path temp_path(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "semi3_tests";
  fs::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("forward_triple shapes and unit embeddings") {
  Semi3Model model{ModelConfig{}};
  model.tie();
  std::mt19937_64 rng(40);
  Inputs in = random_inputs(rng, 2);
  Recording rec;
  TripleOutput out = model.forward_triple(rec, in.s, in.i, in.e);
  for (const Var* f : {&out.f_sketch, &out.f_image, &out.f_edgemap}) {
    CHECK(f->shape() == Shape{2, 32});
    for (Eigen::Index r = 0; r < 2; ++r) CHECK(std::abs(f->value().matrix(2, 32).row(r).norm() - 1.0) <= 1e-9);
  }
  for (const Var* l : {&out.logits_sketch, &out.logits_image, &out.logits_edgemap}) CHECK(l->shape() == Shape{2, 8});
  CHECK_THROWS_AS(model.forward_triple(rec, in.s, in.i, Tensor({1, 3, 16, 16})), DimensionError);

  Recording again;
  TripleOutput repeat = model.forward_triple(again, in.s, in.i, in.e);
  CHECK(bitwise_equal(repeat.f_image.value(), out.f_image.value()));
}

TEST_CASE("all_sharing with identical image and edgemap inputs gives identical embeddings") {
  ModelConfig c;
  c.share = ShareStrategy::kAllSharing;
  Semi3Model model(c);
  model.tie();
  // Co-attention masks come from distinct modules; make them equal too.
  for (const std::string suffix : {"fc1.weight", "fc1.bias", "fc2.weight", "fc2.bias"}) {
    model.store().get("attention.edgemap." + suffix)->value = model.store().get("attention.image." + suffix)->value;
  }
  std::mt19937_64 rng(41);
  Inputs in = random_inputs(rng, 2);
  Recording rec;
  TripleOutput out = model.forward_triple(rec, in.s, in.i, in.i);
  CHECK(bitwise_equal(out.f_image.value(), out.f_edgemap.value()));

  model.set_use_co_attention(false);
  Recording plain;
  out = model.forward_triple(plain, in.s, in.i, in.i);
  CHECK(bitwise_equal(out.f_image.value(), out.f_edgemap.value()));
}

TEST_CASE("forward_single equals the triple path without attention") {
  Semi3Model model{ModelConfig{}};
  model.tie();
  model.set_use_co_attention(false);
  std::mt19937_64 rng(42);
  Inputs in = random_inputs(rng, 3);
  Recording rec;
  TripleOutput out = model.forward_triple(rec, in.s, in.i, in.e);
  CHECK(bitwise_equal(model.forward_single(rec, Role::kSketch, in.s).embedding.value(), out.f_sketch.value()));
  CHECK(bitwise_equal(model.forward_single(rec, Role::kImage, in.i).embedding.value(), out.f_image.value()));
  CHECK(bitwise_equal(model.forward_single(rec, Role::kEdgemap, in.e).logits.value(), out.logits_edgemap.value()));
}

TEST_CASE("image embedding couples to the edgemap only through co-attention") {
  Semi3Model model{ModelConfig{}};
  model.tie();
  std::mt19937_64 rng(43);
  Inputs in = random_inputs(rng, 2);
  Tensor nudged = in.e;
  for (std::size_t k = 0; k < nudged.size(); ++k) nudged[k] += 0.05 * std::sin(static_cast<double>(k));

  for (bool on : {true, false}) {
    model.set_use_co_attention(on);
    Recording a, b;
    const Tensor f1 = model.embed_pairs(a, in.i, in.e).image.embedding.value();
    const Tensor f2 = model.embed_pairs(b, in.i, nudged).image.embedding.value();
    CHECK(bitwise_equal(f1, f2) == !on);
  }
}

TEST_CASE("model config validation") {
  ModelConfig c;
  c.reduction = 3;
  CHECK_THROWS_AS(Semi3Model{c}, ConfigError);
}

TEST_CASE("checkpoint round trip is bitwise and preserves tying") {
  ModelConfig c;
  c.share = ShareStrategy::kSemi3;
  c.seed = 99;
  Semi3Model model(c);
  model.tie();
  std::mt19937_64 rng(44);
  for (const auto& p : model.store().unique_parameters()) p->value = oracle::random_tensor(rng, p->value.shape());

  const fs::path path = temp_path("round.ckpt");
  save_checkpoint(model, path);
  Semi3Model loaded = load_checkpoint(path);
  CHECK(loaded.store().names() == model.store().names());
  for (const auto& name : model.store().names()) {
    CHECK(bitwise_equal(loaded.store().get(name)->value, model.store().get(name)->value));
  }
  CHECK(loaded.store().groups() == model.store().groups());
  CHECK(assert_tied(loaded.store(), loaded.plan()).all_identical());
  CHECK(loaded.store().get("edgemap.conv1_1.weight").get() == loaded.store().get("sketch.conv1_1.weight").get());
  CHECK(loaded.config().share == ShareStrategy::kSemi3);

  const fs::path again = temp_path("round2.ckpt");
  save_checkpoint(loaded, again);
  std::ifstream f1(path, std::ios::binary), f2(again, std::ios::binary);
  const std::string b1((std::istreambuf_iterator<char>(f1)), {}), b2((std::istreambuf_iterator<char>(f2)), {});
  CHECK(b1 == b2);
  CHECK(b1.substr(0, 8) == "S3NET001");
}

TEST_CASE("truncated or corrupt checkpoints raise FormatError") {
  Semi3Model model{ModelConfig{}};
  const fs::path path = temp_path("full.ckpt");
  save_checkpoint(model, path);
  std::ifstream in(path, std::ios::binary);
  const std::string bytes((std::istreambuf_iterator<char>(in)), {});

  auto write = [](const fs::path& p, const std::string& data) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
  };
  const fs::path cut = temp_path("cut.ckpt");
  for (std::size_t keep : {std::size_t{4}, std::size_t{12}, std::size_t{40}, bytes.size() / 2, bytes.size() - 3}) {
    write(cut, bytes.substr(0, keep));
    CHECK_THROWS_AS(load_checkpoint(cut), FormatError);
  }
  write(cut, bytes.substr(0, bytes.size() / 2));
  try {
    load_checkpoint(cut);
    FAIL("expected a format error");
  } catch (const FormatError& e) {
    const std::string message = e.what();
    const auto& names = model.store().names();
    CHECK(std::any_of(names.begin(), names.end(),
                      [&](const std::string& n) { return message.find("'" + n + "'") != std::string::npos; }));
  }
  std::string bad = bytes;
  bad[0] = 'X';
  write(cut, bad);
  CHECK_THROWS_AS(load_checkpoint(cut), FormatError);
}
