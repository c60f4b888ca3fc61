#include "semi3/trainer.hpp"

#include "semi3/errors.hpp"
#include "semi3/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

namespace semi3 {
namespace {

constexpr std::uint64_t kPretrainStream = 1;
constexpr std::uint64_t kJointStream = 2;

void check_dataset(const Semi3Model& model, const Dataset& dataset) {
  if (dataset.train_indices().empty()) throw ContractError("training split is empty");
  const BackboneConfig& bb = model.config().backbone;
  if (dataset.image_size() != bb.input_size) {
    throw ConfigError("dataset images are " + std::to_string(dataset.image_size()) + " px, backbone expects " +
                      std::to_string(bb.input_size));
  }
  if (dataset.num_categories() > bb.num_classes) {
    throw ConfigError("dataset has " + std::to_string(dataset.num_categories()) + " categories, classifier has " +
                      std::to_string(bb.num_classes));
  }
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void TrainConfig::validate() const {
  if (!(lr > 0.0) || !(pretrain_lr > 0.0)) throw ConfigError("lr and pretrain_lr must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0, 1)");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be >= 0");
  if (batch_size == 0 || batch_size % 2 != 0) throw ConfigError("batch_size must be positive and even");
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t step) {
  // splitmix64 over a combined key
  std::uint64_t z = seed ^ (stream * 0x9E3779B97F4A7C15ull) ^ (step * 0xD1B54A32D192ED03ull);
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

std::string TrainLog::csv() const {
  std::ostringstream out;
  out << "step,CE_S,CE_I,CE_E,L_SI,L_align,L_SE,total\n";
  for (const LogRow& r : rows) {
    const LossComponents& c = r.components;
    out << r.step;
    for (double v : {c.ce_sketch, c.ce_image, c.ce_edgemap, c.sketch_image, c.alignment, c.sketch_edgemap, r.total}) {
      out << ',' << format_double(v);
    }
    out << '\n';
  }
  return out.str();
}

void TrainLog::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError("cannot write log " + path.string());
  out << csv();
}

TrainLog TrainLog::read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  std::string line;
  if (!in || !std::getline(in, line) || line != "step,CE_S,CE_I,CE_E,L_SI,L_align,L_SE,total") {
    throw FormatError("not a training log: " + path.string());
  }
  TrainLog log;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::vector<double> v;
    for (std::string field; std::getline(ss, field, ',');) v.push_back(std::stod(field));
    if (v.size() != 8) throw FormatError("bad log row in " + path.string());
    LogRow r;
    r.step = static_cast<std::size_t>(v[0]);
    r.components = {v[1], v[2], v[3], v[4], v[5], v[6]};
    r.total = v[7];
    log.rows.push_back(r);
  }
  return log;
}

void sgd_step(const std::vector<std::shared_ptr<Parameter>>& parameters, const GradMap& grads,
              const TrainConfig& cfg) {
  std::set<const Parameter*> done;
  for (const auto& p : parameters) {
    if (!done.insert(p.get()).second) continue;
    const Tensor g = grads.of(*p);
    if (g.shape() != p->value.shape()) {
      throw DimensionError("gradient shape " + shape_string(g.shape()) + " does not match parameter '" + p->name +
                           "' " + shape_string(p->value.shape()));
    }
    p->velocity.values() = cfg.momentum * p->velocity.values() + g.values() + cfg.weight_decay * p->value.values();
    p->value.values() -= cfg.lr * p->velocity.values();
  }
}

void sgd_step(ParameterStore& store, const GradMap& grads, const TrainConfig& cfg) {
  sgd_step(store.unique_parameters(), grads, cfg);
}

TrainLog pretrain(Semi3Model& model, const Dataset& dataset, const TrainConfig& cfg) {
  cfg.validate();
  check_dataset(model, dataset);
  const std::size_t classes = model.config().backbone.num_classes;
  std::vector<std::shared_ptr<Parameter>> trainable;
  for (const std::string& name : model.branch_parameter_names()) trainable.push_back(model.store().get(name));

  TrainConfig stage = cfg;
  stage.lr = cfg.pretrain_lr;
  std::vector<std::size_t> order = dataset.train_indices();
  TrainLog log;
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < cfg.pretrain_epochs; ++epoch) {
    std::mt19937_64 rng(derive_seed(cfg.seed, kPretrainStream, epoch));
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size, ++step) {
      const std::vector<std::size_t> rows(order.begin() + static_cast<long>(start),
                                          order.begin() + static_cast<long>(std::min(order.size(), start + cfg.batch_size)));
      std::vector<std::size_t> categories;
      for (std::size_t r : rows) categories.push_back(dataset.sample(r).category);
      const Tensor labels = onehot(categories, classes);

      Recording rec;
      LossComponents c;
      Var total;
      try {
        const Var ce_s = cross_entropy_loss(
            model.forward_single(rec, Role::kSketch, stack(dataset, rows, &Sample::sketch)).logits, labels);
        const Var ce_i = cross_entropy_loss(
            model.forward_single(rec, Role::kImage, stack(dataset, rows, &Sample::image)).logits, labels);
        const Var ce_e = cross_entropy_loss(
            model.forward_single(rec, Role::kEdgemap, stack(dataset, rows, &Sample::edgemap)).logits, labels);
        c.ce_sketch = ce_s.value().item();
        c.ce_image = ce_i.value().item();
        c.ce_edgemap = ce_e.value().item();
        total = ce_s + ce_i + ce_e;
      } catch (const NumericError& e) {
        throw NumericError("pretraining diverged at step " + std::to_string(step) + ": " + e.what());
      }
      sgd_step(trainable, rec.backward(total), stage);
      log.rows.push_back({step, c, total.value().item()});
    }
  }
  model.tie();
  return log;
}

TripleLabels labels_for(const PairBatch& batch, std::size_t num_classes) {
  return {onehot(batch.sketch_categories, num_classes), onehot(batch.image_categories, num_classes),
          batch.similarity};
}

TrainLog train_joint(Semi3Model& model, const Dataset& dataset, const TrainConfig& cfg, const EpochHook& on_epoch,
                     std::size_t max_steps) {
  cfg.validate();
  check_dataset(model, dataset);
  if (!model.tied()) throw ContractError("train_joint requires a model tied per its share plan");
  const std::size_t classes = model.config().backbone.num_classes;
  const std::size_t train = dataset.train_indices().size();
  const std::size_t steps_per_epoch = (train + cfg.batch_size - 1) / cfg.batch_size;

  TrainLog log;
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < cfg.joint_epochs; ++epoch) {
    for (std::size_t i = 0; i < steps_per_epoch; ++i, ++step) {
      if (max_steps && step >= max_steps) return log;
      const PairBatch batch = sample_pairs(dataset, cfg.batch_size, derive_seed(cfg.seed, kJointStream, step));
      Recording rec;
      HybridLoss loss;
      try {
        const TripleOutput out = model.forward_triple(rec, batch.sketches, batch.images, batch.edgemaps);
        loss = hybrid_loss(out, labels_for(batch, classes), model.config().weights);
      } catch (const NumericError& e) {
        throw NumericError("joint training diverged at step " + std::to_string(step) + ": " + e.what());
      }
      sgd_step(model.store(), rec.backward(loss.total), cfg);
      log.rows.push_back({step, loss.components, loss.total.value().item()});
    }
    if (on_epoch) on_epoch(epoch, model);
  }
  return log;
}

}  // namespace semi3
