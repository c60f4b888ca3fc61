#pragma once

#include "semi3/autodiff.hpp"
#include "semi3/data_synth.hpp"
#include "semi3/model.hpp"

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace semi3 {

struct TrainConfig {
  double lr = 2e-4;           // joint stage
  double pretrain_lr = 1e-2;  // per-branch cross-entropy stage
  double momentum = 0.9;
  double weight_decay = 5e-4;
  std::size_t batch_size = 32;
  std::size_t pretrain_epochs = 3;
  std::size_t joint_epochs = 30;
  std::uint64_t seed = 7;
  std::string log_path;
  std::size_t checkpoint_every = 0;  // epochs; 0 disables

  void validate() const;
};

struct LogRow {
  std::size_t step = 0;
  LossComponents components;
  double total = 0.0;
};

/// CSV columns: step,CE_S,CE_I,CE_E,L_SI,L_align,L_SE,total
struct TrainLog {
  std::vector<LogRow> rows;

  std::string csv() const;
  void write_csv(const std::filesystem::path& path) const;
  static TrainLog read_csv(const std::filesystem::path& path);
};

// v <- momentum*v + grad + weight_decay*p;  p <- p - lr*v.
// Each underlying tensor is updated once; tied names share it.
void sgd_step(ParameterStore& store, const GradMap& grads, const TrainConfig& cfg);
void sgd_step(const std::vector<std::shared_ptr<Parameter>>& parameters, const GradMap& grads,
              const TrainConfig& cfg);

// Cross-entropy training of each branch on its own domain, attention
// untouched, followed by tying under the model's share plan.
TrainLog pretrain(Semi3Model& model, const Dataset& dataset, const TrainConfig& cfg);

using EpochHook = std::function<void(std::size_t epoch, const Semi3Model& model)>;

// Hybrid-loss training over 1:1 pair batches. Steps per epoch cover the
// train split once: ceil(train / batch_size). `max_steps` truncates the run.
TrainLog train_joint(Semi3Model& model, const Dataset& dataset, const TrainConfig& cfg,
                     const EpochHook& on_epoch = {}, std::size_t max_steps = 0);

TripleLabels labels_for(const PairBatch& batch, std::size_t num_classes);

// Independent stream for (seed, stage, step).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t step);

}  // namespace semi3
