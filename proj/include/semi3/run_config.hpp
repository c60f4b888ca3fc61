#pragma once

#include "semi3/data_synth.hpp"
#include "semi3/model.hpp"
#include "semi3/trainer.hpp"

#include <filesystem>
#include <string>

namespace semi3 {

/// Everything a run needs, read from `key = value` lines. Blank lines and
/// lines starting with '#' are ignored; unknown or repeated keys are errors.
///
///   data:     num_categories per_category image_size noise_level jitter_level data_seed
///   backbone: in_channels input_size stages (e.g. 1x8,1x16) fc_dims (e.g. 64 or none)
///             embed_dim num_classes reduction
///   model:    share_plan use_co_attention alpha beta gamma m1 m2 seed
///   training: lr pretrain_lr momentum weight_decay batch_size pretrain_epochs joint_epochs
///             log_path checkpoint_every
struct RunConfig {
  SyntheticSpec data;
  ModelConfig model;
  TrainConfig train;

  // Acceptance-scale defaults: 8x30 samples at 16 px, stages [(1,8),(1,16)], embed 32.
  static RunConfig desk();

  void validate() const;
};

RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::filesystem::path& path);
std::string to_text(const RunConfig& config);

// Model-only subset, as embedded in checkpoints.
std::string to_text(const ModelConfig& config);
ModelConfig parse_model_config(const std::string& text);

}  // namespace semi3
