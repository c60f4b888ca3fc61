#pragma once

#include "semi3/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace semi3 {

struct SyntheticSpec {
  std::size_t num_categories = 8;
  std::size_t per_category = 30;
  std::size_t image_size = 16;
  double noise_level = 0.05;
  double jitter_level = 0.02;
  std::uint64_t seed = 1;

  void validate() const;
  // Held-out queries per category: ceil(per_category / 6), at least 1.
  std::size_t test_per_category() const;
};

enum class Split { kTrain, kTest };

std::string to_string(Split split);

struct Sample {
  std::size_t id = 0;
  std::size_t category = 0;
  Split split = Split::kTrain;
  Tensor image;    // [3, H, W] in [0, 1]
  Tensor sketch;   // [3, H, W], grayscale replicated
  Tensor edgemap;  // [3, H, W], extract_edgemap(image)
};

class Dataset {
 public:
  Dataset() = default;
  explicit Dataset(std::vector<Sample> samples);

  const std::vector<Sample>& samples() const noexcept { return samples_; }
  const Sample& sample(std::size_t index) const { return samples_.at(index); }
  // Position in samples() of the sample with this id.
  std::size_t index_of(std::size_t id) const;
  std::size_t size() const noexcept { return samples_.size(); }
  std::size_t num_categories() const noexcept { return num_categories_; }
  std::size_t image_size() const;

  const std::vector<std::size_t>& train_indices() const noexcept { return train_; }
  const std::vector<std::size_t>& test_indices() const noexcept { return test_; }
  // Train indices grouped by category.
  const std::vector<std::vector<std::size_t>>& train_by_category() const noexcept { return train_by_category_; }

 private:
  std::vector<Sample> samples_;
  std::vector<std::size_t> train_;
  std::vector<std::size_t> test_;
  std::vector<std::vector<std::size_t>> train_by_category_;
  std::size_t num_categories_ = 0;
};

/// Category k is a (k+3)-gon with a category size and stretch axis. Images
/// fill it with a category colour on a noisy background; sketches trace a
/// jittered outline on white.
Dataset render_dataset(const SyntheticSpec& spec);

// Renders and writes manifest.csv plus one tensor file per domain and sample.
Dataset generate_dataset(const SyntheticSpec& spec, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir);

/// Channel mean -> 3x3 Sobel gradient magnitude (edge-clamped borders) ->
/// divide by the maximum -> replicate to three channels.
Tensor extract_edgemap(const Tensor& image);

// Per channel plane: u32 H, u32 W, then H*W little-endian doubles.
void write_tensor_file(const std::filesystem::path& path, const Tensor& chw);
Tensor read_tensor_file(const std::filesystem::path& path);

struct PairBatch {
  Tensor sketches;  // [B, 3, H, W]
  Tensor images;
  Tensor edgemaps;
  Tensor similarity;  // [B]
  std::vector<std::size_t> sketch_categories;
  std::vector<std::size_t> image_categories;
  std::vector<std::size_t> sketch_ids;
  std::vector<std::size_t> image_ids;

  std::size_t size() const noexcept { return sketch_ids.size(); }
  std::size_t positives() const;
};

/// Exactly batch_size/2 positive and batch_size/2 negative pairs drawn from
/// the train split. An image always travels with its own edgemap.
PairBatch sample_pairs(const Dataset& dataset, std::size_t batch_size, std::uint64_t seed);

// Stacks [3, H, W] tensors of the chosen samples into [B, 3, H, W].
Tensor stack(const Dataset& dataset, const std::vector<std::size_t>& indices, Tensor Sample::*field);

}  // namespace semi3
