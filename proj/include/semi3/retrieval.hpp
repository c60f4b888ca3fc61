#pragma once

#include "semi3/data_synth.hpp"
#include "semi3/model.hpp"

#include <string>
#include <vector>

namespace semi3 {

enum class FeatureSource { kImage, kEdgemap };

std::string to_string(FeatureSource source);
FeatureSource parse_feature_source(const std::string& text);

/// Unit-norm gallery embeddings, one row per gallery item.
struct RetrievalIndex {
  RowMatrix features;
  std::vector<std::size_t> categories;
  std::vector<std::size_t> ids;
  FeatureSource source = FeatureSource::kImage;

  std::size_t size() const noexcept { return ids.size(); }
};

struct Ranking {
  std::size_t query_id = 0;
  std::vector<std::size_t> order;  // gallery rows, ascending distance, ties by row
  std::vector<double> distances;
};

// Embeds every image/edgemap pair of the dataset. Co-attention, when on, is
// applied to each image with its own edgemap.
RetrievalIndex build_index(const Semi3Model& model, const Dataset& dataset, FeatureSource source,
                           std::size_t chunk = 64);

// Sketch embeddings for the chosen samples, one row each.
RowMatrix embed_sketches(const Semi3Model& model, const Dataset& dataset, const std::vector<std::size_t>& rows,
                         std::size_t chunk = 64);

// 1 - a.b for unit vectors.
double cosine_distance(const Eigen::Ref<const Eigen::VectorXd>& a, const Eigen::Ref<const Eigen::VectorXd>& b);

Ranking rank(const RetrievalIndex& index, const Eigen::Ref<const Eigen::VectorXd>& query, std::size_t query_id = 0);

struct MapResult {
  double map = 0.0;
  std::vector<double> average_precision;
  std::vector<std::string> warnings;
};

// Relevance is category equality. A query whose category is absent from the
// gallery scores 0 and adds a warning.
MapResult mean_average_precision(const std::vector<Ranking>& rankings, const std::vector<std::size_t>& query_categories,
                                 const std::vector<std::size_t>& gallery_categories);

struct EvalResult {
  MapResult map;
  std::size_t queries = 0;
  std::size_t gallery = 0;
};

// Test-split sketches against every image (or edgemap) in the dataset.
EvalResult evaluate(const Semi3Model& model, const Dataset& dataset, FeatureSource source);

}  // namespace semi3
