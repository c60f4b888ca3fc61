#include "semi3/retrieval.hpp"

#include "semi3/errors.hpp"

#include <algorithm>
#include <numeric>

namespace semi3 {

std::string to_string(FeatureSource source) { return source == FeatureSource::kImage ? "image" : "edgemap"; }

FeatureSource parse_feature_source(const std::string& text) {
  if (text == "image") return FeatureSource::kImage;
  if (text == "edgemap") return FeatureSource::kEdgemap;
  throw ContractError("feature source must be image or edgemap, got '" + text + "'");
}

RetrievalIndex build_index(const Semi3Model& model, const Dataset& dataset, FeatureSource source, std::size_t chunk) {
  if (dataset.size() == 0) throw ContractError("build_index: empty gallery");
  RetrievalIndex index;
  index.source = source;
  index.features.resize(static_cast<Eigen::Index>(dataset.size()),
                        static_cast<Eigen::Index>(model.config().backbone.embed_dim));
  for (std::size_t start = 0; start < dataset.size(); start += chunk) {
    std::vector<std::size_t> rows(std::min(chunk, dataset.size() - start));
    std::iota(rows.begin(), rows.end(), start);
    Recording rec;
    const PairEmbedding pair =
        model.embed_pairs(rec, stack(dataset, rows, &Sample::image), stack(dataset, rows, &Sample::edgemap));
    const Tensor& e = (source == FeatureSource::kImage ? pair.image : pair.edgemap).embedding.value();
    index.features.middleRows(static_cast<Eigen::Index>(start), static_cast<Eigen::Index>(rows.size())) =
        e.matrix(rows.size(), e.dim(1));
  }
  for (const Sample& s : dataset.samples()) {
    index.ids.push_back(s.id);
    index.categories.push_back(s.category);
  }
  return index;
}

RowMatrix embed_sketches(const Semi3Model& model, const Dataset& dataset, const std::vector<std::size_t>& rows,
                         std::size_t chunk) {
  RowMatrix out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(model.config().backbone.embed_dim));
  for (std::size_t start = 0; start < rows.size(); start += chunk) {
    const std::vector<std::size_t> part(rows.begin() + static_cast<long>(start),
                                        rows.begin() + static_cast<long>(std::min(rows.size(), start + chunk)));
    Recording rec;
    const Tensor& e = model.embed_sketches(rec, stack(dataset, part, &Sample::sketch)).embedding.value();
    out.middleRows(static_cast<Eigen::Index>(start), static_cast<Eigen::Index>(part.size())) =
        e.matrix(part.size(), e.dim(1));
  }
  return out;
}

double cosine_distance(const Eigen::Ref<const Eigen::VectorXd>& a, const Eigen::Ref<const Eigen::VectorXd>& b) {
  if (a.size() != b.size()) throw DimensionError("cosine_distance: dimension mismatch");
  return 1.0 - a.dot(b);
}

Ranking rank(const RetrievalIndex& index, const Eigen::Ref<const Eigen::VectorXd>& query, std::size_t query_id) {
  if (query.size() != index.features.cols()) throw DimensionError("rank: query dimension does not match index");
  Ranking ranking;
  ranking.query_id = query_id;
  const std::size_t g = index.size();
  std::vector<double> distance(g);
  for (std::size_t i = 0; i < g; ++i) {
    distance[i] = cosine_distance(index.features.row(static_cast<Eigen::Index>(i)).transpose(), query);
  }
  ranking.order.resize(g);
  std::iota(ranking.order.begin(), ranking.order.end(), std::size_t{0});
  std::stable_sort(ranking.order.begin(), ranking.order.end(),
                   [&](std::size_t a, std::size_t b) { return distance[a] < distance[b]; });
  for (std::size_t row : ranking.order) ranking.distances.push_back(distance[row]);
  return ranking;
}

MapResult mean_average_precision(const std::vector<Ranking>& rankings, const std::vector<std::size_t>& query_categories,
                                 const std::vector<std::size_t>& gallery_categories) {
  if (rankings.size() != query_categories.size()) {
    throw ContractError("mean_average_precision: one category per ranking required");
  }
  MapResult result;
  for (std::size_t q = 0; q < rankings.size(); ++q) {
    const Ranking& r = rankings[q];
    if (r.order.size() != gallery_categories.size()) {
      throw ContractError("mean_average_precision: ranking does not cover the gallery");
    }
    std::size_t hits = 0;
    double precision_sum = 0.0;
    for (std::size_t k = 0; k < r.order.size(); ++k) {
      if (gallery_categories.at(r.order[k]) != query_categories[q]) continue;
      ++hits;
      precision_sum += static_cast<double>(hits) / static_cast<double>(k + 1);
    }
    if (hits == 0) {
      result.warnings.push_back("query " + std::to_string(r.query_id) + ": category " +
                                std::to_string(query_categories[q]) + " absent from gallery");
      result.average_precision.push_back(0.0);
    } else {
      result.average_precision.push_back(precision_sum / static_cast<double>(hits));
    }
  }
  if (!rankings.empty()) {
    result.map = std::accumulate(result.average_precision.begin(), result.average_precision.end(), 0.0) /
                 static_cast<double>(rankings.size());
  }
  return result;
}

EvalResult evaluate(const Semi3Model& model, const Dataset& dataset, FeatureSource source) {
  const RetrievalIndex index = build_index(model, dataset, source);
  const std::vector<std::size_t>& queries = dataset.test_indices();
  if (queries.empty()) throw ContractError("evaluate: dataset has no test queries");
  const RowMatrix embedded = embed_sketches(model, dataset, queries);
  std::vector<Ranking> rankings;
  std::vector<std::size_t> categories;
  for (std::size_t q = 0; q < queries.size(); ++q) {
    const Sample& s = dataset.sample(queries[q]);
    rankings.push_back(rank(index, embedded.row(static_cast<Eigen::Index>(q)).transpose(), s.id));
    categories.push_back(s.category);
  }
  EvalResult result;
  result.map = mean_average_precision(rankings, categories, index.categories);
  result.queries = queries.size();
  result.gallery = index.size();
  return result;
}

}  // namespace semi3
