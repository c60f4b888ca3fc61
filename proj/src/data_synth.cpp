#include "semi3/data_synth.hpp"

#include "semi3/errors.hpp"

#include "binary_io.hpp"

#include <algorithm>
#include <array>
#include <limits>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

namespace semi3 {
namespace {

struct Point {
  double x, y;
};

// Category colour, one value per channel.
std::array<double, 3> fill_colour(std::size_t category, std::size_t categories) {
  std::array<double, 3> rgb{};
  const double hue = static_cast<double>(category) / static_cast<double>(categories);
  for (std::size_t c = 0; c < 3; ++c) {
    rgb[c] = 0.55 + 0.4 * std::cos(2.0 * std::numbers::pi * (hue + static_cast<double>(c) / 3.0));
  }
  return rgb;
}

bool inside_convex(const std::vector<Point>& poly, double x, double y) {
  bool positive = false, negative = false;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Point& a = poly[i];
    const Point& b = poly[(i + 1) % poly.size()];
    const double cross = (b.x - a.x) * (y - a.y) - (b.y - a.y) * (x - a.x);
    positive = positive || cross > 0.0;
    negative = negative || cross < 0.0;
  }
  return !(positive && negative);
}

double segment_distance(Point p, Point a, Point b) {
  const double dx = b.x - a.x, dy = b.y - a.y;
  const double len2 = dx * dx + dy * dy;
  double t = len2 > 0.0 ? ((p.x - a.x) * dx + (p.y - a.y) * dy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return std::hypot(p.x - (a.x + t * dx), p.y - (a.y + t * dy));
}

Tensor replicate(const Eigen::VectorXd& plane, std::size_t size) {
  Tensor out({3, size, size});
  const auto n = static_cast<Eigen::Index>(size * size);
  for (Eigen::Index c = 0; c < 3; ++c) out.values().segment(c * n, n) = plane;
  return out;
}

Sample render_sample(const SyntheticSpec& spec, std::size_t id, std::size_t category, std::mt19937_64& rng) {
  const std::size_t size = spec.image_size;
  const double s = static_cast<double>(size);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  // Per-category shape: (k+3) vertices, one of two sizes, stretched along a
  // category axis (45 degree steps); samples vary slightly around it.
  const std::size_t vertices = category + 3;
  const double radius = s * (category % 2 == 0 ? 0.28 : 0.44) * (1.0 + 0.06 * unit(rng));
  const double aspect = 0.55;
  const double axis = std::numbers::pi / 4.0 * static_cast<double>((category / 2) % 4) + 0.12 * unit(rng);
  const double spin = 2.0 * std::numbers::pi * 0.5 * (unit(rng) + 1.0) / static_cast<double>(vertices);
  const Point centre{s / 2.0 + 0.6 * unit(rng), s / 2.0 + 0.6 * unit(rng)};

  std::vector<Point> polygon;
  for (std::size_t v = 0; v < vertices; ++v) {
    const double angle = spin + 2.0 * std::numbers::pi * static_cast<double>(v) / static_cast<double>(vertices);
    const double along = radius * std::cos(angle);
    const double across = aspect * radius * std::sin(angle);
    polygon.push_back({centre.x + along * std::cos(axis) - across * std::sin(axis),
                       centre.y + along * std::sin(axis) + across * std::cos(axis)});
  }

  Sample sample;
  sample.id = id;
  sample.category = category;
  sample.image = Tensor({3, size, size});
  const auto colour = fill_colour(category, spec.num_categories);
  constexpr int kSub = 3;
  for (std::size_t y = 0; y < size; ++y) {
    for (std::size_t x = 0; x < size; ++x) {
      int hits = 0;
      for (int sy = 0; sy < kSub; ++sy) {
        for (int sx = 0; sx < kSub; ++sx) {
          hits += inside_convex(polygon, static_cast<double>(x) + (sx + 0.5) / kSub,
                                static_cast<double>(y) + (sy + 0.5) / kSub);
        }
      }
      const double coverage = hits / static_cast<double>(kSub * kSub);
      for (std::size_t c = 0; c < 3; ++c) {
        const double background = 0.15 + spec.noise_level * unit(rng);
        const double v = (1.0 - coverage) * background + coverage * colour[c];
        sample.image[(c * size + y) * size + x] = std::clamp(v, 0.0, 1.0);
      }
    }
  }

  std::vector<Point> outline = polygon;
  for (Point& p : outline) {
    p.x += spec.jitter_level * s * gauss(rng);
    p.y += spec.jitter_level * s * gauss(rng);
  }
  Eigen::VectorXd plane(static_cast<Eigen::Index>(size * size));
  for (std::size_t y = 0; y < size; ++y) {
    for (std::size_t x = 0; x < size; ++x) {
      const Point p{static_cast<double>(x) + 0.5, static_cast<double>(y) + 0.5};
      double nearest = std::numeric_limits<double>::infinity();
      for (std::size_t v = 0; v < outline.size(); ++v) {
        nearest = std::min(nearest, segment_distance(p, outline[v], outline[(v + 1) % outline.size()]));
      }
      const double ink = std::clamp(1.0 - nearest / 0.9, 0.0, 1.0);
      plane[static_cast<Eigen::Index>(y * size + x)] = 1.0 - ink;
    }
  }
  sample.sketch = replicate(plane, size);
  sample.edgemap = extract_edgemap(sample.image);
  return sample;
}

Split parse_split(const std::string& text) {
  if (text == "train") return Split::kTrain;
  if (text == "test") return Split::kTest;
  throw FormatError("unknown split '" + text + "'");
}

}  // namespace

void SyntheticSpec::validate() const {
  if (num_categories < 2) throw ConfigError("num_categories must be >= 2");
  if (per_category < 2) throw ConfigError("per_category must be >= 2");
  if (image_size < 4) throw ConfigError("image_size must be >= 4");
  if (!(noise_level >= 0.0) || !(jitter_level >= 0.0)) throw ConfigError("noise and jitter must be >= 0");
}

std::size_t SyntheticSpec::test_per_category() const {
  return std::max<std::size_t>(1, (per_category + 5) / 6);
}

std::string to_string(Split split) { return split == Split::kTrain ? "train" : "test"; }

Dataset::Dataset(std::vector<Sample> samples) : samples_(std::move(samples)) {
  for (const Sample& s : samples_) num_categories_ = std::max(num_categories_, s.category + 1);
  train_by_category_.resize(num_categories_);
  for (std::size_t i = 0; i < samples_.size(); ++i) {
    if (samples_[i].split == Split::kTrain) {
      train_.push_back(i);
      train_by_category_[samples_[i].category].push_back(i);
    } else {
      test_.push_back(i);
    }
  }
}

std::size_t Dataset::index_of(std::size_t id) const {
  for (std::size_t i = 0; i < samples_.size(); ++i) {
    if (samples_[i].id == id) return i;
  }
  throw ContractError("no sample with id " + std::to_string(id));
}

std::size_t Dataset::image_size() const { return samples_.empty() ? 0 : samples_.front().image.dim(2); }

Dataset render_dataset(const SyntheticSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  const std::size_t test = spec.test_per_category();
  std::vector<Sample> samples;
  std::size_t id = 0;
  for (std::size_t k = 0; k < spec.num_categories; ++k) {
    for (std::size_t i = 0; i < spec.per_category; ++i) {
      Sample s = render_sample(spec, id++, k, rng);
      s.split = i + test >= spec.per_category ? Split::kTest : Split::kTrain;
      samples.push_back(std::move(s));
    }
  }
  return Dataset(std::move(samples));
}

Tensor extract_edgemap(const Tensor& image) {
  if (image.rank() != 3) throw DimensionError("extract_edgemap expects [C,H,W], got " + shape_string(image.shape()));
  const std::size_t channels = image.dim(0), h = image.dim(1), w = image.dim(2);
  if (h != w) throw DimensionError("extract_edgemap expects square images");
  const auto plane = static_cast<Eigen::Index>(h * w);
  Eigen::VectorXd gray = Eigen::VectorXd::Zero(plane);
  for (std::size_t c = 0; c < channels; ++c) gray += image.values().segment(static_cast<Eigen::Index>(c) * plane, plane);
  gray /= static_cast<double>(channels);

  auto at = [&](long y, long x) {
    y = std::clamp<long>(y, 0, static_cast<long>(h) - 1);
    x = std::clamp<long>(x, 0, static_cast<long>(w) - 1);
    return gray[static_cast<Eigen::Index>(y) * static_cast<Eigen::Index>(w) + x];
  };
  Eigen::VectorXd magnitude(plane);
  for (long y = 0; y < static_cast<long>(h); ++y) {
    for (long x = 0; x < static_cast<long>(w); ++x) {
      const double gx = (at(y - 1, x + 1) + 2.0 * at(y, x + 1) + at(y + 1, x + 1)) -
                        (at(y - 1, x - 1) + 2.0 * at(y, x - 1) + at(y + 1, x - 1));
      const double gy = (at(y + 1, x - 1) + 2.0 * at(y + 1, x) + at(y + 1, x + 1)) -
                        (at(y - 1, x - 1) + 2.0 * at(y - 1, x) + at(y - 1, x + 1));
      magnitude[y * static_cast<long>(w) + x] = std::sqrt(gx * gx + gy * gy);
    }
  }
  const double peak = magnitude.maxCoeff();
  if (peak > 0.0) magnitude /= peak;
  return replicate(magnitude, h);
}

void write_tensor_file(const std::filesystem::path& path, const Tensor& chw) {
  if (chw.rank() != 3) throw DimensionError("tensor files hold [C,H,W] tensors");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path.string());
  const std::size_t h = chw.dim(1), w = chw.dim(2);
  for (std::size_t c = 0; c < chw.dim(0); ++c) {
    io::put_le(out, static_cast<std::uint32_t>(h));
    io::put_le(out, static_cast<std::uint32_t>(w));
    for (std::size_t i = 0; i < h * w; ++i) io::put_f64(out, chw[c * h * w + i]);
  }
  if (!out) throw FormatError("failed writing " + path.string());
}

Tensor read_tensor_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::vector<double> values;
  std::uint32_t h = 0, w = 0, planes = 0;
  std::uint32_t ph = 0;
  while (io::get_le(in, ph)) {
    std::uint32_t pw = 0;
    if (!io::get_le(in, pw)) throw FormatError(path.string() + ": truncated plane header");
    if (planes == 0) {
      h = ph;
      w = pw;
    } else if (ph != h || pw != w) {
      throw FormatError(path.string() + ": plane dims differ");
    }
    for (std::size_t i = 0; i < std::size_t{h} * w; ++i) {
      double v = 0.0;
      if (!io::get_f64(in, v)) throw FormatError(path.string() + ": truncated plane data");
      values.push_back(v);
    }
    ++planes;
  }
  if (planes == 0) throw FormatError(path.string() + ": empty tensor file");
  return Tensor({planes, h, w}, Eigen::Map<Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size())));
}

Dataset generate_dataset(const SyntheticSpec& spec, const std::filesystem::path& dir) {
  Dataset dataset = render_dataset(spec);
  std::error_code ec;
  for (const char* sub : {"images", "sketches", "edgemaps"}) {
    std::filesystem::create_directories(dir / sub, ec);
    if (ec) throw FormatError("cannot create " + (dir / sub).string() + ": " + ec.message());
  }
  std::ofstream manifest(dir / "manifest.csv", std::ios::trunc);
  if (!manifest) throw FormatError("cannot write " + (dir / "manifest.csv").string());
  manifest << "id,category,split,image,sketch,edgemap\n";
  for (const Sample& s : dataset.samples()) {
    const std::string file = std::to_string(s.id) + ".bin";
    write_tensor_file(dir / "images" / file, s.image);
    write_tensor_file(dir / "sketches" / file, s.sketch);
    write_tensor_file(dir / "edgemaps" / file, s.edgemap);
    manifest << s.id << ',' << s.category << ',' << to_string(s.split) << ",images/" << file << ",sketches/" << file
             << ",edgemaps/" << file << '\n';
  }
  if (!manifest) throw FormatError("failed writing manifest in " + dir.string());
  return dataset;
}

Dataset load_dataset(const std::filesystem::path& dir) {
  std::ifstream manifest(dir / "manifest.csv");
  if (!manifest) throw FormatError("no manifest.csv in " + dir.string());
  std::string line;
  if (!std::getline(manifest, line) || line != "id,category,split,image,sketch,edgemap") {
    throw FormatError((dir / "manifest.csv").string() + ": unexpected header");
  }
  std::vector<Sample> samples;
  std::size_t row = 1;
  while (std::getline(manifest, line)) {
    ++row;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    for (std::string field; std::getline(ss, field, ',');) fields.push_back(field);
    if (fields.size() != 6) throw FormatError("manifest row " + std::to_string(row) + " does not have 6 fields");
    Sample s;
    try {
      s.id = std::stoul(fields[0]);
      s.category = std::stoul(fields[1]);
    } catch (const std::exception&) {
      throw FormatError("manifest row " + std::to_string(row) + ": bad id or category");
    }
    s.split = parse_split(fields[2]);
    s.image = read_tensor_file(dir / fields[3]);
    s.sketch = read_tensor_file(dir / fields[4]);
    s.edgemap = read_tensor_file(dir / fields[5]);
    samples.push_back(std::move(s));
  }
  if (samples.empty()) throw FormatError("manifest in " + dir.string() + " lists no samples");
  return Dataset(std::move(samples));
}

std::size_t PairBatch::positives() const {
  return static_cast<std::size_t>(std::count(similarity.values().begin(), similarity.values().end(), 1.0));
}

Tensor stack(const Dataset& dataset, const std::vector<std::size_t>& indices, Tensor Sample::*field) {
  if (indices.empty()) throw ContractError("stack: no samples selected");
  const Tensor& first = dataset.sample(indices.front()).*field;
  Shape shape{indices.size()};
  shape.insert(shape.end(), first.shape().begin(), first.shape().end());
  Tensor out(shape);
  const auto n = static_cast<Eigen::Index>(first.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const Tensor& t = dataset.sample(indices[i]).*field;
    if (t.shape() != first.shape()) throw DimensionError("stack: samples differ in shape");
    out.values().segment(static_cast<Eigen::Index>(i) * n, n) = t.values();
  }
  return out;
}

PairBatch sample_pairs(const Dataset& dataset, std::size_t batch_size, std::uint64_t seed) {
  if (batch_size == 0 || batch_size % 2 != 0) {
    throw ContractError("sample_pairs: batch size must be positive and even, got " + std::to_string(batch_size));
  }
  const auto& train = dataset.train_indices();
  if (train.empty()) throw ContractError("sample_pairs: empty training split");
  std::vector<std::size_t> populated;
  for (std::size_t k = 0; k < dataset.num_categories(); ++k) {
    if (!dataset.train_by_category()[k].empty()) populated.push_back(k);
  }
  if (populated.size() < 2) throw ContractError("sample_pairs: negatives need two populated categories");

  std::mt19937_64 rng(seed);
  std::vector<int> labels(batch_size, 0);
  std::fill(labels.begin(), labels.begin() + static_cast<long>(batch_size / 2), 1);
  std::shuffle(labels.begin(), labels.end(), rng);

  auto pick = [&rng](const std::vector<std::size_t>& from) {
    return from[std::uniform_int_distribution<std::size_t>(0, from.size() - 1)(rng)];
  };

  PairBatch batch;
  batch.similarity = Tensor({batch_size});
  std::vector<std::size_t> sketch_rows, image_rows;
  for (std::size_t b = 0; b < batch_size; ++b) {
    const std::size_t sketch = pick(train);
    const std::size_t category = dataset.sample(sketch).category;
    std::size_t image_category = category;
    if (labels[b] == 0) {
      std::vector<std::size_t> others;
      for (std::size_t k : populated) {
        if (k != category) others.push_back(k);
      }
      image_category = pick(others);
    }
    const std::size_t image = pick(dataset.train_by_category()[image_category]);
    sketch_rows.push_back(sketch);
    image_rows.push_back(image);
    batch.similarity[b] = labels[b];
    batch.sketch_categories.push_back(category);
    batch.image_categories.push_back(image_category);
    batch.sketch_ids.push_back(dataset.sample(sketch).id);
    batch.image_ids.push_back(dataset.sample(image).id);
  }
  batch.sketches = stack(dataset, sketch_rows, &Sample::sketch);
  batch.images = stack(dataset, image_rows, &Sample::image);
  batch.edgemaps = stack(dataset, image_rows, &Sample::edgemap);
  return batch;
}

}  // namespace semi3
