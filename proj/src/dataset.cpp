// Copyright 2026 The sparsify Authors
// Licensed under the Apache License, Version 2.0

#include "sparsify/dataset.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include "sparsify/errors.hpp"

namespace sparsify {

namespace {

void check_sizes(const SyntheticOptions& o) {
  if (o.train_size == 0 || o.test_size == 0)
    throw ContractError("synthetic dataset needs non-empty train and test splits");
  if (!(o.noise >= 0.0)) throw ContractError("noise must be non-negative");
}

// Fills one split by calling draw(label, out) for alternating labels.
template <typename Draw>
void fill(std::size_t n, std::size_t classes, std::size_t width,
          std::vector<float>& xs, std::vector<int>& ys, std::mt19937_64& rng,
          Draw draw) {
  xs.resize(n * width);
  ys.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(i % classes);
    ys[i] = label;
    draw(label, std::span<float>(xs.data() + i * width, width), rng);
  }
}

}  // namespace

Dataset make_two_gaussians(const SyntheticOptions& o) {
  check_sizes(o);
  if (o.dims == 0) throw ContractError("two_gaussians needs dims >= 1");
  Dataset d;
  d.name = "two_gaussians";
  d.sample_shape = {o.dims};
  d.classes = 2;
  std::mt19937_64 rng(o.seed);
  std::normal_distribution<double> n01(0.0, 1.0);
  const double offset = o.separation / 2.0;
  auto draw = [&](int label, std::span<float> x, std::mt19937_64& g) {
    const double c = label == 0 ? -offset : offset;
    for (float& v : x) v = static_cast<float>(c + o.noise * n01(g));
  };
  fill(o.train_size, 2, o.dims, d.train_x, d.train_y, rng, draw);
  fill(o.test_size, 2, o.dims, d.test_x, d.test_y, rng, draw);
  return d;
}

Dataset make_rings(const SyntheticOptions& o) {
  check_sizes(o);
  Dataset d;
  d.name = "rings";
  d.sample_shape = {2};
  d.classes = 2;
  std::mt19937_64 rng(o.seed);
  std::normal_distribution<double> n01(0.0, 1.0);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  auto draw = [&](int label, std::span<float> x, std::mt19937_64& g) {
    const double r = (label == 0 ? 1.0 : 2.0) + o.noise * n01(g);
    const double a = angle(g);
    x[0] = static_cast<float>(r * std::cos(a));
    x[1] = static_cast<float>(r * std::sin(a));
  };
  fill(o.train_size, 2, 2, d.train_x, d.train_y, rng, draw);
  fill(o.test_size, 2, 2, d.test_x, d.test_y, rng, draw);
  return d;
}

Dataset make_patterns(const SyntheticOptions& o) {
  check_sizes(o);
  if (o.image_shape.size() != 3)
    throw ContractError("patterns needs image_shape {C, H, W}");
  if (o.classes < 2) throw ContractError("patterns needs at least two classes");
  const std::size_t C = o.image_shape[0], H = o.image_shape[1], W = o.image_shape[2];
  if (C == 0 || H < 3 || W < 3)
    throw ContractError("patterns images must be at least 1x3x3");
  Dataset d;
  d.name = "patterns";
  d.sample_shape = {C, H, W};
  d.classes = o.classes;
  std::mt19937_64 rng(o.seed);
  std::normal_distribution<double> n01(0.0, 1.0);

  // Prototypes: white noise smoothed by a 3x3 box filter, unit variance.
  std::vector<std::vector<double>> protos(o.classes, std::vector<double>(C * H * W));
  for (auto& p : protos) {
    std::vector<double> raw(C * H * W);
    for (double& v : raw) v = n01(rng);
    double ss = 0.0;
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t y = 0; y < H; ++y)
        for (std::size_t x = 0; x < W; ++x) {
          double acc = 0.0;
          for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
              const std::size_t yy = (y + H + dy) % H, xx = (x + W + dx) % W;
              acc += raw[(c * H + yy) * W + xx];
            }
          p[(c * H + y) * W + x] = acc;
          ss += acc * acc;
        }
    const double scale = 1.0 / std::sqrt(ss / double(p.size()));
    for (double& v : p) v *= scale;
  }
  std::uniform_int_distribution<int> shift(-1, 1);
  std::uniform_real_distribution<double> gain(0.7, 1.3);
  auto draw = [&](int label, std::span<float> out, std::mt19937_64& g) {
    const auto& p = protos[static_cast<std::size_t>(label)];
    const int sy = shift(g), sx = shift(g);
    const double a = gain(g);
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t y = 0; y < H; ++y)
        for (std::size_t x = 0; x < W; ++x) {
          const std::size_t yy = (y + H + sy) % H, xx = (x + W + sx) % W;
          out[(c * H + y) * W + x] =
              static_cast<float>(a * p[(c * H + yy) * W + xx] + o.noise * n01(g));
        }
  };
  fill(o.train_size, o.classes, C * H * W, d.train_x, d.train_y, rng, draw);
  fill(o.test_size, o.classes, C * H * W, d.test_x, d.test_y, rng, draw);
  return d;
}

Dataset load_manifest(const std::filesystem::path& manifest,
                      const std::vector<std::size_t>& image_shape) {
  if (image_shape.size() != 3 || numel(image_shape) == 0)
    throw DatasetError("manifest datasets need a positive image_shape {C, H, W}");
  std::ifstream in(manifest);
  if (!in) throw DatasetError("cannot open manifest " + manifest.string());
  const std::size_t bytes = numel(image_shape);
  const std::filesystem::path root = manifest.parent_path();

  Dataset d;
  d.name = manifest.filename().string();
  d.sample_shape = Shape(image_shape.begin(), image_shape.end());
  std::string line;
  std::getline(in, line);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "file,label,split")
    throw DatasetError(manifest.string() + ": header must be 'file,label,split'");

  std::set<std::string> train_files, test_files;
  int max_label = -1;
  std::size_t lineno = 1;
  std::vector<unsigned char> buf(bytes);
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string file, label_s, split;
    std::getline(ss, file, ',');
    std::getline(ss, label_s, ',');
    std::getline(ss, split, ',');
    const std::string where = manifest.string() + ":" + std::to_string(lineno);
    if (file.empty() || label_s.empty() || split.empty())
      throw DatasetError(where + ": expected file,label,split");
    int label = -1;
    try {
      std::size_t pos = 0;
      label = std::stoi(label_s, &pos);
      if (pos != label_s.size()) label = -1;
    } catch (const std::exception&) {
    }
    if (label < 0) throw DatasetError(where + ": bad label '" + label_s + "' for " + file);
    const bool train = split == "train";
    if (!train && split != "test")
      throw DatasetError(where + ": split must be train or test for " + file);
    if (!(train ? train_files : test_files).insert(file).second)
      throw DatasetError(where + ": duplicate entry " + file);

    const std::filesystem::path path = root / file;
    std::ifstream img(path, std::ios::binary);
    if (!img) throw DatasetError("missing image file " + path.string());
    img.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(bytes));
    if (static_cast<std::size_t>(img.gcount()) != bytes || img.peek() != EOF)
      throw DatasetError("image file " + path.string() + " is not " +
                         std::to_string(bytes) + " bytes (shape " +
                         to_string(d.sample_shape) + ")");
    auto& xs = train ? d.train_x : d.test_x;
    for (unsigned char c : buf) xs.push_back(static_cast<float>(c) / 255.0f);
    (train ? d.train_y : d.test_y).push_back(label);
    max_label = std::max(max_label, label);
  }
  for (const std::string& f : train_files)
    if (test_files.count(f))
      throw DatasetError("file " + f + " appears in both train and test splits");
  if (d.train_y.empty() || d.test_y.empty())
    throw DatasetError(manifest.string() + ": both train and test splits are required");
  d.classes = static_cast<std::size_t>(max_label) + 1;

  const std::size_t C = image_shape[0], plane = bytes / C;
  for (std::size_t c = 0; c < C; ++c) {
    double sum = 0.0, sq = 0.0;
    const std::size_t n = d.train_size() * plane;
    for (std::size_t i = 0; i < d.train_size(); ++i)
      for (std::size_t k = 0; k < plane; ++k) {
        const double v = d.train_x[i * bytes + c * plane + k];
        sum += v;
      }
    const double mean = sum / double(n);
    for (std::size_t i = 0; i < d.train_size(); ++i)
      for (std::size_t k = 0; k < plane; ++k) {
        const double v = d.train_x[i * bytes + c * plane + k] - mean;
        sq += v * v;
      }
    double sd = std::sqrt(sq / double(n));
    if (!(sd > 0.0)) sd = 1.0;
    for (auto* xs : {&d.train_x, &d.test_x})
      for (std::size_t i = 0; i < xs->size() / bytes; ++i)
        for (std::size_t k = 0; k < plane; ++k) {
          float& v = (*xs)[i * bytes + c * plane + k];
          v = static_cast<float>((v - mean) / sd);
        }
  }
  return d;
}

template <typename T>
Batch<T> gather(const Dataset& data, bool train,
                std::span<const std::size_t> indices) {
  const auto& xs = train ? data.train_x : data.test_x;
  const auto& ys = train ? data.train_y : data.test_y;
  const std::size_t w = data.sample_size();
  if (indices.empty()) throw ContractError("gather: empty batch");
  std::vector<T> x(indices.size() * w);
  Batch<T> b;
  b.y.resize(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const std::size_t j = indices[i];
    if (j >= ys.size()) throw ContractError("gather: sample index out of range");
    for (std::size_t k = 0; k < w; ++k) x[i * w + k] = static_cast<T>(xs[j * w + k]);
    b.y[i] = ys[j];
  }
  Shape shape{indices.size()};
  shape.insert(shape.end(), data.sample_shape.begin(), data.sample_shape.end());
  b.x = Tensor<T>(std::move(shape), std::move(x));
  return b;
}

template Batch<float> gather(const Dataset&, bool, std::span<const std::size_t>);
template Batch<double> gather(const Dataset&, bool, std::span<const std::size_t>);

}  // namespace sparsify
