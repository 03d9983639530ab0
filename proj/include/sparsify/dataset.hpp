// Copyright 2026 The sparsify Authors
// Licensed under the Apache License, Version 2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "sparsify/tensor.hpp"

namespace sparsify {

/// In-memory classification data. Samples are stored row-major, one
/// `sample_size()` slice per example.
struct Dataset {
  std::string name;
  Shape sample_shape;  // {features} or {C, H, W}
  std::size_t classes = 0;
  std::vector<float> train_x, test_x;
  std::vector<int> train_y, test_y;

  std::size_t sample_size() const { return numel(sample_shape); }
  std::size_t train_size() const { return train_y.size(); }
  std::size_t test_size() const { return test_y.size(); }
  bool is_image() const { return sample_shape.size() == 3; }
};

struct SyntheticOptions {
  std::size_t train_size = 1000;
  std::size_t test_size = 1000;
  std::uint64_t seed = 0;
  double noise = 1.0;
  /// two_gaussians: distance between the class means along every axis / dims.
  double separation = 2.0;
  std::size_t dims = 2;
  std::size_t classes = 4;               // patterns
  std::vector<std::size_t> image_shape;  // patterns: {C, H, W}
};

/// Two isotropic Gaussian classes centred at -/+ separation/2 on the diagonal.
Dataset make_two_gaussians(const SyntheticOptions& o);

/// Two concentric rings of radii 1 and 2 in the plane, radial noise `noise`.
Dataset make_rings(const SyntheticOptions& o);

/// Image classes defined by random smooth prototypes; each sample is its
/// class prototype shifted by up to one pixel, scaled and corrupted with
/// Gaussian noise of std `noise`.
Dataset make_patterns(const SyntheticOptions& o);

/// Reads a CSV manifest with header `file,label,split` (split is train or
/// test). Every file is a raw uint8 image of product(image_shape) bytes,
/// relative to the manifest's directory. Pixels are scaled to [0, 1] and then
/// normalized per channel with statistics from the train split. Errors name
/// the offending manifest line or file (DatasetError).
Dataset load_manifest(const std::filesystem::path& manifest,
                      const std::vector<std::size_t>& image_shape);

/// Batch of samples `indices` from a split, converted to T.
template <typename T>
struct Batch {
  Tensor<T> x;
  std::vector<int> y;
};

template <typename T>
Batch<T> gather(const Dataset& data, bool train,
                std::span<const std::size_t> indices);

}  // namespace sparsify
