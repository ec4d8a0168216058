#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "naa/tensor.hpp"

namespace naa {

inline constexpr std::uint16_t kDatasetFormatVersion = 1;

/// Images in [0,1] stored as [count, C, H, W] f32, with one label each.
struct Dataset {
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<float> pixels;
  std::vector<std::uint16_t> labels;

  std::size_t count() const { return labels.size(); }
  std::size_t image_size() const { return channels * height * width; }
  Shape image_shape() const { return {channels, height, width}; }

  std::span<const float> pixels_of(std::size_t i) const {
    return std::span<const float>(pixels).subspan(i * image_size(), image_size());
  }

  template <typename T>
  Tensor<T> image(std::size_t i) const {
    const auto px = pixels_of(i);
    Tensor<T> t(image_shape());
    for (std::size_t k = 0; k < px.size(); ++k) t[k] = static_cast<T>(px[k]);
    return t;
  }

  /// Images [first, first + n).
  Dataset slice(std::size_t first, std::size_t n) const;

  bool operator==(const Dataset&) const = default;
};

/// A training set and a held-out test set generated from disjoint sample indices.
struct SplitDataset {
  Dataset train;
  Dataset test;
};

struct SyntheticOptions {
  std::uint64_t seed = 0;
  std::size_t count = 0;
  std::size_t classes = 10;
  std::size_t size = 32;
  std::size_t channels = 3;
  /// Labels cycle 0..classes-1 instead of being drawn at random.
  bool stratified = true;
  /// Index of the first sample; each sample is a pure function of (seed, index).
  std::size_t first_index = 0;
};

/// Parametric shapes: each class has its own geometry; position, scale,
/// colors and pixel noise are drawn from a per-sample stream.
Dataset generate_synthetic(const SyntheticOptions& options);

/// Default recipe: `train_count` samples then `test_count` more from the same seed.
SplitDataset generate_default_split(std::uint64_t seed, std::size_t train_count = 6000,
                                    std::size_t test_count = 1000);

std::vector<std::size_t> class_histogram(const Dataset& data, std::size_t classes);

std::vector<std::uint8_t> encode_dataset(const Dataset& data);
Dataset decode_dataset(std::span<const std::uint8_t> bytes);
void write_dataset(const Dataset& data, const std::string& path);
Dataset read_dataset(const std::string& path);

/// FNV-1a of the canonical encoding.
std::uint64_t dataset_checksum(const Dataset& data);

}  // namespace naa
