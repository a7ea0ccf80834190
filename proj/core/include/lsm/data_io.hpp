#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "lsm/tensor.hpp"

namespace lsm::data {

/// N x C x H x W images (pixel values in [0,1] before normalization) and labels.
struct Dataset {
  DenseTensor<float> images;
  std::vector<int> labels;
  int num_classes = 10;

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t channels() const { return images.dim(1); }
  Shape example_shape() const { return {images.dim(1), images.dim(2), images.dim(3)}; }
  /// Examples [first, first + count) as a batch tensor.
  DenseTensor<float> batch(std::size_t first, std::size_t count) const;
  DenseTensor<float> gather(std::span<const std::size_t> indices) const;
  std::vector<int> gather_labels(std::span<const std::size_t> indices) const;
};

struct NormalizationStats {
  std::vector<double> mean;
  std::vector<double> std;
  std::vector<bool> guarded;  // std was below the guard and clamped
};

inline constexpr double kStdGuard = 1e-6;

/// IDX pair: images magic 0x00000803 (N, H, W), labels magic 0x00000801 (N).
Dataset load_idx(const std::filesystem::path& images_path,
                 const std::filesystem::path& labels_path);
void write_idx(const Dataset& dataset, const std::filesystem::path& images_path,
               const std::filesystem::path& labels_path);

/// CIFAR-10 binary: 3073-byte records (label byte + 3x32x32 pixels), concatenated.
Dataset load_cifar_bin(std::span<const std::filesystem::path> paths);
void write_cifar_bin(const Dataset& dataset, const std::filesystem::path& path);

/// Per-channel mean and population std of a (training) split.
NormalizationStats compute_normalization(const Dataset& training);
/// (x - mean_c) / std_c with std clamped to kStdGuard.
Dataset normalize(const Dataset& dataset, const NormalizationStats& stats);
/// Inverse map back to pixel space.
DenseTensor<float> denormalize(const DenseTensor<float>& images, const NormalizationStats& stats);
DenseTensor<float> normalize_images(const DenseTensor<float>& images,
                                    const NormalizationStats& stats);

/// First `count` examples starting at `first` (clamped to the dataset size).
Dataset subset(const Dataset& dataset, std::size_t first, std::size_t count);

/// Seeded grayscale toy dataset: each class is a prototype of three Gaussian
/// blobs; examples are shifted, rescaled and noisy copies.
struct SyntheticSpec {
  std::size_t count = 2000;
  std::size_t side = 12;
  int num_classes = 10;
  double pixel_noise = 0.15;
  int max_shift = 1;
  std::uint64_t prototype_seed = 7;  // shared between train and test splits
  std::uint64_t sample_seed = 1;
};
Dataset make_synthetic(const SyntheticSpec& spec);

}  // namespace lsm::data
