#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace nrl {

// Images stored as n x H x W x 3 interleaved 8-bit channels.
struct LabeledDataset {
  std::string name;
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t num_classes = 0;
  std::vector<std::uint8_t> images;
  std::vector<std::size_t> labels;

  std::size_t count() const { return labels.size(); }
  std::size_t image_bytes() const { return height * width * 3; }
  const std::uint8_t* image(std::size_t i) const {
    return images.data() + i * image_bytes();
  }
};

// A dataset with injected label noise. The pristine labels and the
// corruption mask are retained for evaluation only.
struct NoisySplit {
  LabeledDataset base;
  std::vector<std::size_t> noisy_labels;
  std::vector<bool> corrupted_mask;
  double eta = 0.0;
};

// CIFAR binary format: 3073-byte records (label + 3072 planar pixels) for the
// 10-class layout, 3074-byte records (coarse + fine label) when
// expected_classes == 100; the fine label is used.
LabeledDataset load_cifar_binary(const std::string& path,
                                 std::size_t expected_classes);

// Procedural stand-in dataset: per-class oriented stripe textures with
// class-specific color palettes, randomized per image by phase, translation
// and pixel noise. Labels are emitted class-major.
LabeledDataset generate_synthetic(std::size_t num_classes,
                                  std::size_t n_per_class, std::size_t height,
                                  std::uint64_t seed);

// Flips exactly round(eta * n) labels, chosen by seeded permutation, each to
// a uniformly drawn different class.
NoisySplit inject_noise(const LabeledDataset& dataset, double eta,
                        std::uint64_t seed);

}  // namespace nrl
