#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "nrl/dataset.hpp"
#include "nrl/rng.hpp"

namespace nrl {

struct AugmentationConfig {
  bool crop_enabled = false;
  double crop_scale_lo = 1.0;
  double crop_scale_hi = 1.0;
  double flip_prob = 0.0;
  bool jitter_enabled = false;
  double brightness = 0.0;
  double contrast = 0.0;
  double saturation = 0.0;
  double grayscale_prob = 0.0;
  bool blur_enabled = false;
  double blur_sigma_lo = 0.0;
  double blur_sigma_hi = 0.0;

  void validate() const;

  static AugmentationConfig none();
  // SimCLR-style view augmentation, scaled to small images.
  static AugmentationConfig ssl_default();
  // Light augmentation for supervised fine-tuning.
  static AugmentationConfig supervised_default();
};

// Per-channel statistics of a dataset's raw pixels in [0, 1].
struct ChannelStats {
  std::array<double, 3> mean{0.5, 0.5, 0.5};
  std::array<double, 3> stddev{0.25, 0.25, 0.25};
};

ChannelStats compute_channel_stats(const LabeledDataset& ds);

// Applies crop / flip / jitter / grayscale / blur per the config, then
// standardizes per channel. Returns H x W x 3 doubles (HWC).
std::vector<double> augment_view(const std::uint8_t* image, std::size_t height,
                                 std::size_t width,
                                 const AugmentationConfig& config,
                                 const ChannelStats& stats, Rng& stream);

}  // namespace nrl
