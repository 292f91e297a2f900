#include "nrl/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include "nrl/rng.hpp"

namespace nrl {
namespace {

constexpr std::size_t kCifarDim = 32;
constexpr std::size_t kCifarPixels = kCifarDim * kCifarDim;

struct Color {
  double r, g, b;
};

// fixed palette; every image draws its own color pair, so color carries no
// class information and orientation is the only class cue
constexpr Color kPalette[8] = {
    {220, 60, 60},  {60, 180, 75},   {65, 105, 225}, {240, 200, 50},
    {170, 60, 200}, {70, 210, 210},  {245, 130, 40}, {240, 240, 240},
};

}  // namespace

LabeledDataset load_cifar_binary(const std::string& path,
                                 std::size_t expected_classes) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<char> raw((std::istreambuf_iterator<char>(in)),
                        std::istreambuf_iterator<char>());

  const std::size_t label_bytes = expected_classes == 100 ? 2 : 1;
  const std::size_t record = label_bytes + 3 * kCifarPixels;
  if (raw.empty() || raw.size() % record != 0) {
    throw std::runtime_error(
        path + ": bad CIFAR file length " + std::to_string(raw.size()) +
        " (record size " + std::to_string(record) + ", remainder " +
        std::to_string(raw.size() % record) + ")");
  }
  const std::size_t n = raw.size() / record;

  LabeledDataset ds;
  ds.name = path;
  ds.height = kCifarDim;
  ds.width = kCifarDim;
  ds.num_classes = expected_classes;
  ds.labels.resize(n);
  ds.images.resize(n * 3 * kCifarPixels);
  for (std::size_t i = 0; i < n; ++i) {
    const auto* rec = reinterpret_cast<const std::uint8_t*>(raw.data()) +
                      i * record;
    const std::uint8_t label = rec[label_bytes - 1];  // fine label when 2 bytes
    if (label >= expected_classes) {
      throw std::runtime_error(path + ": label byte " + std::to_string(label) +
                               " >= " + std::to_string(expected_classes) +
                               " at offset " +
                               std::to_string(i * record + label_bytes - 1));
    }
    ds.labels[i] = label;
    // planar R, G, B -> interleaved HWC
    const std::uint8_t* planes = rec + label_bytes;
    std::uint8_t* dst = ds.images.data() + i * 3 * kCifarPixels;
    for (std::size_t px = 0; px < kCifarPixels; ++px) {
      dst[px * 3 + 0] = planes[px];
      dst[px * 3 + 1] = planes[kCifarPixels + px];
      dst[px * 3 + 2] = planes[2 * kCifarPixels + px];
    }
  }
  return ds;
}

LabeledDataset generate_synthetic(std::size_t num_classes,
                                  std::size_t n_per_class, std::size_t height,
                                  std::uint64_t seed) {
  if (num_classes < 2) throw std::invalid_argument("generate_synthetic: K >= 2 required");
  if (n_per_class < 1) throw std::invalid_argument("generate_synthetic: n_per_class >= 1 required");

  const std::size_t h = height, w = height;
  LabeledDataset ds;
  ds.name = "synthetic:K=" + std::to_string(num_classes) +
            ",n=" + std::to_string(num_classes * n_per_class) +
            ",H=" + std::to_string(height);
  ds.height = h;
  ds.width = w;
  ds.num_classes = num_classes;
  ds.labels.reserve(num_classes * n_per_class);
  ds.images.resize(num_classes * n_per_class * h * w * 3);

  std::size_t idx = 0;
  for (std::size_t k = 0; k < num_classes; ++k) {
    const double angle = std::numbers::pi * static_cast<double>(k) /
                         static_cast<double>(num_classes);
    const double ca = std::cos(angle), sa = std::sin(angle);
    for (std::size_t s = 0; s < n_per_class; ++s, ++idx) {
      ds.labels.push_back(k);
      Rng rng(mix_seed(seed, idx));
      const std::size_t p0 = rng.uniform_index(8);
      const std::size_t p1 = (p0 + 1 + rng.uniform_index(7)) % 8;
      const Color c0 = kPalette[p0];
      const Color c1 = kPalette[p1];
      const double freq = rng.uniform(2.5, 3.5);
      const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
      const double brightness = rng.uniform(0.75, 1.25);
      const double dx = rng.uniform(-0.125, 0.125) * static_cast<double>(w);
      const double dy = rng.uniform(-0.125, 0.125) * static_cast<double>(h);
      std::uint8_t* img = ds.images.data() + idx * h * w * 3;
      for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
          const double px = static_cast<double>(x) + dx;
          const double py = static_cast<double>(y) + dy;
          const double t = 0.5 + 0.5 * std::sin(2.0 * std::numbers::pi * freq *
                                                    (px * ca + py * sa) /
                                                    static_cast<double>(h) +
                                                phase);
          const double noise_r = rng.normal() * 18.0;
          const double noise_g = rng.normal() * 18.0;
          const double noise_b = rng.normal() * 18.0;
          auto channel = [&](double a, double b, double noise) {
            const double v = (a + (b - a) * t) * brightness + noise;
            return static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
          };
          std::uint8_t* dst = img + (y * w + x) * 3;
          dst[0] = channel(c0.r, c1.r, noise_r);
          dst[1] = channel(c0.g, c1.g, noise_g);
          dst[2] = channel(c0.b, c1.b, noise_b);
        }
      }
    }
  }
  return ds;
}

NoisySplit inject_noise(const LabeledDataset& dataset, double eta,
                        std::uint64_t seed) {
  if (eta < 0.0 || eta > 1.0) {
    throw std::invalid_argument("inject_noise: eta must be in [0, 1]");
  }
  const std::size_t n = dataset.count();
  const std::size_t flips =
      static_cast<std::size_t>(std::llround(eta * static_cast<double>(n)));
  if (flips > 0 && dataset.num_classes < 2) {
    throw std::invalid_argument(
        "inject_noise: no different class exists with K < 2");
  }

  NoisySplit split;
  split.base = dataset;
  split.eta = eta;
  split.noisy_labels = dataset.labels;
  split.corrupted_mask.assign(n, false);

  Rng rng(seed);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);
  for (std::size_t i = 0; i < flips; ++i) {
    const std::size_t idx = order[i];
    // uniform over the K-1 classes other than the original
    std::size_t target = rng.uniform_index(dataset.num_classes - 1);
    if (target >= dataset.labels[idx]) ++target;
    split.noisy_labels[idx] = target;
    split.corrupted_mask[idx] = true;
  }
  return split;
}

}  // namespace nrl
