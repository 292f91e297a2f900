#include "nrl/augment.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace nrl {
namespace {

constexpr double kLumaR = 0.299, kLumaG = 0.587, kLumaB = 0.114;

double luminance(const double* px) {
  return kLumaR * px[0] + kLumaG * px[1] + kLumaB * px[2];
}

void clamp01(std::vector<double>& buf) {
  for (double& v : buf) v = std::clamp(v, 0.0, 1.0);
}

// bilinear sample of a crop window resized back to the full frame
std::vector<double> resize_crop(const std::vector<double>& src, std::size_t h,
                                std::size_t w, std::size_t y0, std::size_t x0,
                                std::size_t ch, std::size_t cw) {
  std::vector<double> out(h * w * 3);
  for (std::size_t y = 0; y < h; ++y) {
    const double sy = (static_cast<double>(y) + 0.5) * static_cast<double>(ch) /
                          static_cast<double>(h) -
                      0.5 + static_cast<double>(y0);
    for (std::size_t x = 0; x < w; ++x) {
      const double sx = (static_cast<double>(x) + 0.5) *
                            static_cast<double>(cw) / static_cast<double>(w) -
                        0.5 + static_cast<double>(x0);
      const double fy = std::clamp(sy, 0.0, static_cast<double>(h - 1));
      const double fx = std::clamp(sx, 0.0, static_cast<double>(w - 1));
      const std::size_t iy0 = static_cast<std::size_t>(fy);
      const std::size_t ix0 = static_cast<std::size_t>(fx);
      const std::size_t iy1 = std::min(iy0 + 1, h - 1);
      const std::size_t ix1 = std::min(ix0 + 1, w - 1);
      const double wy = fy - static_cast<double>(iy0);
      const double wx = fx - static_cast<double>(ix0);
      for (std::size_t c = 0; c < 3; ++c) {
        const double v00 = src[(iy0 * w + ix0) * 3 + c];
        const double v01 = src[(iy0 * w + ix1) * 3 + c];
        const double v10 = src[(iy1 * w + ix0) * 3 + c];
        const double v11 = src[(iy1 * w + ix1) * 3 + c];
        out[(y * w + x) * 3 + c] = (1 - wy) * ((1 - wx) * v00 + wx * v01) +
                                   wy * ((1 - wx) * v10 + wx * v11);
      }
    }
  }
  return out;
}

void gaussian_blur(std::vector<double>& buf, std::size_t h, std::size_t w,
                   double sigma) {
  if (sigma <= 0.0) return;
  const int radius = std::max(1, static_cast<int>(std::ceil(2.5 * sigma)));
  std::vector<double> kernel(2 * radius + 1);
  double norm = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    kernel[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    norm += kernel[i + radius];
  }
  for (double& k : kernel) k /= norm;

  std::vector<double> tmp(buf.size());
  const int ih = static_cast<int>(h), iw = static_cast<int>(w);
  // horizontal pass, clamp to edge
  for (int y = 0; y < ih; ++y) {
    for (int x = 0; x < iw; ++x) {
      for (int c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (int i = -radius; i <= radius; ++i) {
          const int sx = std::clamp(x + i, 0, iw - 1);
          acc += kernel[i + radius] * buf[(y * iw + sx) * 3 + c];
        }
        tmp[(y * iw + x) * 3 + c] = acc;
      }
    }
  }
  // vertical pass
  for (int y = 0; y < ih; ++y) {
    for (int x = 0; x < iw; ++x) {
      for (int c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (int i = -radius; i <= radius; ++i) {
          const int sy = std::clamp(y + i, 0, ih - 1);
          acc += kernel[i + radius] * tmp[(sy * iw + x) * 3 + c];
        }
        buf[(y * iw + x) * 3 + c] = acc;
      }
    }
  }
}

}  // namespace

void AugmentationConfig::validate() const {
  auto prob_ok = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!prob_ok(flip_prob) || !prob_ok(grayscale_prob)) {
    throw std::invalid_argument("augmentation: probability outside [0, 1]");
  }
  if (crop_enabled &&
      !(crop_scale_lo > 0.0 && crop_scale_lo <= crop_scale_hi &&
        crop_scale_hi <= 1.0)) {
    throw std::invalid_argument("augmentation: crop scale range must satisfy 0 < lo <= hi <= 1");
  }
  if (blur_enabled && !(blur_sigma_lo >= 0.0 && blur_sigma_lo <= blur_sigma_hi)) {
    throw std::invalid_argument("augmentation: blur sigma range invalid");
  }
}

AugmentationConfig AugmentationConfig::none() { return {}; }

AugmentationConfig AugmentationConfig::ssl_default() {
  AugmentationConfig c;
  c.crop_enabled = true;
  c.crop_scale_lo = 0.2;
  c.crop_scale_hi = 1.0;
  c.jitter_enabled = true;
  c.brightness = 0.4;
  c.contrast = 0.4;
  c.saturation = 0.4;
  c.grayscale_prob = 0.1;
  c.blur_enabled = true;
  c.blur_sigma_lo = 0.1;
  c.blur_sigma_hi = 1.0;
  return c;
}

AugmentationConfig AugmentationConfig::supervised_default() {
  AugmentationConfig c;
  c.crop_enabled = true;
  c.crop_scale_lo = 0.8;
  c.crop_scale_hi = 1.0;
  return c;
}

ChannelStats compute_channel_stats(const LabeledDataset& ds) {
  ChannelStats st;
  const std::size_t pixels = ds.count() * ds.height * ds.width;
  if (pixels == 0) return st;
  double sum[3] = {0, 0, 0};
  for (std::size_t i = 0; i < pixels; ++i) {
    for (std::size_t c = 0; c < 3; ++c) {
      sum[c] += ds.images[i * 3 + c] / 255.0;
    }
  }
  for (std::size_t c = 0; c < 3; ++c) {
    st.mean[c] = sum[c] / static_cast<double>(pixels);
  }
  double var[3] = {0, 0, 0};
  for (std::size_t i = 0; i < pixels; ++i) {
    for (std::size_t c = 0; c < 3; ++c) {
      const double d = ds.images[i * 3 + c] / 255.0 - st.mean[c];
      var[c] += d * d;
    }
  }
  for (std::size_t c = 0; c < 3; ++c) {
    st.stddev[c] = std::max(std::sqrt(var[c] / static_cast<double>(pixels)), 1e-6);
  }
  return st;
}

std::vector<double> augment_view(const std::uint8_t* image, std::size_t height,
                                 std::size_t width,
                                 const AugmentationConfig& config,
                                 const ChannelStats& stats, Rng& stream) {
  config.validate();
  const std::size_t h = height, w = width;
  std::vector<double> buf(h * w * 3);
  for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = image[i] / 255.0;

  if (config.crop_enabled) {
    std::size_t cw = w, ch = h, x0 = 0, y0 = 0;
    bool found = false;
    for (int attempt = 0; attempt < 10 && !found; ++attempt) {
      const double area = stream.uniform(config.crop_scale_lo, config.crop_scale_hi) *
                          static_cast<double>(h * w);
      const double log_ratio = stream.uniform(std::log(3.0 / 4.0), std::log(4.0 / 3.0));
      const double aspect = std::exp(log_ratio);
      const std::size_t tw = std::max<std::size_t>(
          1, static_cast<std::size_t>(std::lround(std::sqrt(area * aspect))));
      const std::size_t th = std::max<std::size_t>(
          1, static_cast<std::size_t>(std::lround(std::sqrt(area / aspect))));
      if (tw <= w && th <= h) {
        cw = tw;
        ch = th;
        x0 = stream.uniform_index(w - tw + 1);
        y0 = stream.uniform_index(h - th + 1);
        found = true;
      }
    }
    if (found && (cw != w || ch != h || x0 != 0 || y0 != 0)) {
      buf = resize_crop(buf, h, w, y0, x0, ch, cw);
    }
  }

  if (config.flip_prob > 0.0 && stream.uniform() < config.flip_prob) {
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w / 2; ++x) {
        for (std::size_t c = 0; c < 3; ++c) {
          std::swap(buf[(y * w + x) * 3 + c], buf[(y * w + (w - 1 - x)) * 3 + c]);
        }
      }
    }
  }

  if (config.jitter_enabled) {
    const double fb = stream.uniform(1.0 - config.brightness, 1.0 + config.brightness);
    const double fc = stream.uniform(1.0 - config.contrast, 1.0 + config.contrast);
    const double fs = stream.uniform(1.0 - config.saturation, 1.0 + config.saturation);
    for (double& v : buf) v *= fb;
    clamp01(buf);
    double mu = 0.0;
    for (std::size_t p = 0; p < h * w; ++p) mu += luminance(&buf[p * 3]);
    mu /= static_cast<double>(h * w);
    for (double& v : buf) v = mu + fc * (v - mu);
    clamp01(buf);
    for (std::size_t p = 0; p < h * w; ++p) {
      const double g = luminance(&buf[p * 3]);
      for (std::size_t c = 0; c < 3; ++c) {
        buf[p * 3 + c] = g + fs * (buf[p * 3 + c] - g);
      }
    }
    clamp01(buf);
  }

  if (config.grayscale_prob > 0.0 && stream.uniform() < config.grayscale_prob) {
    for (std::size_t p = 0; p < h * w; ++p) {
      const double g = luminance(&buf[p * 3]);
      buf[p * 3] = buf[p * 3 + 1] = buf[p * 3 + 2] = g;
    }
  }

  if (config.blur_enabled) {
    const double sigma = stream.uniform(config.blur_sigma_lo, config.blur_sigma_hi);
    gaussian_blur(buf, h, w, sigma);
  }

  for (std::size_t p = 0; p < h * w; ++p) {
    for (std::size_t c = 0; c < 3; ++c) {
      buf[p * 3 + c] = (buf[p * 3 + c] - stats.mean[c]) / stats.stddev[c];
    }
  }
  return buf;
}

}  // namespace nrl
