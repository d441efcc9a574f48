#pragma once

// Display-to-camera degradation model. Five effects in fixed order: pixel
// replication, additive brightening map, two-piece response curve, Gaussian
// blur, i.i.d. Gaussian noise. Everything runs on doubles with one final
// round_clamp.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "vjspoof/error.hpp"
#include "vjspoof/image.hpp"
#include "vjspoof/rng.hpp"

namespace vjspoof {

/// Real-valued raster, row-major.
struct RealImage {
  int width = 0;
  int height = 0;
  std::vector<double> values;

  RealImage() = default;
  RealImage(int w, int h, double fill = 0.0)
      : width(w), height(h), values(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill) {}

  double& operator()(int x, int y) {
    return values[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)];
  }
  double operator()(int x, int y) const {
    return values[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)];
  }

  static RealImage from(const GrayImage& g) {
    RealImage r(g.width(), g.height());
    for (std::size_t i = 0; i < g.size(); ++i) r.values[i] = g[i];
    return r;
  }

  GrayImage quantize() const {
    GrayImage g(width, height);
    for (std::size_t i = 0; i < values.size(); ++i) g[i] = round_clamp(values[i]);
    return g;
  }
};

/// Zero-mean per-pixel offsets at channel resolution.
class OffsetMap {
 public:
  OffsetMap() = default;

  /// Centers the given values on their own mean.
  OffsetMap(int width, int height, std::vector<double> values)
      : width_(width), height_(height), offsets_(std::move(values)) {
    if (width < 1 || height < 1 ||
        offsets_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
      throw Error(Errc::dimension_mismatch, "offset map values do not match its dimensions");
    }
    const double mean = std::accumulate(offsets_.begin(), offsets_.end(), 0.0) /
                        static_cast<double>(offsets_.size());
    for (double& v : offsets_) v -= mean;
  }

  static OffsetMap zeros(int width, int height) {
    return OffsetMap(width, height,
                     std::vector<double>(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), 0.0));
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  bool empty() const noexcept { return offsets_.empty(); }
  const std::vector<double>& values() const noexcept { return offsets_; }
  double operator()(int x, int y) const {
    return offsets_[static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x)];
  }
  double max_abs() const {
    double m = 0.0;
    for (double v : offsets_) m = std::max(m, std::abs(v));
    return m;
  }

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<double> offsets_;
};

/// Smooth radial brightening: a centered Gaussian bump, mean-removed and
/// scaled so the center offset equals peak.
inline OffsetMap synthetic_brightening(int width, int height, double peak) {
  const double cx = (width - 1) / 2.0;
  const double cy = (height - 1) / 2.0;
  const double sx = 0.4 * width;
  const double sy = 0.4 * height;
  std::vector<double> bump(static_cast<std::size_t>(width) * static_cast<std::size_t>(height));
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double dx = (x - cx) / sx;
      const double dy = (y - cy) / sy;
      bump[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)] =
          std::exp(-0.5 * (dx * dx + dy * dy));
    }
  }
  const double mean = std::accumulate(bump.begin(), bump.end(), 0.0) / static_cast<double>(bump.size());
  const double top = *std::max_element(bump.begin(), bump.end());
  const double a = top > mean ? peak / (top - mean) : 0.0;
  for (double& v : bump) v = a * (v - mean);
  return OffsetMap(width, height, std::move(bump));
}

/// Continuous two-piece linear intensity response, extended linearly past [0, 255].
struct ResponseCurve {
  double knot_x = 128.0;
  double knot_y = 128.0;
  double slope_low = 1.0;
  double slope_high = 1.0;

  static ResponseCurve identity() { return {}; }

  double operator()(double v) const noexcept {
    const double d = v - knot_x;
    return knot_y + (d <= 0.0 ? slope_low : slope_high) * d;
  }

  void validate() const {
    if (!(knot_x > 0.0 && knot_x < 255.0)) {
      throw Error(Errc::invalid_config, "response knot x must lie in (0, 255)");
    }
    if (!(slope_low >= 0.0 && slope_high >= 0.0)) {
      throw Error(Errc::invalid_config, "response slopes must be >= 0");
    }
  }

  friend bool operator==(const ResponseCurve&, const ResponseCurve&) = default;
};

/// Dark-contrast reduction used when no calibration is available: keeps 0 and
/// 255 fixed and bends at (96, 80).
inline ResponseCurve default_response_curve() { return {96.0, 80.0, 80.0 / 96.0, 175.0 / 159.0}; }

struct ChannelParams {
  int upscale_k = 4;
  OffsetMap brightening;  // upscale_k x spoof dimensions
  ResponseCurve response = default_response_curve();
  double blur_sigma = 0.9;
  double noise_sigma = 1.5;

  void validate() const {
    if (upscale_k < 1) throw Error(Errc::invalid_config, "upscale_k must be >= 1");
    if (!(blur_sigma >= 0.0)) throw Error(Errc::invalid_config, "blur_sigma must be >= 0");
    if (!(noise_sigma >= 0.0)) throw Error(Errc::invalid_config, "noise_sigma must be >= 0");
    response.validate();
  }
};

/// Reference channel for a spoof of the given size: k = 4, synthetic map with a +6 peak.
inline ChannelParams default_channel_params(int spoof_width, int spoof_height) {
  ChannelParams p;
  p.brightening = synthetic_brightening(4 * spoof_width, 4 * spoof_height, 6.0);
  return p;
}

/// Identity channel at factor k: zero offsets, identity curve, no blur, no noise.
inline ChannelParams identity_channel_params(int spoof_width, int spoof_height, int k = 1) {
  ChannelParams p;
  p.upscale_k = k;
  p.brightening = OffsetMap::zeros(k * spoof_width, k * spoof_height);
  p.response = ResponseCurve::identity();
  p.blur_sigma = 0.0;
  p.noise_sigma = 0.0;
  return p;
}

/// Normalized Gaussian taps over [-ceil(3 sigma), ceil(3 sigma)].
inline std::vector<double> gaussian_kernel(double sigma) {
  const int r = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(static_cast<std::size_t>(2 * r + 1));
  double total = 0.0;
  for (int i = -r; i <= r; ++i) {
    const double w = std::exp(-0.5 * (i * i) / (sigma * sigma));
    k[static_cast<std::size_t>(i + r)] = w;
    total += w;
  }
  for (double& w : k) w /= total;
  return k;
}

/// Separable Gaussian blur with clamp-to-edge borders; sigma = 0 is the identity.
inline RealImage gaussian_blur(const RealImage& img, double sigma) {
  if (!(sigma > 0.0)) return img;
  const std::vector<double> k = gaussian_kernel(sigma);
  const int r = static_cast<int>(k.size() / 2);
  const int w = img.width;
  const int h = img.height;
  RealImage tmp(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -r; i <= r; ++i) {
        acc += k[static_cast<std::size_t>(i + r)] * img(std::clamp(x + i, 0, w - 1), y);
      }
      tmp(x, y) = acc;
    }
  }
  RealImage out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -r; i <= r; ++i) {
        acc += k[static_cast<std::size_t>(i + r)] * tmp(x, std::clamp(y + i, 0, h - 1));
      }
      out(x, y) = acc;
    }
  }
  return out;
}

/// Everything but the noise, still in reals.
inline RealImage apply_channel_noise_free(const GrayImage& img, const ChannelParams& p) {
  if (p.upscale_k < 1) throw Error(Errc::invalid_config, "upscale_k must be >= 1");
  const int k = p.upscale_k;
  const int w = img.width() * k;
  const int h = img.height() * k;
  if (p.brightening.width() != w || p.brightening.height() != h) {
    throw Error(Errc::dimension_mismatch,
                "brightening map is " + std::to_string(p.brightening.width()) + "x" +
                    std::to_string(p.brightening.height()) + ", channel image is " +
                    std::to_string(w) + "x" + std::to_string(h));
  }
  RealImage r(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) r(x, y) = p.response(img(x / k, y / k) + p.brightening(x, y));
  }
  return gaussian_blur(r, p.blur_sigma);
}

/// One pass through the simulated channel. Noise draws one standard normal per
/// output pixel in row-major order from rng.
inline GrayImage apply_channel(const GrayImage& img, const ChannelParams& p, Rng& rng) {
  RealImage r = apply_channel_noise_free(img, p);
  if (p.noise_sigma > 0.0) {
    GaussianSampler normal;
    for (double& v : r.values) v += p.noise_sigma * normal(rng);
  }
  return r.quantize();
}

}  // namespace vjspoof
