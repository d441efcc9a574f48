#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "vjspoof/error.hpp"
#include "vjspoof/rng.hpp"

namespace vjspoof {

struct Point {
  int x = 0;
  int y = 0;
  friend bool operator==(const Point&, const Point&) = default;
};

/// 8-bit grayscale raster, row-major, 0 = black.
class GrayImage {
 public:
  GrayImage() = default;

  GrayImage(int width, int height, std::uint8_t fill = 0)
      : width_(width), height_(height), pixels_(checked_area(width, height), fill) {}

  GrayImage(int width, int height, std::vector<std::uint8_t> pixels)
      : width_(width), height_(height), pixels_(std::move(pixels)) {
    if (pixels_.size() != checked_area(width, height)) {
      throw Error(Errc::dimension_mismatch,
                  "pixel buffer holds " + std::to_string(pixels_.size()) + " values for a " +
                      std::to_string(width) + "x" + std::to_string(height) + " image");
    }
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return pixels_.size(); }
  bool empty() const noexcept { return pixels_.empty(); }

  std::uint8_t operator()(int x, int y) const { return pixels_[index(x, y)]; }
  std::uint8_t& operator()(int x, int y) { return pixels_[index(x, y)]; }
  std::uint8_t operator[](std::size_t i) const { return pixels_[i]; }
  std::uint8_t& operator[](std::size_t i) { return pixels_[i]; }

  std::span<const std::uint8_t> pixels() const noexcept { return pixels_; }
  std::span<std::uint8_t> pixels() noexcept { return pixels_; }
  const std::uint8_t* data() const noexcept { return pixels_.data(); }

  bool same_shape(const GrayImage& o) const noexcept {
    return width_ == o.width_ && height_ == o.height_;
  }

  friend bool operator==(const GrayImage&, const GrayImage&) = default;

 private:
  static std::size_t checked_area(int w, int h) {
    if (w < 1 || h < 1) {
      throw Error(Errc::dimension_mismatch,
                  "image dimensions must be positive, got " + std::to_string(w) + "x" +
                      std::to_string(h));
    }
    return static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
  }
  std::size_t index(int x, int y) const noexcept {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> pixels_;
};

/// Rounds half away from zero, then clamps to [0, 255]. The one rounding rule
/// for every fractional-intensity computation in the library.
inline std::uint8_t round_clamp(double v) noexcept {
  if (!(v > 0.0)) return 0;  // also maps NaN to 0
  if (v >= 255.0) return 255;
  return static_cast<std::uint8_t>(std::round(v));
}

inline void require_same_shape(const GrayImage& a, const GrayImage& b, const char* what) {
  if (!a.same_shape(b)) {
    throw Error(Errc::dimension_mismatch,
                std::string(what) + ": " + std::to_string(a.width()) + "x" +
                    std::to_string(a.height()) + " vs " + std::to_string(b.width()) + "x" +
                    std::to_string(b.height()));
  }
}

/// Set of distinct pixel positions, stored as row-major indices in selection order.
class PixelSet {
 public:
  PixelSet() = default;
  PixelSet(int width, int height, std::vector<std::uint32_t> indices)
      : width_(width), height_(height), indices_(std::move(indices)) {}

  std::size_t size() const noexcept { return indices_.size(); }
  bool empty() const noexcept { return indices_.empty(); }
  std::span<const std::uint32_t> indices() const noexcept { return indices_; }

  Point point(std::size_t i) const {
    const auto idx = static_cast<int>(indices_[i]);
    return {idx % width_, idx / width_};
  }

  /// Membership mask over the full raster.
  std::vector<bool> mask() const {
    std::vector<bool> m(static_cast<std::size_t>(width_) * static_cast<std::size_t>(height_), false);
    for (auto i : indices_) m[i] = true;
    return m;
  }

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint32_t> indices_;
};

/// Pixelwise r * cover + (1 - r) * face.
inline GrayImage blend(const GrayImage& face, const GrayImage& cover, double r) {
  require_same_shape(face, cover, "blend");
  GrayImage out(face.width(), face.height());
  for (std::size_t i = 0; i < face.size(); ++i) {
    out[i] = round_clamp(r * cover[i] + (1.0 - r) * face[i]);
  }
  return out;
}

/// Chooses floor(r * N) distinct pixel indices uniformly without replacement
/// (partial Fisher-Yates over the index range).
inline PixelSet random_pixel_set(int width, int height, double r, Rng& rng) {
  const std::size_t n = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  const double clamped = std::clamp(r, 0.0, 1.0);
  auto count = static_cast<std::size_t>(std::floor(clamped * static_cast<double>(n)));
  count = std::min(count, n);
  std::vector<std::uint32_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::uint32_t{0});
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(uniform_below(rng, n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(count);
  return PixelSet(width, height, std::move(idx));
}

/// Spoof that takes the cover value on a random r-fraction of pixels.
inline std::pair<GrayImage, PixelSet> random_subset_spoof(const GrayImage& face,
                                                          const GrayImage& cover, double r,
                                                          Rng& rng) {
  require_same_shape(face, cover, "random_subset_spoof");
  PixelSet chosen = random_pixel_set(face.width(), face.height(), r, rng);
  GrayImage out = face;
  for (auto i : chosen.indices()) out[i] = cover[i];
  return {std::move(out), std::move(chosen)};
}

/// Random subset spoof whose chosen pixels take the b-blend of face and cover.
inline GrayImage random_of_blend_spoof(const GrayImage& face, const GrayImage& cover, double b,
                                       double r, Rng& rng) {
  require_same_shape(face, cover, "random_of_blend_spoof");
  return random_subset_spoof(face, blend(face, cover, b), r, rng).first;
}

/// Pixel replication: every pixel becomes a k x k block.
inline GrayImage upscale_replicate(const GrayImage& img, int k) {
  if (k < 1) throw Error(Errc::invalid_config, "upscale factor must be >= 1");
  if (k == 1) return img;
  GrayImage out(img.width() * k, img.height() * k);
  for (int y = 0; y < out.height(); ++y) {
    for (int x = 0; x < out.width(); ++x) out(x, y) = img(x / k, y / k);
  }
  return out;
}

/// Sum of absolute pixel differences.
inline std::uint64_t l1_distance(const GrayImage& a, const GrayImage& b) {
  require_same_shape(a, b, "l1_distance");
  std::uint64_t d = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    d += static_cast<std::uint64_t>(std::abs(int{a[i]} - int{b[i]}));
  }
  return d;
}

}  // namespace vjspoof
