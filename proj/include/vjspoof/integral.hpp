#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "vjspoof/image.hpp"

namespace vjspoof {

/// Summed-area table with exact 64-bit sums. sum(x, y) is the total of all
/// source values at coordinates strictly less than (x, y); the table is
/// (width + 1) x (height + 1) with a zero first row and column.
class IntegralImage {
 public:
  IntegralImage() = default;
  IntegralImage(int width, int height, std::vector<std::int64_t> sums)
      : width_(width), height_(height), sums_(std::move(sums)) {}

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  int stride() const noexcept { return width_ + 1; }

  std::int64_t sum(int x, int y) const noexcept {
    return sums_[static_cast<std::size_t>(y) * static_cast<std::size_t>(stride()) +
                 static_cast<std::size_t>(x)];
  }

  /// Exact total over the w x h rectangle with top-left corner (x, y).
  std::int64_t rect_sum(int x, int y, int w, int h) const noexcept {
    return sum(x + w, y + h) - sum(x, y + h) - sum(x + w, y) + sum(x, y);
  }

  std::span<const std::int64_t> sums() const noexcept { return sums_; }

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::int64_t> sums_;
};

namespace detail {

template <typename Transform>
IntegralImage build_integral(const GrayImage& img, Transform f) {
  const int w = img.width();
  const int h = img.height();
  const std::size_t stride = static_cast<std::size_t>(w) + 1;
  std::vector<std::int64_t> s(stride * (static_cast<std::size_t>(h) + 1), 0);
  for (int y = 0; y < h; ++y) {
    std::int64_t row = 0;
    const std::size_t above = static_cast<std::size_t>(y) * stride;
    const std::size_t cur = above + stride;
    for (int x = 0; x < w; ++x) {
      row += f(img(x, y));
      s[cur + static_cast<std::size_t>(x) + 1] = s[above + static_cast<std::size_t>(x) + 1] + row;
    }
  }
  return IntegralImage(w, h, std::move(s));
}

}  // namespace detail

inline IntegralImage integral_image(const GrayImage& img) {
  return detail::build_integral(img, [](std::uint8_t v) { return std::int64_t{v}; });
}

/// Integral image of squared intensities (variance normalization).
inline IntegralImage squared_integral_image(const GrayImage& img) {
  return detail::build_integral(img, [](std::uint8_t v) { return std::int64_t{v} * v; });
}

}  // namespace vjspoof
