#pragma once

// Bit-exact bilinear resampling for the detector's image pyramid.
//
// Fixed-point arithmetic with 8 fractional bits per axis: coefficients are
// rounded to 1/256, the horizontal pass keeps 8.8 values, the vertical pass
// accumulates 16.16 and rounds once. Samples that fall outside the source
// replicate the border row or column. This reproduces the reference
// detector's pyramid exactly, which detection parity depends on.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "vjspoof/image.hpp"

namespace vjspoof {

namespace detail {

struct LinearAxis {
  std::vector<int> offset;
  std::vector<std::uint32_t> c0;
  std::vector<std::uint32_t> c1;
  int first_inner = 0;  // destination samples before this copy the first source sample
  int last_inner = 0;   // destination samples from this on copy the last source sample
};

inline LinearAxis linear_axis(int src_size, int dst_size) {
  LinearAxis a;
  a.offset.assign(static_cast<std::size_t>(dst_size), 0);
  a.c0.assign(static_cast<std::size_t>(dst_size), 0);
  a.c1.assign(static_cast<std::size_t>(dst_size), 0);
  a.first_inner = 0;
  a.last_inner = dst_size;
  const double inv_scale = static_cast<double>(dst_size) / static_cast<double>(src_size);
  const double scale = 1.0 / inv_scale;
  for (int d = 0; d < dst_size; ++d) {
    const double f = scale * (static_cast<double>(d) + 0.5) - 0.5;
    const int i = static_cast<int>(std::floor(f));
    const auto k = static_cast<std::size_t>(d);
    if (i >= 0 && src_size > 1) {
      if (i < src_size - 1) {
        a.offset[k] = i;
        const double w1 = std::nearbyint((f - static_cast<double>(i)) * 256.0);
        a.c1[k] = static_cast<std::uint32_t>(w1);
        a.c0[k] = 256u - a.c1[k];
      } else {
        a.offset[k] = src_size - 1;
        a.last_inner = std::min(a.last_inner, d);
      }
    } else {
      a.first_inner = std::max(a.first_inner, d + 1);
    }
  }
  return a;
}

/// Horizontal pass over one source row into 8.8 fixed point.
inline void resize_row(const std::uint8_t* src, int src_w, const LinearAxis& ax, int dst_w,
                       std::uint32_t* out) {
  const int lo = std::min(ax.first_inner, dst_w);
  const int hi = std::max(lo, std::min(ax.last_inner, dst_w));
  int x = 0;
  for (; x < lo; ++x) out[x] = std::uint32_t{src[0]} << 8;
  for (; x < hi; ++x) {
    const auto k = static_cast<std::size_t>(x);
    const std::uint8_t* p = src + ax.offset[k];
    out[x] = std::uint32_t{p[0]} * ax.c0[k] + std::uint32_t{p[1]} * ax.c1[k];
  }
  const int last = src_w > 1 ? ax.offset[static_cast<std::size_t>(dst_w - 1)] : 0;
  for (; x < dst_w; ++x) out[x] = std::uint32_t{src[last]} << 8;
}

}  // namespace detail

/// Resizes to dst_w x dst_h with bit-exact fixed-point bilinear interpolation.
inline GrayImage resize_bilinear_exact(const GrayImage& src, int dst_w, int dst_h) {
  if (dst_w == src.width() && dst_h == src.height()) return src;
  const int sw = src.width();
  const int sh = src.height();
  const detail::LinearAxis ax = detail::linear_axis(sw, dst_w);
  const detail::LinearAxis ay = detail::linear_axis(sh, dst_h);

  GrayImage dst(dst_w, dst_h);
  std::vector<std::uint32_t> row0(static_cast<std::size_t>(dst_w));
  std::vector<std::uint32_t> row1(static_cast<std::size_t>(dst_w));
  int row0_src = -1;
  int row1_src = -1;
  auto hrow = [&](int sy, std::vector<std::uint32_t>& buf, int& cached) {
    if (cached != sy) {
      detail::resize_row(src.data() + static_cast<std::size_t>(sy) * static_cast<std::size_t>(sw),
                         sw, ax, dst_w, buf.data());
      cached = sy;
    }
  };
  auto put_rounded = [&](int dy, const std::vector<std::uint32_t>& h) {
    for (int x = 0; x < dst_w; ++x) dst(x, dy) = static_cast<std::uint8_t>((h[static_cast<std::size_t>(x)] + 128u) >> 8);
  };

  const int lo = std::min(ay.first_inner, dst_h);
  const int hi = std::max(lo, std::min(ay.last_inner, dst_h));
  int dy = 0;
  for (; dy < lo; ++dy) {
    hrow(0, row0, row0_src);
    put_rounded(dy, row0);
  }
  for (; dy < hi; ++dy) {
    const auto k = static_cast<std::size_t>(dy);
    const int sy = ay.offset[k];
    // Keep the two buffered rows aligned with (sy, sy + 1), reusing work when sliding.
    if (row0_src != sy && row1_src == sy) {
      std::swap(row0, row1);
      std::swap(row0_src, row1_src);
    }
    hrow(sy, row0, row0_src);
    hrow(sy + 1, row1, row1_src);
    const std::uint32_t cy0 = ay.c0[k];
    const std::uint32_t cy1 = ay.c1[k];
    for (int x = 0; x < dst_w; ++x) {
      const auto xi = static_cast<std::size_t>(x);
      const std::uint32_t v = row0[xi] * cy0 + row1[xi] * cy1;
      dst(x, dy) = static_cast<std::uint8_t>(std::min<std::uint32_t>((v + 32768u) >> 16, 255u));
    }
  }
  for (; dy < dst_h; ++dy) {
    hrow(sh - 1, row0, row0_src);
    put_rounded(dy, row0);
  }
  return dst;
}

}  // namespace vjspoof
