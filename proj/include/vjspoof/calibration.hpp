#pragma once

// Estimators that fit ChannelParams from captured frames.

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <set>
#include <vector>

#include "vjspoof/channel.hpp"
#include "vjspoof/error.hpp"
#include "vjspoof/image.hpp"

namespace vjspoof {

namespace detail {

inline void require_same_frames(const std::vector<GrayImage>& frames) {
  for (const auto& f : frames) require_same_shape(frames.front(), f, "calibration frames");
}

inline RealImage mean_frame(const std::vector<GrayImage>& frames) {
  RealImage a(frames.front().width(), frames.front().height());
  for (const auto& f : frames)
    for (std::size_t i = 0; i < f.size(); ++i) a.values[i] += f[i];
  for (double& v : a.values) v /= static_cast<double>(frames.size());
  return a;
}

/// Integer factor k with big = k * small in both axes, or 0.
inline int integer_factor(int small_w, int small_h, int big_w, int big_h) {
  if (big_w % small_w != 0 || big_h % small_h != 0) return 0;
  const int k = big_w / small_w;
  return big_h / small_h == k ? k : 0;
}

}  // namespace detail

/// Offsets of the pixelwise mean frame from its own mean. Frames are captures
/// of the uniform test image, at the test image's size or an integer multiple.
inline OffsetMap estimate_brightening(const std::vector<GrayImage>& frames, const GrayImage& test) {
  if (frames.empty()) throw Error(Errc::empty_input, "no calibration frames");
  detail::require_same_frames(frames);
  const GrayImage& f = frames.front();
  if (detail::integer_factor(test.width(), test.height(), f.width(), f.height()) == 0) {
    throw Error(Errc::dimension_mismatch, "frames are not an integer multiple of the test image");
  }
  RealImage a = detail::mean_frame(frames);
  return OffsetMap(a.width, a.height, std::move(a.values));
}

/// Root mean square of the residuals against the pixelwise mean frame,
/// pooled over all frames and pixels.
inline double fit_noise_sigma(const std::vector<GrayImage>& frames) {
  if (frames.size() < 2) throw Error(Errc::too_few_frames, "need at least 2 frames, got " + std::to_string(frames.size()));
  detail::require_same_frames(frames);
  const RealImage a = detail::mean_frame(frames);
  double ss = 0.0;
  for (const auto& f : frames) {
    for (std::size_t i = 0; i < f.size(); ++i) {
      const double r = f[i] - a.values[i];
      ss += r * r;
    }
  }
  const double n = static_cast<double>(frames.size()) * static_cast<double>(a.values.size());
  return std::sqrt(ss / n);
}

/// Least-squares continuous two-piece fit; knot searched over integers 1..254.
/// A knot qualifies only with two distinct inputs on each side (inputs <= knot
/// count as the low side). Negative slopes are refit pinned at zero.
inline ResponseCurve fit_response_curve(const std::vector<double>& inputs,
                                        const std::vector<double>& observed) {
  if (inputs.size() != observed.size()) {
    throw Error(Errc::degenerate_data, "inputs and observations differ in length");
  }
  if (inputs.size() < 4) throw Error(Errc::degenerate_data, "need at least 4 points");
  const auto n = static_cast<Eigen::Index>(inputs.size());
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) y(i) = observed[static_cast<std::size_t>(i)];

  double best_err = std::numeric_limits<double>::infinity();
  ResponseCurve best;
  bool found = false;
  for (int knot = 1; knot <= 254; ++knot) {
    std::set<double> low, high;
    for (double x : inputs) (x <= knot ? low : high).insert(x);
    if (low.size() < 2 || high.size() < 2) continue;

    Eigen::MatrixXd a(n, 3);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double d = inputs[static_cast<std::size_t>(i)] - knot;
      a(i, 0) = 1.0;
      a(i, 1) = std::min(d, 0.0);
      a(i, 2) = std::max(d, 0.0);
    }
    auto solve = [&](bool use_low, bool use_high) {
      std::vector<Eigen::Index> cols = {0};
      if (use_low) cols.push_back(1);
      if (use_high) cols.push_back(2);
      Eigen::MatrixXd sub(n, static_cast<Eigen::Index>(cols.size()));
      for (std::size_t c = 0; c < cols.size(); ++c) sub.col(static_cast<Eigen::Index>(c)) = a.col(cols[c]);
      const Eigen::VectorXd beta = sub.colPivHouseholderQr().solve(y);
      Eigen::Vector3d full = Eigen::Vector3d::Zero();
      for (std::size_t c = 0; c < cols.size(); ++c) full(cols[c]) = beta(static_cast<Eigen::Index>(c));
      return full;
    };
    bool use_low = true, use_high = true;
    Eigen::Vector3d beta = solve(true, true);
    while ((use_low && beta(1) < 0.0) || (use_high && beta(2) < 0.0)) {
      use_low = use_low && beta(1) >= 0.0;
      use_high = use_high && beta(2) >= 0.0;
      beta = solve(use_low, use_high);
    }
    const double err = (a * beta - y).squaredNorm();
    if (err < best_err) {
      best_err = err;
      best = {static_cast<double>(knot), beta(0), beta(1), beta(2)};
      found = true;
    }
  }
  if (!found) throw Error(Errc::degenerate_data, "no knot has two distinct inputs on each side");
  return best;
}

/// Vertical bars of widths 1, 2, 3, 4 (dark bar then equal light gap), repeated.
inline GrayImage bar_chart(int width, int height, std::uint8_t dark = 0, std::uint8_t light = 255) {
  GrayImage img(width, height, light);
  int x = 0;
  for (int bw = 1; x < width; bw = bw % 4 + 1) {
    for (int i = 0; i < bw && x < width; ++i, ++x)
      for (int y = 0; y < height; ++y) img(x, y) = dark;
    x += bw;
  }
  return img;
}

inline constexpr double blur_sigma_step = 0.05;
inline constexpr int blur_sigma_steps = 60;  // grid 0.0 .. 3.0

/// Grid search for the blur that best maps the replicated test chart onto the
/// capture (mean squared error). The replication factor comes from the sizes.
inline double fit_blur_sigma(const GrayImage& test, const GrayImage& captured) {
  const int k = detail::integer_factor(test.width(), test.height(), captured.width(), captured.height());
  if (k == 0) throw Error(Errc::dimension_mismatch, "capture is not an integer multiple of the test chart");
  const RealImage base = RealImage::from(upscale_replicate(test, k));
  double best_sigma = 0.0;
  double best_err = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= blur_sigma_steps; ++i) {
    const double sigma = i * blur_sigma_step;
    const RealImage b = gaussian_blur(base, sigma);
    double err = 0.0;
    for (std::size_t j = 0; j < b.values.size(); ++j) {
      const double d = b.values[j] - captured[j];
      err += d * d;
    }
    if (err < best_err) {
      best_err = err;
      best_sigma = sigma;
    }
  }
  return best_sigma;
}

}  // namespace vjspoof
