#pragma once

// Multiscale Viola-Jones detection (scale-image strategy) and box grouping.
//
// The detector reproduces the reference pipeline's numerics: single-precision
// feature values, a per-level image pyramid resampled with
// resize_bilinear_exact, a 2-pixel window step below scale 2, the variance
// gate on the inner (w-2)x(h-2) window, and the classic grouping pass with
// nested-box suppression.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

#include "vjspoof/cascade.hpp"
#include "vjspoof/error.hpp"
#include "vjspoof/image.hpp"
#include "vjspoof/integral.hpp"
#include "vjspoof/resize.hpp"

namespace vjspoof {

struct DetectParams {
  double scale_factor = 1.1;
  int min_neighbors = 3;
  int min_width = 0;   // 0: base window
  int min_height = 0;
  int max_width = 0;   // 0: unbounded
  int max_height = 0;

  void validate() const {
    if (!(scale_factor > 1.0)) throw Error(Errc::invalid_config, "scale_factor must be > 1");
    if (min_neighbors < 0) throw Error(Errc::invalid_config, "min_neighbors must be >= 0");
    if (min_width < 0 || min_height < 0 || max_width < 0 || max_height < 0) {
      throw Error(Errc::invalid_config, "size limits must be >= 0");
    }
  }
};

struct Detection {
  int x = 0;
  int y = 0;
  int width = 0;
  int height = 0;
  int neighbors = 1;

  Rect box() const noexcept { return {x, y, width, height}; }
  friend bool operator==(const Detection&, const Detection&) = default;
};

inline constexpr const char* detection_csv_header = "x,y,w,h,neighbors";

inline std::ostream& operator<<(std::ostream& os, const Detection& d) {
  return os << d.x << ',' << d.y << ',' << d.width << ',' << d.height << ',' << d.neighbors;
}

/// Intersection over union of two boxes.
inline double iou(const Rect& a, const Rect& b) {
  const int ix = std::max(0, std::min(a.x + a.width, b.x + b.width) - std::max(a.x, b.x));
  const int iy = std::max(0, std::min(a.y + a.height, b.y + b.height) - std::max(a.y, b.y));
  const double inter = static_cast<double>(ix) * iy;
  const double uni = static_cast<double>(a.area()) + static_cast<double>(b.area()) - inter;
  return uni > 0 ? inter / uni : 0.0;
}

namespace detail {

// Round half to even, as the reference uses for all its int conversions.
inline int round_even(double v) noexcept { return static_cast<int>(std::lrint(v)); }
inline int round_even(float v) noexcept { return static_cast<int>(std::lrintf(v)); }

inline bool similar_boxes(const Rect& a, const Rect& b, double eps) noexcept {
  const double delta = eps * (std::min(a.width, b.width) + std::min(a.height, b.height)) * 0.5;
  return std::abs(a.x - b.x) <= delta && std::abs(a.y - b.y) <= delta &&
         std::abs(a.x + a.width - b.x - b.width) <= delta &&
         std::abs(a.y + a.height - b.y - b.height) <= delta;
}

}  // namespace detail

inline constexpr double grouping_eps = 0.2;

/// Groups raw hits into equivalence classes of similar boxes (transitive
/// closure), averages each class, keeps classes with more than min_neighbors
/// members and drops boxes nested in a better-supported one. min_neighbors
/// of 0 returns the raw boxes, each with neighbors = 1. Sorted by (y, x, width).
inline std::vector<Detection> group_detections(const std::vector<Rect>& raw, int min_neighbors,
                                               double eps = grouping_eps) {
  std::vector<Detection> out;
  if (min_neighbors <= 0) {
    for (const auto& r : raw) out.push_back({r.x, r.y, r.width, r.height, 1});
  } else if (!raw.empty()) {
    const std::size_t n = raw.size();
    std::vector<std::size_t> parent(n);
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    auto find = [&](std::size_t i) {
      while (parent[i] != i) i = parent[i] = parent[parent[i]];
      return i;
    };
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        if (detail::similar_boxes(raw[i], raw[j], eps)) parent[find(i)] = find(j);
      }
    }
    std::vector<int> label(n, -1);
    std::vector<std::size_t> root_label(n, n);
    int classes = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t r = find(i);
      if (root_label[r] == n) root_label[r] = static_cast<std::size_t>(classes++);
      label[i] = static_cast<int>(root_label[r]);
    }
    std::vector<long long> sx(static_cast<std::size_t>(classes), 0), sy(sx), sw(sx), sh(sx);
    std::vector<int> count(static_cast<std::size_t>(classes), 0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto c = static_cast<std::size_t>(label[i]);
      sx[c] += raw[i].x;
      sy[c] += raw[i].y;
      sw[c] += raw[i].width;
      sh[c] += raw[i].height;
      ++count[c];
    }
    std::vector<Rect> avg(static_cast<std::size_t>(classes));
    for (std::size_t c = 0; c < avg.size(); ++c) {
      const float s = 1.f / static_cast<float>(count[c]);
      avg[c] = {detail::round_even(static_cast<float>(sx[c]) * s),
                detail::round_even(static_cast<float>(sy[c]) * s),
                detail::round_even(static_cast<float>(sw[c]) * s),
                detail::round_even(static_cast<float>(sh[c]) * s)};
    }
    for (std::size_t i = 0; i < avg.size(); ++i) {
      const int n1 = count[i];
      if (n1 <= min_neighbors) continue;
      const Rect& r1 = avg[i];
      bool nested = false;
      for (std::size_t j = 0; j < avg.size() && !nested; ++j) {
        const int n2 = count[j];
        if (j == i || n2 <= min_neighbors) continue;
        const Rect& r2 = avg[j];
        const int dx = detail::round_even(r2.width * eps);
        const int dy = detail::round_even(r2.height * eps);
        nested = r1.x >= r2.x - dx && r1.y >= r2.y - dy &&
                 r1.x + r1.width <= r2.x + r2.width + dx &&
                 r1.y + r1.height <= r2.y + r2.height + dy && (n2 > std::max(3, n1) || n1 < 3);
      }
      if (!nested) out.push_back({r1.x, r1.y, r1.width, r1.height, n1});
    }
  }
  std::sort(out.begin(), out.end(), [](const Detection& a, const Detection& b) {
    if (a.y != b.y) return a.y < b.y;
    if (a.x != b.x) return a.x < b.x;
    return a.width < b.width;
  });
  return out;
}

/// Cascade flattened for evaluation: single-precision stumps in stage order.
class CompiledCascade {
 public:
  struct FeatureRect {
    Rect rect;
    float weight = 0.f;
  };
  struct Stump {
    FeatureRect rects[3];
    int nrects = 0;
    float threshold = 0.f;
    float left = 0.f;
    float right = 0.f;
  };
  struct Stage {
    int first = 0;
    int count = 0;
    float threshold = 0.f;
  };

  CompiledCascade() = default;

  explicit CompiledCascade(const CascadeModel& m) : base_w_(m.base_width), base_h_(m.base_height) {
    for (const auto& st : m.stages) {
      Stage s;
      s.first = static_cast<int>(stumps_.size());
      s.count = static_cast<int>(st.classifiers.size());
      s.threshold = static_cast<float>(st.stage_threshold) - stage_eps;
      for (const auto& wc : st.classifiers) {
        Stump t;
        t.nrects = static_cast<int>(wc.feature.rects.size());
        for (int k = 0; k < t.nrects; ++k) {
          const auto& wr = wc.feature.rects[static_cast<std::size_t>(k)];
          t.rects[k] = {wr.rect, static_cast<float>(wr.weight)};
        }
        t.threshold = static_cast<float>(wc.threshold);
        t.left = static_cast<float>(wc.left_value);
        t.right = static_cast<float>(wc.right_value);
        stumps_.push_back(t);
      }
      stages_.push_back(s);
    }
  }

  int base_width() const noexcept { return base_w_; }
  int base_height() const noexcept { return base_h_; }
  const std::vector<Stage>& stages() const noexcept { return stages_; }
  const std::vector<Stump>& stumps() const noexcept { return stumps_; }

  static constexpr float stage_eps = 1e-5f;

 private:
  int base_w_ = 0;
  int base_h_ = 0;
  std::vector<Stage> stages_;
  std::vector<Stump> stumps_;
};

namespace detail {

/// Scratch tables for one pyramid level. 32-bit sums are exact for images up
/// to 8.4M pixels; squared sums wrap mod 2^32, which window differences undo
/// because every 22x22 window total fits in 32 bits.
struct LevelTables {
  int width = 0;
  int height = 0;
  std::vector<std::int32_t> sum;
  std::vector<std::uint32_t> sq;

  int stride() const noexcept { return width + 1; }

  void build(const GrayImage& img) {
    width = img.width();
    height = img.height();
    const std::size_t st = static_cast<std::size_t>(width) + 1;
    const std::size_t n = st * (static_cast<std::size_t>(height) + 1);
    sum.resize(n);
    sq.resize(n);
    std::fill_n(sum.begin(), st, 0);
    std::fill_n(sq.begin(), st, 0u);
    const std::uint8_t* px = img.data();
    for (int y = 0; y < height; ++y) {
      std::int32_t rs = 0;
      std::uint32_t rq = 0;
      const std::size_t above = static_cast<std::size_t>(y) * st;
      const std::size_t cur = above + st;
      sum[cur] = 0;
      sq[cur] = 0;
      for (int x = 0; x < width; ++x) {
        const std::uint32_t v = px[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)];
        rs += static_cast<std::int32_t>(v);
        rq += v * v;
        sum[cur + static_cast<std::size_t>(x) + 1] = sum[above + static_cast<std::size_t>(x) + 1] + rs;
        sq[cur + static_cast<std::size_t>(x) + 1] = sq[above + static_cast<std::size_t>(x) + 1] + rq;
      }
    }
  }
};

/// Stumps with rectangle corners resolved to table offsets for one stride.
class LevelEvaluator {
 public:
  LevelEvaluator(const CompiledCascade& cc, const LevelTables& t) : cc_(cc), t_(t) {
    const int stride = t.stride();
    auto ofs = [stride](int x, int y) { return y * stride + x; };
    stumps_.reserve(cc.stumps().size());
    for (const auto& s : cc.stumps()) {
      LevelStump o{};
      for (int k = 0; k < s.nrects; ++k) {
        const Rect& r = s.rects[k].rect;
        o.p[k][0] = ofs(r.x, r.y);
        o.p[k][1] = ofs(r.x + r.width, r.y);
        o.p[k][2] = ofs(r.x, r.y + r.height);
        o.p[k][3] = ofs(r.x + r.width, r.y + r.height);
        o.w[k] = s.rects[k].weight;
      }
      o.threshold = s.threshold;
      o.left = s.left;
      o.right = s.right;
      stumps_.push_back(o);
    }
    const Rect nr = norm_rect();
    norm_[0] = ofs(nr.x, nr.y);
    norm_[1] = ofs(nr.x + nr.width, nr.y);
    norm_[2] = ofs(nr.x, nr.y + nr.height);
    norm_[3] = ofs(nr.x + nr.width, nr.y + nr.height);
  }

  /// Reference window verdict: -1 rejected by the variance gate, -k failed
  /// at stage k (0 for the first stage), 1 passed every stage.
  int run_at(int x, int y) const noexcept {
    const std::size_t o = static_cast<std::size_t>(y) * static_cast<std::size_t>(t_.stride()) +
                          static_cast<std::size_t>(x);
    const std::int32_t* base = t_.sum.data() + o;
    const std::uint32_t* qbase = t_.sq.data() + o;
    const double area = static_cast<double>(norm_rect().area());
    const std::int32_t vs = base[norm_[0]] - base[norm_[1]] - base[norm_[2]] + base[norm_[3]];
    const std::uint32_t vq = qbase[norm_[0]] - qbase[norm_[1]] - qbase[norm_[2]] + qbase[norm_[3]];
    const double nf = area * vq - static_cast<double>(vs) * vs;
    if (!(nf > 0.0)) return -1;
    const float factor = static_cast<float>(1.0 / std::sqrt(nf));
    if (!(area * factor < 0.1)) return -1;

    const auto& stages = cc_.stages();
    const LevelStump* st = stumps_.data();
    for (std::size_t si = 0; si < stages.size(); ++si) {
      const auto& stage = stages[si];
      double acc = 0.0;
      for (const LevelStump* e = st + stage.count; st < e; ++st) {
        // A zero third weight adds +0.0f, which leaves the sum unchanged.
        float v = st->w[0] * static_cast<float>(rect(base, st->p[0])) +
                  st->w[1] * static_cast<float>(rect(base, st->p[1]));
        v += st->w[2] * static_cast<float>(rect(base, st->p[2]));
        v *= factor;
        acc += v < st->threshold ? st->left : st->right;
      }
      if (acc < stage.threshold) return -static_cast<int>(si);
    }
    return 1;
  }

 private:
  struct LevelStump {
    int p[3][4];
    float w[3];
    float threshold;
    float left;
    float right;
  };

  static std::int32_t rect(const std::int32_t* b, const int (&o)[4]) noexcept {
    return b[o[0]] - b[o[1]] - b[o[2]] + b[o[3]];
  }
  Rect norm_rect() const noexcept { return {1, 1, cc_.base_width() - 2, cc_.base_height() - 2}; }

  const CompiledCascade& cc_;
  const LevelTables& t_;
  std::vector<LevelStump> stumps_;
  int norm_[4] = {0, 0, 0, 0};
};

}  // namespace detail

/// Evaluates the cascade on the window at (x, y) of size round(base * scale).
/// Feature rectangles are scaled with rounding and sums rescaled to base-window
/// area; a zero-variance window uses normalization factor 1. At scale 1 this is
/// exactly the detector's per-window computation minus its variance gate.
inline bool evaluate_window(const CascadeModel& model, const IntegralImage& ii,
                            const IntegralImage& sq_ii, int x, int y, double scale = 1.0) {
  auto sc = [scale](int v) { return static_cast<int>(std::lround(v * scale)); };
  const Rect nr{sc(1), sc(1), sc(model.base_width - 2), sc(model.base_height - 2)};
  const double base_norm_area = static_cast<double>(model.base_width - 2) * (model.base_height - 2);
  const double area = static_cast<double>(nr.area());
  // Rescale sums so feature values stay in base-window units.
  const double unit = base_norm_area / area;
  const double s = static_cast<double>(ii.rect_sum(x + nr.x, y + nr.y, nr.width, nr.height)) * unit;
  const double q = static_cast<double>(sq_ii.rect_sum(x + nr.x, y + nr.y, nr.width, nr.height)) * unit;
  const double nf = base_norm_area * q - s * s;
  const float factor = nf > 0.0 ? static_cast<float>(1.0 / std::sqrt(nf)) : 1.f;
  const bool unit_scale = scale == 1.0;
  for (const auto& st : model.stages) {
    double acc = 0.0;
    for (const auto& wc : st.classifiers) {
      float v = 0.f;
      for (const auto& wr : wc.feature.rects) {
        const Rect r{sc(wr.rect.x), sc(wr.rect.y), sc(wr.rect.width), sc(wr.rect.height)};
        const auto raw = ii.rect_sum(x + r.x, y + r.y, r.width, r.height);
        const float rs = unit_scale ? static_cast<float>(static_cast<int>(raw))
                                    : static_cast<float>(static_cast<double>(raw) * unit);
        v += static_cast<float>(wr.weight) * rs;
      }
      v *= factor;
      acc += v < static_cast<float>(wc.threshold) ? static_cast<float>(wc.left_value)
                                                  : static_cast<float>(wc.right_value);
    }
    if (acc < static_cast<float>(st.stage_threshold) - CompiledCascade::stage_eps) return false;
  }
  return true;
}

/// Reusable detector bound to one model.
class Detector {
 public:
  explicit Detector(const CascadeModel& model) : cc_(model) {}

  int base_width() const noexcept { return cc_.base_width(); }
  int base_height() const noexcept { return cc_.base_height(); }

  /// Pyramid scales visited for an image of the given size.
  std::vector<float> scales(int img_w, int img_h, const DetectParams& p) const {
    const int bw = cc_.base_width();
    const int bh = cc_.base_height();
    std::vector<float> all;
    for (double f = 1.0;; f *= p.scale_factor) {
      if (detail::round_even(bw * f) > img_w || detail::round_even(bh * f) > img_h) break;
      all.push_back(static_cast<float>(f));
    }
    const int min_w = p.min_width > 0 ? p.min_width : bw;
    const int min_h = p.min_height > 0 ? p.min_height : bh;
    std::vector<float> kept;
    for (float s : all) {
      const int ww = detail::round_even(static_cast<float>(bw) * s);
      const int wh = detail::round_even(static_cast<float>(bh) * s);
      if (p.max_width > 0 && ww > p.max_width) break;
      if (p.max_height > 0 && wh > p.max_height) break;
      if (ww < min_w || wh < min_h) continue;
      kept.push_back(s);
    }
    return kept;
  }

  /// Ungrouped hits in source coordinates, in scan order.
  std::vector<Rect> raw_hits(const GrayImage& img, const DetectParams& p) const {
    p.validate();
    const int bw = cc_.base_width();
    const int bh = cc_.base_height();
    if (img.width() < bw || img.height() < bh) {
      throw Error(Errc::image_too_small, std::to_string(img.width()) + "x" +
                                             std::to_string(img.height()) + " is smaller than the " +
                                             std::to_string(bw) + "x" + std::to_string(bh) +
                                             " detection window");
    }
    std::vector<Rect> hits;
    detail::LevelTables tables;
    for (float sc : scales(img.width(), img.height(), p)) {
      const int lw = detail::round_even(static_cast<float>(img.width()) / sc);
      const int lh = detail::round_even(static_cast<float>(img.height()) / sc);
      if (lw < bw || lh < bh) continue;
      tables.build(resize_bilinear_exact(img, lw, lh));
      const detail::LevelEvaluator ev(cc_, tables);
      const int step = sc >= 2.f ? 1 : 2;
      const int ww = detail::round_even(static_cast<float>(bw) * sc);
      const int wh = detail::round_even(static_cast<float>(bh) * sc);
      const int xs = lw + 1 - bw;
      const int ys = lh + 1 - bh;
      for (int y = 0; y < ys; y += step) {
        for (int x = 0; x < xs; x += step) {
          const int r = ev.run_at(x, y);
          if (r > 0) {
            hits.push_back({detail::round_even(static_cast<float>(x) * sc),
                            detail::round_even(static_cast<float>(y) * sc), ww, wh});
          } else if (r == 0) {
            x += step;  // a first-stage reject also skips the next position
          }
        }
      }
    }
    return hits;
  }

  std::vector<Detection> detect(const GrayImage& img, const DetectParams& p = {}) const {
    return group_detections(raw_hits(img, p), p.min_neighbors);
  }

 private:
  CompiledCascade cc_;
};

inline std::vector<Detection> detect_faces(const CascadeModel& model, const GrayImage& img,
                                           const DetectParams& params = {}) {
  return Detector(model).detect(img, params);
}

}  // namespace vjspoof
