#pragma once

// Spoofing attacks: starter blends and random subsets, the random-shift
// searches gated by an exact or analog oracle, and the sensitivity-guided
// gradient attack.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "vjspoof/detector.hpp"
#include "vjspoof/error.hpp"
#include "vjspoof/image.hpp"
#include "vjspoof/oracle.hpp"
#include "vjspoof/rng.hpp"

namespace vjspoof {

// ---------------------------------------------------------------- config

struct AttackConfig {
  double shift_rate = 0.5;  // exact attack: halfway
  int required_detections = 1;
  int oracle_trials = 1;
  int stall_window = 2000;
  int max_iterations = 100000;
  std::uint64_t seed = 0;

  static AttackConfig exact_defaults() { return {}; }
  static AttackConfig analog_defaults() { return {0.7, 10, 10, 500, 30000, 0}; }

  void validate() const {
    if (!(shift_rate > 0.0 && shift_rate < 1.0)) throw Error(Errc::invalid_config, "shift_rate must lie in (0, 1)");
    if (required_detections < 1) throw Error(Errc::invalid_config, "required_detections must be >= 1");
    if (required_detections > oracle_trials) {
      throw Error(Errc::invalid_config, "required_detections (" + std::to_string(required_detections) +
                                            ") exceeds oracle_trials (" + std::to_string(oracle_trials) + ")");
    }
    if (stall_window < 1) throw Error(Errc::invalid_config, "stall_window must be >= 1");
    if (max_iterations < 0) throw Error(Errc::invalid_config, "max_iterations must be >= 0");
  }
};

struct GradientConfig {
  double epsilon = 0.1;
  int region_size = 8;
  double alpha_resolution = 1.0 / 256.0;
  int max_rounds = 50;
  int monotonicity_probes = 2;  // extra probes below the found alpha
  std::uint64_t seed = 0;

  void validate() const {
    if (!(epsilon > 0.0 && epsilon <= 1.0)) throw Error(Errc::invalid_config, "epsilon must lie in (0, 1]");
    if (region_size < 1) throw Error(Errc::invalid_config, "region_size must be >= 1");
    if (!(alpha_resolution > 0.0 && alpha_resolution < 1.0)) {
      throw Error(Errc::invalid_config, "alpha_resolution must lie in (0, 1)");
    }
    if (max_rounds < 1) throw Error(Errc::invalid_config, "max_rounds must be >= 1");
    if (monotonicity_probes < 0) throw Error(Errc::invalid_config, "monotonicity_probes must be >= 0");
  }
};

// ---------------------------------------------------------------- trace

/// One proposal. oracle_count is -1 when the proposal changed nothing and the
/// oracle was not consulted.
struct TraceRow {
  long long iteration = 0;
  int pixel_x = 0;
  int pixel_y = 0;
  int old_value = 0;
  int proposed_value = 0;
  int oracle_count = 0;
  bool accepted = false;

  friend bool operator==(const TraceRow&, const TraceRow&) = default;
};

inline constexpr const char* trace_csv_header =
    "iteration,pixel_x,pixel_y,old_value,proposed_value,oracle_count,accepted";

struct SearchTrace {
  std::vector<TraceRow> rows;

  std::size_t accepted_count() const {
    return static_cast<std::size_t>(std::count_if(rows.begin(), rows.end(), [](const TraceRow& r) { return r.accepted; }));
  }

  void write_csv(std::ostream& os) const {
    os << trace_csv_header << '\n';
    for (const auto& r : rows) {
      os << r.iteration << ',' << r.pixel_x << ',' << r.pixel_y << ',' << r.old_value << ','
         << r.proposed_value << ',' << r.oracle_count << ',' << (r.accepted ? 1 : 0) << '\n';
    }
  }

  void save_csv(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error(Errc::io_error, "cannot write " + path.string());
    write_csv(out);
    if (!out) throw Error(Errc::io_error, "write failed: " + path.string());
  }

  static SearchTrace read_csv(std::istream& in) {
    SearchTrace t;
    std::string line;
    if (!std::getline(in, line) || line != trace_csv_header) {
      throw Error(Errc::malformed_format, "trace CSV header missing");
    }
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::istringstream ss(line);
      std::string f[7];
      for (auto& field : f) std::getline(ss, field, ',');
      try {
        t.rows.push_back({std::stoll(f[0]), std::stoi(f[1]), std::stoi(f[2]), std::stoi(f[3]),
                          std::stoi(f[4]), std::stoi(f[5]), f[6] == "1"});
      } catch (const std::exception&) {
        throw Error(Errc::malformed_format, "bad trace row: " + line);
      }
    }
    return t;
  }
};

/// Rebuilds the image sequence by applying accepted rows to start. If visit
/// is given it sees the image after each accepted iteration's last row.
inline GrayImage replay_trace(const GrayImage& start, const SearchTrace& trace,
                              const std::function<void(long long, const GrayImage&)>& visit = {}) {
  GrayImage s = start;
  const auto& rows = trace.rows;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (!r.accepted) continue;
    if (s(r.pixel_x, r.pixel_y) != r.old_value) {
      throw Error(Errc::malformed_format, "trace does not match the start image at iteration " +
                                              std::to_string(r.iteration));
    }
    s(r.pixel_x, r.pixel_y) = static_cast<std::uint8_t>(r.proposed_value);
    const bool last_of_iteration = i + 1 == rows.size() || rows[i + 1].iteration != r.iteration;
    if (visit && last_of_iteration) visit(r.iteration, s);
  }
  return s;
}

// ---------------------------------------------------------------- results

enum class StopReason { stalled, max_iterations, converged, oracle_failure, max_rounds };

inline const char* stop_reason_name(StopReason r) {
  switch (r) {
    case StopReason::stalled: return "stalled";
    case StopReason::max_iterations: return "max-iterations";
    case StopReason::converged: return "converged";
    case StopReason::oracle_failure: return "oracle-failure";
    case StopReason::max_rounds: return "max-rounds";
  }
  return "unknown";
}

struct AttackResult {
  GrayImage spoof;
  SearchTrace trace;
  StopReason stop = StopReason::stalled;
  long long iterations = 0;
  long long oracle_calls = 0;
};

// ---------------------------------------------------------------- preparation

/// The single detection in img; errors if there is none or more than one.
inline ReferenceBox single_face(const Detector& det, const GrayImage& img, const DetectParams& params = {}) {
  const auto dets = det.detect(img, params);
  if (dets.empty()) throw Error(Errc::no_face_found, "no face detected");
  if (dets.size() > 1) throw Error(Errc::multiple_faces_found, std::to_string(dets.size()) + " faces detected");
  return {dets[0].x, dets[0].y, dets[0].width, dets[0].height};
}

/// Replaces everything outside the detected face box with the cover. The
/// returned reference box is the detection in the prepared image that
/// matches the original box.
inline std::pair<GrayImage, ReferenceBox> prepare_face(const GrayImage& raw, const GrayImage& cover,
                                                       const Detector& det, const DetectParams& params = {}) {
  require_same_shape(raw, cover, "prepare_face");
  const ReferenceBox box = single_face(det, raw, params);
  GrayImage f = cover;
  for (int y = std::max(0, box.y); y < std::min(raw.height(), box.y + box.height); ++y) {
    for (int x = std::max(0, box.x); x < std::min(raw.width(), box.x + box.width); ++x) f(x, y) = raw(x, y);
  }
  const auto dets = det.detect(f, params);
  const Detection* best = nullptr;
  for (const auto& d : dets) {
    if (!match_box(d, box)) continue;
    if (!best || iou(d.box(), {box.x, box.y, box.width, box.height}) >
                     iou(best->box(), {box.x, box.y, box.width, box.height})) {
      best = &d;
    }
  }
  if (!best) throw Error(Errc::post_replacement_detection_lost, "face no longer detected after cover replacement");
  return {std::move(f), ReferenceBox{best->x, best->y, best->width, best->height}};
}

inline std::pair<GrayImage, ReferenceBox> prepare_face(const GrayImage& raw, const GrayImage& cover,
                                                       const CascadeModel& model, const DetectParams& params = {}) {
  return prepare_face(raw, cover, Detector(model), params);
}

// ---------------------------------------------------------------- random-shift search

namespace detail {

inline std::uint64_t oracle_seed(std::uint64_t master, long long iteration) {
  return derive_seed(master, {stream_tag("oracle"), static_cast<std::uint64_t>(iteration)});
}

/// Shared loop: pick a uniform pixel, move it toward the cover with
/// `target`, keep the move when the oracle count reaches the gate. No-op
/// proposals count toward the stall window without an oracle call.
inline AttackResult random_shift_search(const GrayImage& face, const GrayImage& cover, const Oracle& oracle,
                                        const AttackConfig& cfg,
                                        const std::function<std::uint8_t(std::uint8_t, std::uint8_t)>& target) {
  require_same_shape(face, cover, "attack");
  AttackResult res;
  res.spoof = face;
  const int initial = oracle.count(face, oracle_seed(cfg.seed, 0));
  res.oracle_calls = 1;
  if (initial < cfg.required_detections) {
    throw Error(Errc::initial_oracle_failure, "start image passes " + std::to_string(initial) + " of " +
                                                  std::to_string(oracle.trials()) + " trials, gate needs " +
                                                  std::to_string(cfg.required_detections));
  }
  Rng pick = make_rng(derive_seed(cfg.seed, {stream_tag("pixel")}));
  GrayImage& s = res.spoof;
  const std::uint64_t n = s.size();
  int since_change = 0;
  res.stop = StopReason::max_iterations;
  for (long long it = 1; it <= cfg.max_iterations; ++it) {
    const auto idx = static_cast<std::size_t>(uniform_below(pick, n));
    const std::uint8_t old = s[idx];
    const std::uint8_t proposed = target(old, cover[idx]);
    TraceRow row{it, static_cast<int>(idx % static_cast<std::size_t>(s.width())),
                 static_cast<int>(idx / static_cast<std::size_t>(s.width())), old, proposed, -1, false};
    if (proposed != old) {
      s[idx] = proposed;
      row.oracle_count = oracle.count(s, oracle_seed(cfg.seed, it));
      ++res.oracle_calls;
      row.accepted = row.oracle_count >= cfg.required_detections;
      if (!row.accepted) s[idx] = old;
    }
    res.trace.rows.push_back(row);
    res.iterations = it;
    since_change = row.accepted ? 0 : since_change + 1;
    if (since_change >= cfg.stall_window) {
      res.stop = StopReason::stalled;
      break;
    }
  }
  return res;
}

}  // namespace detail

/// Random pixel moves halfway to the cover, kept while the exact oracle passes.
inline AttackResult exact_attack(const GrayImage& face, const GrayImage& cover, const Oracle& oracle,
                                 AttackConfig cfg) {
  cfg.validate();
  return detail::random_shift_search(face, cover, oracle, cfg, [](std::uint8_t s, std::uint8_t c) {
    return round_clamp((static_cast<double>(s) + c) / 2.0);
  });
}

/// Random pixel moves by shift_rate toward the cover, kept while at least
/// required_detections of the oracle's trials pass.
inline AttackResult analog_attack(const GrayImage& face, const GrayImage& cover, const Oracle& oracle,
                                  AttackConfig cfg) {
  cfg.validate();
  if (cfg.oracle_trials != oracle.trials()) {
    throw Error(Errc::invalid_config, "oracle_trials does not match the oracle");
  }
  const double rate = cfg.shift_rate;
  return detail::random_shift_search(face, cover, oracle, cfg, [rate](std::uint8_t s, std::uint8_t c) {
    return round_clamp(s * (1.0 - rate) + c * rate);
  });
}

// ---------------------------------------------------------------- boundary search

struct BoundaryResult {
  double alpha = 0.0;
  int probes = 0;             // oracle calls after the start check
  bool non_monotone = false;  // a check below alpha failed
};

/// Largest alpha in [0, 1] (to within resolution) for which passes(alpha)
/// holds, by bisection. Assumes failure is monotone in alpha; the optional
/// extra probes at evenly spaced points below the result flag violations.
inline BoundaryResult boundary_search(const std::function<bool(double)>& passes, double resolution,
                                      int monotonicity_probes = 0) {
  BoundaryResult r;
  ++r.probes;
  if (passes(1.0)) {
    r.alpha = 1.0;
    return r;
  }
  double lo = 0.0, hi = 1.0;
  while (hi - lo > resolution) {
    const double mid = 0.5 * (lo + hi);
    ++r.probes;
    (passes(mid) ? lo : hi) = mid;
  }
  r.alpha = lo;
  for (int k = 1; k <= monotonicity_probes && lo > 0.0; ++k) {
    ++r.probes;
    if (!passes(lo * k / (monotonicity_probes + 1))) r.non_monotone = true;
  }
  return r;
}

/// Largest blend of s toward the cover that still passes the oracle.
inline BoundaryResult boundary_alpha(const GrayImage& s, const GrayImage& cover, const Oracle& oracle,
                                     double resolution = 1.0 / 256.0, int monotonicity_probes = 0,
                                     std::uint64_t seed = 0) {
  require_same_shape(s, cover, "boundary_alpha");
  const int need = oracle.trials();
  if (oracle.count(s, seed) < need) throw Error(Errc::initial_oracle_failure, "start image is not detected");
  long long k = 0;
  return boundary_search(
      [&](double a) { return oracle.count(blend(s, cover, a), derive_seed(seed, {static_cast<std::uint64_t>(++k)})) >= need; },
      resolution, monotonicity_probes);
}

// ---------------------------------------------------------------- sensitivity map

struct SensitivityMap {
  int width = 0;
  int height = 0;
  std::vector<double> values;  // in [0, 1], max 1 unless all zero

  double operator()(int x, int y) const {
    return values[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)];
  }
};

/// Region origins along one axis: stride ceil(region / 2), last region flush
/// with the far edge.
inline std::vector<int> region_starts(int extent, int region) {
  const int size = std::min(region, extent);
  const int stride = (size + 1) / 2;
  std::vector<int> starts;
  for (int p = 0; p + size < extent; p += stride) starts.push_back(p);
  starts.push_back(extent - size);
  return starts;
}

/// Per-region tolerance to a group blend toward the cover, averaged over the
/// regions covering each pixel and normalized to max 1.
inline SensitivityMap sensitivity_map(const GrayImage& s, const GrayImage& cover, const Oracle& oracle,
                                      const GradientConfig& gcfg, std::uint64_t seed = 0) {
  gcfg.validate();
  require_same_shape(s, cover, "sensitivity_map");
  const int need = oracle.trials();
  if (oracle.count(s, seed) < need) throw Error(Errc::initial_oracle_failure, "start image is not detected");
  const int w = s.width();
  const int h = s.height();
  const int rw = std::min(gcfg.region_size, w);
  const int rh = std::min(gcfg.region_size, h);
  std::vector<double> total(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), 0.0);
  std::vector<int> covered(total.size(), 0);
  GrayImage t = s;
  std::uint64_t probe = 0;
  for (int y0 : region_starts(h, gcfg.region_size)) {
    for (int x0 : region_starts(w, gcfg.region_size)) {
      auto passes = [&](double a) {
        for (int y = y0; y < y0 + rh; ++y)
          for (int x = x0; x < x0 + rw; ++x) t(x, y) = round_clamp(a * cover(x, y) + (1.0 - a) * s(x, y));
        const bool ok = oracle.count(t, derive_seed(seed, {++probe})) >= need;
        for (int y = y0; y < y0 + rh; ++y)
          for (int x = x0; x < x0 + rw; ++x) t(x, y) = s(x, y);
        return ok;
      };
      const double tol = boundary_search(passes, gcfg.alpha_resolution).alpha;
      for (int y = y0; y < y0 + rh; ++y) {
        for (int x = x0; x < x0 + rw; ++x) {
          const auto i = static_cast<std::size_t>(y) * static_cast<std::size_t>(w) + static_cast<std::size_t>(x);
          total[i] += tol;
          ++covered[i];
        }
      }
    }
  }
  SensitivityMap m{w, h, std::vector<double>(total.size(), 0.0)};
  double top = 0.0;
  for (std::size_t i = 0; i < total.size(); ++i) {
    m.values[i] = total[i] / covered[i];
    top = std::max(top, m.values[i]);
  }
  if (top > 0.0)
    for (double& v : m.values) v /= top;
  return m;
}

// ---------------------------------------------------------------- gradient attack

struct GradientRound {
  int round = 0;
  double alpha = 0.0;
  bool non_monotone = false;
  long long changed_pixels = 0;
  bool accepted = false;
};

struct GradientResult : AttackResult {
  std::vector<GradientRound> rounds;
};

/// Each round: find the boundary blend alpha, map sensitivities just inside
/// it, then move every pixel toward the cover by epsilon * M(p). Stops when
/// a round changes nothing, or reverts and stops when the update would lose
/// detection. Trace rows hold one row per changed pixel, iteration = round.
inline GradientResult gradient_attack(const GrayImage& face, const GrayImage& cover, const Oracle& oracle,
                                      const GradientConfig& gcfg) {
  gcfg.validate();
  require_same_shape(face, cover, "gradient_attack");
  const int need = oracle.trials();
  GradientResult res;
  res.spoof = face;
  auto check = [&](const GrayImage& img, std::uint64_t seed) {
    ++res.oracle_calls;
    return oracle.count(img, seed) >= need;
  };
  if (!check(face, derive_seed(gcfg.seed, {stream_tag("start")}))) {
    throw Error(Errc::initial_oracle_failure, "start image is not detected");
  }
  GrayImage& s = res.spoof;
  res.stop = StopReason::max_rounds;
  for (int round = 1; round <= gcfg.max_rounds; ++round) {
    const std::uint64_t rs = derive_seed(gcfg.seed, {static_cast<std::uint64_t>(round)});
    const BoundaryResult b = boundary_alpha(s, cover, oracle, gcfg.alpha_resolution, gcfg.monotonicity_probes,
                                            derive_seed(rs, {stream_tag("alpha")}));
    res.oracle_calls += b.probes + 1;
    GrayImage edge = blend(s, cover, std::max(b.alpha - gcfg.alpha_resolution, 0.0));
    if (!check(edge, derive_seed(rs, {stream_tag("edge")}))) edge = blend(s, cover, b.alpha);
    const SensitivityMap m = sensitivity_map(edge, cover, oracle, gcfg, derive_seed(rs, {stream_tag("map")}));

    GrayImage t = s;
    long long changed = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      const double e = gcfg.epsilon * m.values[i];
      t[i] = round_clamp((1.0 - e) * s[i] + e * cover[i]);
      changed += t[i] != s[i];
    }
    GradientRound gr{round, b.alpha, b.non_monotone, changed, false};
    res.iterations = round;
    if (changed == 0) {
      res.rounds.push_back(gr);
      res.stop = StopReason::converged;
      break;
    }
    const bool ok = check(t, derive_seed(rs, {stream_tag("update")}));
    gr.accepted = ok;
    res.rounds.push_back(gr);
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (t[i] == s[i]) continue;
      res.trace.rows.push_back({round, static_cast<int>(i % static_cast<std::size_t>(s.width())),
                                static_cast<int>(i / static_cast<std::size_t>(s.width())), s[i], t[i],
                                ok ? need : 0, ok});
    }
    if (!ok) {
      res.stop = StopReason::oracle_failure;
      break;
    }
    s = std::move(t);
  }
  return res;
}

// ---------------------------------------------------------------- starters

struct BlendRow {
  double r = 0.0;
  bool detected = false;
};

struct BlendSweep {
  std::vector<BlendRow> rows;
  std::optional<double> largest_passing;
};

inline BlendSweep starter_blend_attack(const GrayImage& face, const GrayImage& cover, const Oracle& oracle,
                                       const std::vector<double>& r_grid) {
  require_same_shape(face, cover, "starter_blend_attack");
  BlendSweep out;
  for (double r : r_grid) {
    const bool ok = oracle.count(blend(face, cover, r), 0) >= oracle.trials();
    out.rows.push_back({r, ok});
    if (ok && (!out.largest_passing || r > *out.largest_passing)) out.largest_passing = r;
  }
  return out;
}

struct SweepRow {
  double r = 0.0;
  std::optional<double> blend_b;
  int samples = 0;
  int detected = 0;
  double fraction() const { return samples > 0 ? static_cast<double>(detected) / samples : 0.0; }
};

/// Spoof j of grid point i in starter_random_sweep. source is the cover, or
/// the b-blend of face and cover for random-of-blend.
inline GrayImage sweep_sample(const GrayImage& face, const GrayImage& source, double r, std::uint64_t seed,
                              std::uint64_t i, std::uint64_t j) {
  Rng rng = make_rng(derive_seed(seed, {i, j}));
  return random_subset_spoof(face, source, r, rng).first;
}

inline std::uint64_t sweep_oracle_seed(std::uint64_t seed, std::uint64_t i, std::uint64_t j) {
  return derive_seed(seed, {i, j, stream_tag("oracle")});
}

/// For each r, samples random-subset (or random-of-blend when blend_b is set)
/// spoofs and counts how many pass. Sample j of grid point i draws its pixel
/// set from derive_seed(seed, {i, j}).
inline std::vector<SweepRow> starter_random_sweep(const GrayImage& face, const GrayImage& cover,
                                                  std::optional<double> blend_b, const std::vector<double>& r_grid,
                                                  int samples_per_r, const Oracle& oracle, std::uint64_t seed,
                                                  int jobs = 1) {
  require_same_shape(face, cover, "starter_random_sweep");
  if (samples_per_r < 1) throw Error(Errc::invalid_config, "samples per r must be >= 1");
  const GrayImage source = blend_b ? blend(face, cover, *blend_b) : cover;
  std::vector<SweepRow> rows;
  for (std::size_t i = 0; i < r_grid.size(); ++i) {
    const double r = r_grid[i];
    const int hits = run_trials(samples_per_r, jobs, [&](int j) {
      const auto sj = static_cast<std::uint64_t>(j);
      return oracle.count(sweep_sample(face, source, r, seed, i, sj), sweep_oracle_seed(seed, i, sj)) >=
             oracle.trials();
    });
    rows.push_back({r, blend_b, samples_per_r, hits});
  }
  return rows;
}

}  // namespace vjspoof
