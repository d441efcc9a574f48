#pragma once

// Detection oracles. An oracle maps a candidate image to a count of
// successful trials in [0, trials()]: the exact oracle runs one detection on
// the image itself, the analog oracle runs m detections on independent
// passes through the simulated channel.

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <functional>
#include <exception>
#include <memory>
#include <mutex>
#include <thread>
#include <vector>

#include "vjspoof/channel.hpp"
#include "vjspoof/detector.hpp"
#include "vjspoof/rng.hpp"

namespace vjspoof {

/// Face bounds found in the prepared original.
struct ReferenceBox {
  int x = 0;
  int y = 0;
  int width = 0;
  int height = 0;

  ReferenceBox scaled(int k) const noexcept { return {x * k, y * k, width * k, height * k}; }
  friend bool operator==(const ReferenceBox&, const ReferenceBox&) = default;
};

/// Every coordinate within 10% of the reference width (x, width) or height
/// (y, height), boundary inclusive. Integer arithmetic keeps the boundary exact.
inline bool match_box(const Detection& d, const ReferenceBox& ref) noexcept {
  return 10 * std::abs(d.x - ref.x) <= ref.width && 10 * std::abs(d.y - ref.y) <= ref.height &&
         10 * std::abs(d.width - ref.width) <= ref.width &&
         10 * std::abs(d.height - ref.height) <= ref.height;
}

inline bool any_match(const std::vector<Detection>& dets, const ReferenceBox& ref) {
  return std::any_of(dets.begin(), dets.end(), [&](const Detection& d) { return match_box(d, ref); });
}

/// Runs trial(i) for i in [0, m) on up to `jobs` threads and returns how many
/// returned true. Trials must be independent; the count does not depend on
/// scheduling.
inline int run_trials(int m, int jobs, const std::function<bool(int)>& trial) {
  if (m <= 0) return 0;
  jobs = std::clamp(jobs, 1, m);
  if (jobs == 1) {
    int n = 0;
    for (int i = 0; i < m; ++i) n += trial(i) ? 1 : 0;
    return n;
  }
  std::vector<char> ok(static_cast<std::size_t>(m), 0);
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto worker = [&] {
    for (int i; (i = next.fetch_add(1)) < m;) {
      try {
        ok[static_cast<std::size_t>(i)] = trial(i) ? 1 : 0;
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  return static_cast<int>(std::count(ok.begin(), ok.end(), 1));
}

class Oracle {
 public:
  virtual ~Oracle() = default;
  /// Number of trials per query (the largest possible count).
  virtual int trials() const = 0;
  /// Successful trials for candidate img; seed drives any randomness.
  virtual int count(const GrayImage& img, std::uint64_t seed) const = 0;
};

class ExactOracle final : public Oracle {
 public:
  ExactOracle(std::shared_ptr<const Detector> det, ReferenceBox ref, DetectParams params = {})
      : det_(std::move(det)), ref_(ref), params_(params) {}

  int trials() const override { return 1; }
  int count(const GrayImage& img, std::uint64_t = 0) const override { return passes(img) ? 1 : 0; }
  bool passes(const GrayImage& img) const { return any_match(det_->detect(img, params_), ref_); }

  const ReferenceBox& reference() const noexcept { return ref_; }

 private:
  std::shared_ptr<const Detector> det_;
  ReferenceBox ref_;
  DetectParams params_;
};

inline bool exact_oracle(const GrayImage& t, const CascadeModel& model, const ReferenceBox& ref,
                         const DetectParams& params = {}) {
  return any_match(detect_faces(model, t, params), ref);
}

/// m channel passes, each with its own sub-stream derive_seed(seed, {trial}),
/// matched against the reference box scaled to channel resolution.
class AnalogOracle final : public Oracle {
 public:
  AnalogOracle(std::shared_ptr<const Detector> det, ReferenceBox ref, ChannelParams channel, int m,
               int jobs = 1, DetectParams params = {})
      : det_(std::move(det)), ref_(ref), channel_(std::move(channel)), m_(m), jobs_(jobs), params_(params) {
    if (m_ < 1) throw Error(Errc::invalid_config, "oracle trials must be >= 1");
    channel_.validate();
  }

  int trials() const override { return m_; }

  int count(const GrayImage& img, std::uint64_t seed) const override {
    const ReferenceBox scaled = ref_.scaled(channel_.upscale_k);
    return run_trials(m_, jobs_, [&](int i) {
      Rng rng = make_rng(derive_seed(seed, {static_cast<std::uint64_t>(i)}));
      return any_match(det_->detect(apply_channel(img, channel_, rng), params_), scaled);
    });
  }

  const ChannelParams& channel() const noexcept { return channel_; }
  const ReferenceBox& reference() const noexcept { return ref_; }

 private:
  std::shared_ptr<const Detector> det_;
  ReferenceBox ref_;
  ChannelParams channel_;
  int m_;
  int jobs_;
  DetectParams params_;
};

inline int analog_oracle(const GrayImage& t, const CascadeModel& model, const ReferenceBox& ref,
                         const ChannelParams& channel, int m, std::uint64_t seed, int jobs = 1) {
  return AnalogOracle(std::make_shared<const Detector>(model), ref, channel, m, jobs).count(t, seed);
}

/// Oracle backed by an arbitrary function; used for stand-in detectors.
class FunctionOracle final : public Oracle {
 public:
  using Fn = std::function<int(const GrayImage&, std::uint64_t)>;
  FunctionOracle(Fn fn, int trials) : fn_(std::move(fn)), trials_(trials) {}
  int trials() const override { return trials_; }
  int count(const GrayImage& img, std::uint64_t seed) const override { return fn_(img, seed); }

 private:
  Fn fn_;
  int trials_;
};

}  // namespace vjspoof
