#pragma once

// ChannelParams as key = value text. The brightening map is either
// "synthetic" (built for the spoof size from brightening_peak) or a P5
// sidecar storing round(offset / brightening_scale) + 128.

#include <filesystem>
#include <optional>
#include <string>

#include "vjspoof/channel.hpp"
#include "vjspoof/image_io.hpp"
#include "vjspoof/kvconfig.hpp"

namespace vjspoof {

struct ChannelConfig {
  int upscale_k = 4;
  double blur_sigma = 0.9;
  double noise_sigma = 1.5;
  ResponseCurve response = default_response_curve();
  std::string brightening_map = "synthetic";
  double brightening_peak = 6.0;
  double brightening_scale = 1.0;
  std::optional<OffsetMap> sidecar;

  /// Reads keys (optionally namespaced, e.g. "channel_b."); relative sidecar
  /// paths resolve against base_dir.
  static ChannelConfig from_keys(const KeyValues& kv, const std::string& prefix = "",
                                 const std::filesystem::path& base_dir = {}) {
    ChannelConfig c;
    c.upscale_k = kv.get(prefix + "upscale_k", c.upscale_k);
    c.blur_sigma = kv.get(prefix + "blur_sigma", c.blur_sigma);
    c.noise_sigma = kv.get(prefix + "noise_sigma", c.noise_sigma);
    c.response.knot_x = kv.get(prefix + "response_knot_x", c.response.knot_x);
    c.response.knot_y = kv.get(prefix + "response_knot_y", c.response.knot_y);
    c.response.slope_low = kv.get(prefix + "response_slope_low", c.response.slope_low);
    c.response.slope_high = kv.get(prefix + "response_slope_high", c.response.slope_high);
    c.brightening_map = kv.get(prefix + "brightening_map", c.brightening_map);
    c.brightening_peak = kv.get(prefix + "brightening_peak", c.brightening_peak);
    c.brightening_scale = kv.get(prefix + "brightening_scale", c.brightening_scale);
    c.validate();
    if (c.brightening_map != "synthetic") {
      std::filesystem::path p = c.brightening_map;
      if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
      const GrayImage img = load_image(p);
      std::vector<double> v(img.size());
      for (std::size_t i = 0; i < img.size(); ++i) v[i] = (img[i] - 128.0) * c.brightening_scale;
      c.sidecar = OffsetMap(img.width(), img.height(), std::move(v));
    }
    return c;
  }

  void validate() const {
    ChannelParams p;
    p.upscale_k = upscale_k;
    p.blur_sigma = blur_sigma;
    p.noise_sigma = noise_sigma;
    p.response = response;
    p.validate();
    if (!(brightening_scale > 0.0)) throw Error(Errc::invalid_config, "brightening_scale must be > 0");
  }

  void to_keys(KeyValues& kv, const std::string& prefix = "") const {
    kv.set(prefix + "upscale_k", upscale_k);
    kv.set(prefix + "blur_sigma", blur_sigma);
    kv.set(prefix + "noise_sigma", noise_sigma);
    kv.set(prefix + "response_knot_x", response.knot_x);
    kv.set(prefix + "response_knot_y", response.knot_y);
    kv.set(prefix + "response_slope_low", response.slope_low);
    kv.set(prefix + "response_slope_high", response.slope_high);
    kv.set(prefix + "brightening_map", brightening_map);
    if (brightening_map == "synthetic") {
      kv.set(prefix + "brightening_peak", brightening_peak);
    } else {
      kv.set(prefix + "brightening_scale", brightening_scale);
    }
  }

  /// Concrete parameters for a spoof of the given size.
  ChannelParams resolve(int spoof_width, int spoof_height) const {
    ChannelParams p;
    p.upscale_k = upscale_k;
    p.blur_sigma = blur_sigma;
    p.noise_sigma = noise_sigma;
    p.response = response;
    p.validate();
    const int w = upscale_k * spoof_width;
    const int h = upscale_k * spoof_height;
    if (sidecar) {
      if (sidecar->width() != w || sidecar->height() != h) {
        throw Error(Errc::dimension_mismatch,
                    "brightening map is " + std::to_string(sidecar->width()) + "x" +
                        std::to_string(sidecar->height()) + ", channel needs " + std::to_string(w) +
                        "x" + std::to_string(h));
      }
      p.brightening = *sidecar;
    } else {
      p.brightening = synthetic_brightening(w, h, brightening_peak);
    }
    return p;
  }
};

/// Writes params as a config file plus a <stem>_brightening.pgm sidecar next to it.
inline void save_channel_params(const ChannelParams& p, const std::filesystem::path& path,
                                KeyValues extra = {}) {
  ChannelConfig c;
  c.upscale_k = p.upscale_k;
  c.blur_sigma = p.blur_sigma;
  c.noise_sigma = p.noise_sigma;
  c.response = p.response;
  const std::string sidecar = path.stem().string() + "_brightening.pgm";
  c.brightening_map = sidecar;
  const double m = p.brightening.max_abs();
  c.brightening_scale = m > 0.0 ? m / 127.0 : 1.0;
  GrayImage img(p.brightening.width(), p.brightening.height());
  for (std::size_t i = 0; i < img.size(); ++i) {
    img[i] = round_clamp(p.brightening.values()[i] / c.brightening_scale + 128.0);
  }
  save_image(img, path.parent_path() / sidecar);
  c.to_keys(extra);
  extra.save(path);
}

inline ChannelConfig load_channel_config(const std::filesystem::path& path, const std::string& prefix = "") {
  return ChannelConfig::from_keys(KeyValues::load(path), prefix, path.parent_path());
}

}  // namespace vjspoof
