#pragma once

// Monte Carlo detection rates, channel-vs-channel fidelity scatter and the
// CSV tables behind them.

#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "vjspoof/attacks.hpp"
#include "vjspoof/channel.hpp"
#include "vjspoof/detector.hpp"
#include "vjspoof/kvconfig.hpp"
#include "vjspoof/oracle.hpp"

namespace vjspoof {

struct RateRecord {
  std::string image_id;
  int trials = 0;
  int detections = 0;
  double rate() const { return trials > 0 ? static_cast<double>(detections) / trials : 0.0; }
  friend bool operator==(const RateRecord&, const RateRecord&) = default;
};

/// Trial i runs on its own stream derive_seed(seed, {i}), so a longer run
/// extends a shorter one with the same seed.
inline RateRecord detection_rate(const GrayImage& img, const Detector& det, const ReferenceBox& ref,
                                 const ChannelParams& channel, int trials, std::uint64_t seed, int jobs = 1,
                                 std::string image_id = {}, const DetectParams& params = {}) {
  if (trials < 1) throw Error(Errc::invalid_config, "trials must be >= 1");
  channel.validate();
  const ReferenceBox scaled = ref.scaled(channel.upscale_k);
  const int hits = run_trials(trials, jobs, [&](int i) {
    Rng rng = make_rng(derive_seed(seed, {static_cast<std::uint64_t>(i)}));
    return any_match(det.detect(apply_channel(img, channel, rng), params), scaled);
  });
  return {std::move(image_id), trials, hits};
}

/// Same as above with a caller-supplied per-trial verdict; used with stand-in
/// detectors.
inline RateRecord detection_rate(const std::function<bool(std::uint64_t)>& trial, int trials, std::uint64_t seed,
                                 int jobs = 1, std::string image_id = {}) {
  if (trials < 1) throw Error(Errc::invalid_config, "trials must be >= 1");
  const int hits = run_trials(trials, jobs, [&](int i) { return trial(derive_seed(seed, {static_cast<std::uint64_t>(i)})); });
  return {std::move(image_id), trials, hits};
}

struct ScatterRow {
  std::string image_id;
  double rate_a = 0.0;
  double rate_b = 0.0;
  friend bool operator==(const ScatterRow&, const ScatterRow&) = default;
};

/// Detection rate of each image under two channels. Image j uses seed
/// derive_seed(seed, {j}) for both channels, so identical channels give
/// identical rates.
inline std::vector<ScatterRow> fidelity_scatter(const std::vector<GrayImage>& images,
                                                const std::vector<std::string>& ids, const Detector& det,
                                                const ReferenceBox& ref, const ChannelParams& channel_a,
                                                const ChannelParams& channel_b, int trials, std::uint64_t seed,
                                                int jobs = 1) {
  if (!ids.empty() && ids.size() != images.size()) {
    throw Error(Errc::invalid_config, "image id count does not match image count");
  }
  std::vector<ScatterRow> rows;
  rows.reserve(images.size());
  for (std::size_t j = 0; j < images.size(); ++j) {
    const std::string id = ids.empty() ? std::to_string(j) : ids[j];
    const std::uint64_t s = derive_seed(seed, {j});
    const auto a = detection_rate(images[j], det, ref, channel_a, trials, s, jobs);
    const auto b = detection_rate(images[j], det, ref, channel_b, trials, s, jobs);
    rows.push_back({id, a.rate(), b.rate()});
  }
  return rows;
}

// ---------------------------------------------------------------- CSV

namespace csv {

/// Quotes a field when it holds a comma, quote or line break.
inline std::string field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

inline std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(std::move(cur));
  return out;
}

inline std::string num(double v) { return KeyValues::format(v); }

inline std::vector<std::vector<std::string>> read_table(std::istream& in, const std::string& header,
                                                        std::size_t columns) {
  std::string line;
  if (!std::getline(in, line)) throw Error(Errc::malformed_format, "CSV is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != header) throw Error(Errc::malformed_format, "unexpected CSV header: " + line);
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    auto f = split_line(line);
    if (f.size() != columns) throw Error(Errc::malformed_format, "wrong field count: " + line);
    rows.push_back(std::move(f));
  }
  return rows;
}

template <typename Writer>
void save(const std::filesystem::path& path, Writer&& w) {
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  if (!out) throw Error(Errc::io_error, "cannot write " + path.string());
  w(out);
  if (!out) throw Error(Errc::io_error, "write failed: " + path.string());
}

inline double to_double(const std::string& s) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw Error(Errc::malformed_format, "not a number: '" + s + "'");
  }
}

inline int to_int(const std::string& s) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw Error(Errc::malformed_format, "not an integer: '" + s + "'");
  }
}

}  // namespace csv

inline constexpr const char* rates_csv_header = "image_id,trials,detections,rate";
inline constexpr const char* scatter_csv_header = "image_id,rate_a,rate_b";
inline constexpr const char* sweep_csv_header = "r,blend_b,samples,detected,fraction";

inline void write_csv(std::ostream& os, const std::vector<RateRecord>& recs) {
  os << rates_csv_header << '\n';
  for (const auto& r : recs) {
    os << csv::field(r.image_id) << ',' << r.trials << ',' << r.detections << ',' << csv::num(r.rate()) << '\n';
  }
}

inline void write_csv(std::ostream& os, const std::vector<ScatterRow>& rows) {
  os << scatter_csv_header << '\n';
  for (const auto& r : rows) os << csv::field(r.image_id) << ',' << csv::num(r.rate_a) << ',' << csv::num(r.rate_b) << '\n';
}

/// blend_b is left empty for plain random-subset sweeps.
inline void write_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
  os << sweep_csv_header << '\n';
  for (const auto& r : rows) {
    os << csv::num(r.r) << ',' << (r.blend_b ? csv::num(*r.blend_b) : "") << ',' << r.samples << ','
       << r.detected << ',' << csv::num(r.fraction()) << '\n';
  }
}

template <typename Rows>
void export_csv(const Rows& rows, const std::filesystem::path& path) {
  csv::save(path, [&](std::ostream& os) { write_csv(os, rows); });
}

inline std::vector<RateRecord> read_rates_csv(std::istream& in) {
  std::vector<RateRecord> out;
  for (auto& f : csv::read_table(in, rates_csv_header, 4)) {
    RateRecord r{f[0], csv::to_int(f[1]), csv::to_int(f[2])};
    if (r.detections < 0 || r.detections > r.trials) throw Error(Errc::malformed_format, "detections out of range");
    out.push_back(std::move(r));
  }
  return out;
}

inline std::vector<ScatterRow> read_scatter_csv(std::istream& in) {
  std::vector<ScatterRow> out;
  for (auto& f : csv::read_table(in, scatter_csv_header, 3)) {
    out.push_back({f[0], csv::to_double(f[1]), csv::to_double(f[2])});
  }
  return out;
}

inline std::vector<SweepRow> read_sweep_csv(std::istream& in) {
  std::vector<SweepRow> out;
  for (auto& f : csv::read_table(in, sweep_csv_header, 5)) {
    SweepRow r;
    r.r = csv::to_double(f[0]);
    if (!f[1].empty()) r.blend_b = csv::to_double(f[1]);
    r.samples = csv::to_int(f[2]);
    r.detected = csv::to_int(f[3]);
    out.push_back(r);
  }
  return out;
}

}  // namespace vjspoof
