#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <set>
#include <sstream>

#include "manifest.hpp"
#include "vjspoof/attacks.hpp"
#include "vjspoof/calibration.hpp"
#include "vjspoof/cascade.hpp"
#include "vjspoof/channel_config.hpp"
#include "vjspoof/detector.hpp"
#include "vjspoof/eval.hpp"
#include "vjspoof/image_io.hpp"
#include "vjspoof/kvconfig.hpp"

#ifndef VJSPOOF_DEFAULT_MODEL
#define VJSPOOF_DEFAULT_MODEL "haarcascade_frontalface_default.xml"
#endif

namespace fs = std::filesystem;

namespace vjspoof::cli {

namespace {

// ---------------------------------------------------------------- settings

std::string grid_text(double step) {
  std::string s;
  const int n = static_cast<int>(std::lround(1.0 / step));
  for (int i = 0; i <= n; ++i) s += (i ? "," : "") + KeyValues::format(i * step);
  return s;
}

KeyValues detect_defaults() {
  return KeyValues::parse("scale_factor = 1.1\nmin_neighbors = 3\nmin_size = 0\nmax_size = 0\nseed = 0\n");
}

void add_channel_defaults(KeyValues& kv, const std::string& prefix = "") {
  ChannelConfig c;
  c.to_keys(kv, prefix);
  kv.set(prefix + "brightening_scale", c.brightening_scale);
}

void add_search_defaults(KeyValues& kv, const AttackConfig& c) {
  kv.set("shift_rate", c.shift_rate);
  kv.set("required_detections", c.required_detections);
  kv.set("oracle_trials", c.oracle_trials);
  kv.set("stall_window", c.stall_window);
  kv.set("max_iterations", c.max_iterations);
}

void add_gradient_defaults(KeyValues& kv) {
  const GradientConfig g;
  kv.set("epsilon", g.epsilon);
  kv.set("region_size", g.region_size);
  kv.set("alpha_resolution", g.alpha_resolution);
  kv.set("max_rounds", g.max_rounds);
  kv.set("monotonicity_probes", g.monotonicity_probes);
}

void add_sweep_defaults(KeyValues& kv, bool with_blend) {
  kv.set("r_grid", grid_text(0.05));
  kv.set("samples_per_r", 300);
  kv.set("blend_b", with_blend ? std::string("0.5") : std::string());
}

/// Every key any subcommand understands; anything else in a config file is a typo.
bool known_key(const std::string& key) {
  static const std::set<std::string> keys = [] {
    KeyValues all = detect_defaults();
    add_channel_defaults(all);
    add_channel_defaults(all, "channel_b.");
    add_search_defaults(all, {});
    add_gradient_defaults(all);
    add_sweep_defaults(all, true);
    all.set("trials", 100);
    all.set("count", 1);
    all.set("samples", 120);
    std::set<std::string> out;
    for (const auto& [k, v] : all.entries()) out.insert(k);
    return out;
  }();
  return keys.count(key) != 0;
}

/// defaults < config file < flags. Only keys the command uses are kept.
KeyValues resolve(const KeyValues& defaults, const std::string& config_path, const std::vector<std::string>& sets,
                  const std::optional<std::uint64_t>& seed) {
  KeyValues out = defaults;
  auto overlay = [&](const std::string& k, const std::string& v, const std::string& origin) {
    if (!known_key(k)) throw Error(Errc::invalid_config, origin + ": unknown key '" + k + "'");
    if (defaults.has(k)) out.set(k, v);
  };
  if (!config_path.empty()) {
    const KeyValues file = KeyValues::load(config_path);
    for (const auto& [k, v] : file.entries()) overlay(k, v, config_path);
  }
  for (const auto& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw Error(Errc::invalid_config, "--set expects key=value, got '" + s + "'");
    auto trim = [](std::string t) {
      t.erase(0, t.find_first_not_of(' '));
      t.erase(t.find_last_not_of(' ') + 1);
      return t;
    };
    overlay(trim(s.substr(0, eq)), trim(s.substr(eq + 1)), "--set");
  }
  if (seed) out.set("seed", std::to_string(*seed));
  return out;
}

DetectParams detect_params(const KeyValues& kv) {
  DetectParams p;
  p.scale_factor = kv.get("scale_factor", p.scale_factor);
  p.min_neighbors = kv.get("min_neighbors", p.min_neighbors);
  p.min_width = p.min_height = kv.get("min_size", 0);
  p.max_width = p.max_height = kv.get("max_size", 0);
  p.validate();
  return p;
}

AttackConfig attack_config(const KeyValues& kv) {
  AttackConfig c;
  c.shift_rate = kv.get("shift_rate", c.shift_rate);
  c.required_detections = kv.get("required_detections", c.required_detections);
  c.oracle_trials = kv.get("oracle_trials", c.oracle_trials);
  c.stall_window = kv.get("stall_window", c.stall_window);
  c.max_iterations = kv.get("max_iterations", c.max_iterations);
  c.seed = kv.get_u64("seed", 0);
  c.validate();
  return c;
}

GradientConfig gradient_config(const KeyValues& kv) {
  GradientConfig g;
  g.epsilon = kv.get("epsilon", g.epsilon);
  g.region_size = kv.get("region_size", g.region_size);
  g.alpha_resolution = kv.get("alpha_resolution", g.alpha_resolution);
  g.max_rounds = kv.get("max_rounds", g.max_rounds);
  g.monotonicity_probes = kv.get("monotonicity_probes", g.monotonicity_probes);
  g.seed = kv.get_u64("seed", 0);
  g.validate();
  return g;
}

std::vector<double> r_grid(const KeyValues& kv) {
  std::vector<double> out;
  std::stringstream ss(kv.get("r_grid", std::string()));
  std::string item;
  while (std::getline(ss, item, ',')) {
    KeyValues one;
    one.set("r", item);
    const double r = one.get("r", 0.0);
    if (!(r >= 0.0 && r <= 1.0)) throw Error(Errc::invalid_config, "r_grid values must lie in [0, 1]");
    out.push_back(r);
  }
  if (out.empty()) throw Error(Errc::invalid_config, "r_grid is empty");
  return out;
}

std::optional<double> blend_b(const KeyValues& kv) {
  if (kv.get("blend_b", std::string()).empty()) return std::nullopt;
  const double b = kv.get("blend_b", 0.0);
  if (!(b >= 0.0 && b <= 1.0)) throw Error(Errc::invalid_config, "blend_b must lie in [0, 1]");
  return b;
}

int positive(const KeyValues& kv, const std::string& key) {
  const int v = kv.get(key, 0);
  if (v < 1) throw Error(Errc::invalid_config, key + " must be >= 1");
  return v;
}

fs::path config_dir(const std::string& config_path) {
  return config_path.empty() ? fs::current_path() : fs::absolute(config_path).parent_path();
}

ChannelParams channel_params(const KeyValues& kv, const std::string& prefix, const std::string& config_path, int w,
                             int h) {
  return ChannelConfig::from_keys(kv, prefix, config_dir(config_path)).resolve(w, h);
}

std::string channel_hash(const ChannelParams& p) {
  std::ostringstream s;
  s << p.upscale_k << ' ' << KeyValues::format(p.blur_sigma) << ' ' << KeyValues::format(p.noise_sigma) << ' '
    << KeyValues::format(p.response.knot_x) << ' ' << KeyValues::format(p.response.knot_y) << ' '
    << KeyValues::format(p.response.slope_low) << ' ' << KeyValues::format(p.response.slope_high) << ' '
    << p.brightening.width() << 'x' << p.brightening.height();
  for (double v : p.brightening.values()) s << ' ' << KeyValues::format(v);
  return sha256_hex(s.str());
}

// ---------------------------------------------------------------- shared options

struct Common {
  std::string model = VJSPOOF_DEFAULT_MODEL;
  std::string config;
  std::string out;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  int jobs = 1;

  void attach(CLI::App* app, bool out_required) {
    app->add_option("--model", model, "Cascade XML")->capture_default_str();
    app->add_option("--config", config, "key = value settings file");
    auto* o = app->add_option("--out", out, "Output directory");
    if (out_required) o->required();
    app->add_option("--set", sets, "Override one setting, key=value (repeatable)");
    app->add_option("--seed", seed, "Master seed");
    app->add_option("--jobs", jobs, "Concurrent trials")->check(CLI::PositiveNumber);
  }

  fs::path out_dir() const {
    fs::create_directories(out);
    return out;
  }
};

std::shared_ptr<const Detector> load_detector(const std::string& model) {
  return std::make_shared<const Detector>(load_cascade(model));
}

GrayImage load_same_shape(const std::string& path, const GrayImage& like, const char* what) {
  GrayImage img = load_image(path);
  require_same_shape(like, img, what);
  return img;
}

void save_rounds(const std::vector<GradientRound>& rounds, const fs::path& path) {
  csv::save(path, [&](std::ostream& os) {
    os << "round,alpha,non_monotone,changed_pixels,accepted\n";
    for (const auto& r : rounds) {
      os << r.round << ',' << KeyValues::format(r.alpha) << ',' << (r.non_monotone ? 1 : 0) << ','
         << r.changed_pixels << ',' << (r.accepted ? 1 : 0) << '\n';
    }
  });
}

// ---------------------------------------------------------------- detect

int cmd_detect(const Common& c, const std::string& image, std::ostream& out) {
  const KeyValues kv = resolve(detect_defaults(), c.config, c.sets, c.seed);
  const DetectParams params = detect_params(kv);
  const auto det = load_detector(c.model);
  const GrayImage img = load_image(image);
  const auto dets = det->detect(img, params);
  std::ostringstream table;
  table << detection_csv_header << '\n';
  for (const auto& d : dets) table << d << '\n';
  out << table.str();
  if (!c.out.empty()) {
    const fs::path dir = c.out_dir();
    csv::save(dir / "detections.csv", [&](std::ostream& os) { os << table.str(); });
    Manifest m("detect");
    m.add_config(kv);
    m.add_input("model", c.model);
    m.add_input("image", image);
    m.set("detections", std::to_string(dets.size()));
    m.add_output(dir / "detections.csv");
    m.write(dir);
  }
  return dets.empty() ? exit_negative : exit_ok;
}

// ---------------------------------------------------------------- attack

struct AttackArgs {
  std::string variant;
  std::string face;
  std::string cover;
  bool prepare = false;
};

KeyValues attack_defaults(const std::string& variant) {
  KeyValues kv = detect_defaults();
  if (variant == "exact") add_search_defaults(kv, AttackConfig::exact_defaults());
  if (variant == "analog") {
    add_search_defaults(kv, AttackConfig::analog_defaults());
    add_channel_defaults(kv);
  }
  if (variant == "gradient") add_gradient_defaults(kv);
  if (variant == "blend") kv.set("r_grid", grid_text(0.01));
  if (variant == "subset") add_sweep_defaults(kv, false);
  if (variant == "randblend") add_sweep_defaults(kv, true);
  return kv;
}

int cmd_attack(const Common& c, const AttackArgs& a, std::ostream& out) {
  const KeyValues kv = resolve(attack_defaults(a.variant), c.config, c.sets, c.seed);
  const DetectParams params = detect_params(kv);
  const std::uint64_t seed = kv.get_u64("seed", 0);
  // validate everything before loading the model or searching
  std::optional<AttackConfig> search;
  std::optional<GradientConfig> gradient;
  if (a.variant == "exact" || a.variant == "analog") search = attack_config(kv);
  if (a.variant == "gradient") gradient = gradient_config(kv);
  if (a.variant == "blend" || a.variant == "subset" || a.variant == "randblend") r_grid(kv);
  if (a.variant == "subset" || a.variant == "randblend") positive(kv, "samples_per_r");
  if (a.variant == "randblend" && !blend_b(kv)) throw Error(Errc::invalid_config, "randblend needs blend_b");

  GrayImage face = load_image(a.face);
  const GrayImage cover = load_same_shape(a.cover, face, "attack face/cover");
  std::optional<ChannelParams> channel;
  if (a.variant == "analog") channel = channel_params(kv, "", c.config, face.width(), face.height());
  const auto det = load_detector(c.model);

  const fs::path dir = c.out_dir();
  Manifest m("attack");
  m.set("variant", a.variant);
  m.add_config(kv);
  m.add_input("model", c.model);
  m.add_input("face", a.face);
  m.add_input("cover", a.cover);
  if (channel) m.set("channel.sha256", channel_hash(*channel));

  ReferenceBox ref;
  if (a.prepare) {
    std::tie(face, ref) = prepare_face(face, cover, *det, params);
    save_image(face, dir / "face.pgm");
    m.add_output(dir / "face.pgm");
  } else {
    ref = single_face(*det, face, params);
  }
  m.set("reference_box", std::to_string(ref.x) + "," + std::to_string(ref.y) + "," + std::to_string(ref.width) +
                             "," + std::to_string(ref.height));
  const ExactOracle exact(det, ref, params);

  auto finish_search = [&](const AttackResult& r) {
    save_image(r.spoof, dir / "spoof.pgm");
    r.trace.save_csv(dir / "trace.csv");
    m.add_output(dir / "spoof.pgm");
    m.add_output(dir / "trace.csv");
    m.set("stop_reason", stop_reason_name(r.stop));
    m.set("iterations", std::to_string(r.iterations));
    m.set("accepted", std::to_string(r.trace.accepted_count()));
    m.set("oracle_calls", std::to_string(r.oracle_calls));
    m.set("l1_face_cover", std::to_string(l1_distance(face, cover)));
    m.set("l1_spoof_cover", std::to_string(l1_distance(r.spoof, cover)));
    out << "stop=" << stop_reason_name(r.stop) << " iterations=" << r.iterations
        << " accepted=" << r.trace.accepted_count() << " l1_spoof_cover=" << l1_distance(r.spoof, cover)
        << " l1_face_cover=" << l1_distance(face, cover) << '\n';
  };

  int code = exit_ok;
  if (a.variant == "exact") {
    finish_search(exact_attack(face, cover, exact, *search));
  } else if (a.variant == "analog") {
    const AnalogOracle oracle(det, ref, *channel, search->oracle_trials, c.jobs, params);
    finish_search(analog_attack(face, cover, oracle, *search));
  } else if (a.variant == "gradient") {
    const GradientResult r = gradient_attack(face, cover, exact, *gradient);
    finish_search(r);
    save_rounds(r.rounds, dir / "rounds.csv");
    m.add_output(dir / "rounds.csv");
  } else if (a.variant == "blend") {
    const BlendSweep s = starter_blend_attack(face, cover, exact, r_grid(kv));
    csv::save(dir / "blend.csv", [&](std::ostream& os) {
      os << "r,detected\n";
      for (const auto& row : s.rows) os << KeyValues::format(row.r) << ',' << (row.detected ? 1 : 0) << '\n';
    });
    m.add_output(dir / "blend.csv");
    if (s.largest_passing) {
      save_image(blend(face, cover, *s.largest_passing), dir / "spoof.pgm");
      m.add_output(dir / "spoof.pgm");
      m.set("largest_passing_r", KeyValues::format(*s.largest_passing));
      out << "largest_passing_r=" << KeyValues::format(*s.largest_passing) << '\n';
    } else {
      out << "no blend in the grid is detected\n";
      code = exit_negative;
    }
  } else {
    const auto b = blend_b(kv);
    const auto grid = r_grid(kv);
    const int samples = positive(kv, "samples_per_r");
    const auto rows = starter_random_sweep(face, cover, b, grid, samples, exact, seed, c.jobs);
    export_csv(rows, dir / "sweep.csv");
    m.add_output(dir / "sweep.csv");
    // keep one detected spoof from the largest r that had any
    const GrayImage source = b ? blend(face, cover, *b) : cover;
    for (std::size_t i = rows.size(); i-- > 0;) {
      if (rows[i].detected == 0) continue;
      for (int j = 0; j < samples; ++j) {
        const GrayImage s = sweep_sample(face, source, grid[i], seed, i, static_cast<std::uint64_t>(j));
        if (exact.count(s, sweep_oracle_seed(seed, i, static_cast<std::uint64_t>(j))) == 1) {
          save_image(s, dir / "spoof.pgm");
          m.add_output(dir / "spoof.pgm");
          m.set("spoof_r", KeyValues::format(grid[i]));
          break;
        }
      }
      break;
    }
    for (const auto& r : rows) out << "r=" << KeyValues::format(r.r) << " fraction=" << KeyValues::format(r.fraction()) << '\n';
  }
  m.write(dir);
  return code;
}

// ---------------------------------------------------------------- calibrate

struct CalibrateArgs {
  std::string frames;
  std::string test;
  std::string bars;
  std::string bars_capture;
  std::string response;
};

std::vector<fs::path> image_files(const fs::path& dir) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw Error(Errc::file_not_found, dir.string());
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    const auto ext = e.path().extension().string();
    if (e.is_regular_file() && (ext == ".pgm" || ext == ".png")) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

int cmd_calibrate(const Common& c, const CalibrateArgs& a, std::ostream& out, std::ostream& err) {
  KeyValues defaults;
  add_channel_defaults(defaults);
  defaults.set("seed", 0);
  const KeyValues kv = resolve(defaults, c.config, c.sets, c.seed);
  const ChannelConfig base = ChannelConfig::from_keys(kv, "", config_dir(c.config));

  const auto files = image_files(a.frames);
  std::vector<GrayImage> frames;
  for (const auto& f : files) frames.push_back(load_image(f));
  const GrayImage test = load_image(a.test);

  Manifest m("calibrate");
  m.add_config(kv);
  m.add_input("test", a.test);
  m.set("frames", std::to_string(frames.size()));
  m.set("frames.sha256", [&] {
    std::string all;
    for (const auto& f : files) all += sha256_file(f);
    return sha256_hex(all);
  }());

  ChannelParams p;
  p.brightening = estimate_brightening(frames, test);
  p.upscale_k = frames.front().width() / test.width();
  if (frames.size() >= 2) {
    p.noise_sigma = fit_noise_sigma(frames);
  } else {
    err << "warning: a single frame carries no noise information; noise_sigma set to 0\n";
    p.noise_sigma = 0.0;
  }
  p.blur_sigma = base.blur_sigma;
  if (!a.bars.empty()) {
    p.blur_sigma = fit_blur_sigma(load_image(a.bars), load_image(a.bars_capture));
    m.add_input("bars", a.bars);
    m.add_input("bars_capture", a.bars_capture);
  }
  p.response = base.response;
  if (!a.response.empty()) {
    std::ifstream in(a.response);
    if (!in) throw Error(Errc::file_not_found, a.response);
    std::vector<double> xs, ys;
    for (const auto& f : csv::read_table(in, "input,observed", 2)) {
      xs.push_back(csv::to_double(f[0]));
      ys.push_back(csv::to_double(f[1]));
    }
    p.response = fit_response_curve(xs, ys);
    m.add_input("response", a.response);
  }
  p.validate();

  const fs::path dir = c.out_dir();
  save_channel_params(p, dir / "channel.cfg");
  m.add_output(dir / "channel.cfg");
  m.add_output(dir / "channel_brightening.pgm");
  m.set("channel.sha256", channel_hash(p));
  m.write(dir);
  out << "upscale_k=" << p.upscale_k << " noise_sigma=" << KeyValues::format(p.noise_sigma)
      << " blur_sigma=" << KeyValues::format(p.blur_sigma) << '\n';
  return exit_ok;
}

// ---------------------------------------------------------------- channel-apply

int cmd_channel_apply(const Common& c, const std::string& image, std::ostream& out) {
  KeyValues defaults;
  add_channel_defaults(defaults);
  defaults.set("seed", 0);
  defaults.set("count", 1);
  const KeyValues kv = resolve(defaults, c.config, c.sets, c.seed);
  const int count = positive(kv, "count");
  const GrayImage img = load_image(image);
  const ChannelParams p = channel_params(kv, "", c.config, img.width(), img.height());
  const std::uint64_t seed = kv.get_u64("seed", 0);

  const fs::path dir = c.out_dir();
  Manifest m("channel-apply");
  m.add_config(kv);
  m.add_input("image", image);
  m.set("channel.sha256", channel_hash(p));
  for (int i = 0; i < count; ++i) {
    Rng rng = make_rng(derive_seed(seed, {static_cast<std::uint64_t>(i)}));
    char name[32];
    std::snprintf(name, sizeof name, "channel_%03d.pgm", i);
    save_image(apply_channel(img, p, rng), dir / name);
    m.add_output(dir / name);
  }
  m.write(dir);
  out << "wrote " << count << " image(s) to " << dir.string() << '\n';
  return exit_ok;
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
  std::string task;
  std::vector<std::string> images;
  std::string reference;
  std::string face;
  std::string cover;
  std::string trace;
  std::string start;
};

KeyValues eval_defaults(const std::string& task) {
  KeyValues kv = detect_defaults();
  if (task == "rate" || task == "scatter") {
    kv.set("trials", 100);
    add_channel_defaults(kv);
  }
  if (task == "scatter") {
    // the second channel stands in for a physical capture: heavier blur and noise
    add_channel_defaults(kv, "channel_b.");
    kv.set("channel_b.blur_sigma", 1.2);
    kv.set("channel_b.noise_sigma", 2.5);
    kv.set("samples", 120);
  }
  if (task == "sweep") add_sweep_defaults(kv, false);
  return kv;
}

/// Evenly spaced accepted iterates of a trace, replayed from start.
std::vector<std::pair<std::string, GrayImage>> trace_samples(const GrayImage& start, const SearchTrace& trace,
                                                             int samples) {
  std::vector<std::pair<std::string, GrayImage>> all;
  replay_trace(start, trace, [&](long long it, const GrayImage& s) { all.emplace_back("iter_" + std::to_string(it), s); });
  if (static_cast<int>(all.size()) <= samples) return all;
  std::vector<std::pair<std::string, GrayImage>> out;
  for (int i = 0; i < samples; ++i) {
    const std::size_t k = samples == 1 ? all.size() - 1
                                       : static_cast<std::size_t>(std::llround(
                                             static_cast<double>(i) * (all.size() - 1) / (samples - 1)));
    out.push_back(all[k]);
  }
  return out;
}

int cmd_eval(const Common& c, const EvalArgs& a, std::ostream& out) {
  const KeyValues kv = resolve(eval_defaults(a.task), c.config, c.sets, c.seed);
  const DetectParams params = detect_params(kv);
  const std::uint64_t seed = kv.get_u64("seed", 0);
  if (a.task != "sweep") positive(kv, "trials");
  if (a.task == "sweep") {
    r_grid(kv);
    positive(kv, "samples_per_r");
  }
  const auto det = load_detector(c.model);
  const fs::path dir = c.out_dir();
  Manifest m("eval");
  m.set("task", a.task);
  m.add_config(kv);
  m.add_input("model", c.model);

  if (a.task == "sweep") {
    if (a.face.empty() || a.cover.empty()) throw Error(Errc::invalid_config, "sweep needs --face and --cover");
    const GrayImage face = load_image(a.face);
    const GrayImage cover = load_same_shape(a.cover, face, "sweep face/cover");
    m.add_input("face", a.face);
    m.add_input("cover", a.cover);
    const ExactOracle exact(det, single_face(*det, face, params), params);
    const auto rows = starter_random_sweep(face, cover, blend_b(kv), r_grid(kv), positive(kv, "samples_per_r"),
                                           exact, seed, c.jobs);
    export_csv(rows, dir / "sweep.csv");
    m.add_output(dir / "sweep.csv");
    m.write(dir);
    out << "wrote " << rows.size() << " rows\n";
    return exit_ok;
  }

  if (a.reference.empty()) throw Error(Errc::invalid_config, a.task + " needs --reference");
  const GrayImage reference = load_image(a.reference);
  m.add_input("reference", a.reference);
  const ReferenceBox ref = single_face(*det, reference, params);

  std::vector<std::pair<std::string, GrayImage>> images;
  for (const auto& p : a.images) {
    images.emplace_back(fs::path(p).stem().string(), load_same_shape(p, reference, "eval image"));
    m.add_input("image." + images.back().first, p);
  }
  if (!a.trace.empty()) {
    const GrayImage start = a.start.empty() ? reference : load_same_shape(a.start, reference, "trace start");
    std::ifstream in(a.trace);
    if (!in) throw Error(Errc::file_not_found, a.trace);
    m.add_input("trace", a.trace);
    for (auto& s : trace_samples(start, SearchTrace::read_csv(in), positive(kv, "samples"))) images.push_back(std::move(s));
  }
  if (images.empty()) throw Error(Errc::empty_input, "no images to evaluate");

  const int trials = positive(kv, "trials");
  const ChannelParams ca = channel_params(kv, "", c.config, reference.width(), reference.height());
  m.set("channel.sha256", channel_hash(ca));
  if (a.task == "rate") {
    std::vector<RateRecord> recs;
    for (std::size_t j = 0; j < images.size(); ++j) {
      recs.push_back(detection_rate(images[j].second, *det, ref, ca, trials, derive_seed(seed, {j}), c.jobs,
                                    images[j].first, params));
      out << recs.back().image_id << ' ' << KeyValues::format(recs.back().rate()) << '\n';
    }
    export_csv(recs, dir / "rates.csv");
    m.add_output(dir / "rates.csv");
  } else {
    const ChannelParams cb = channel_params(kv, "channel_b.", c.config, reference.width(), reference.height());
    m.set("channel_b.sha256", channel_hash(cb));
    m.set("channel_b.role", "simulated stand-in for a physical display-camera channel");
    std::vector<GrayImage> imgs;
    std::vector<std::string> ids;
    for (auto& [id, img] : images) {
      ids.push_back(id);
      imgs.push_back(img);
    }
    const auto rows = fidelity_scatter(imgs, ids, *det, ref, ca, cb, trials, seed, c.jobs);
    export_csv(rows, dir / "scatter.csv");
    m.add_output(dir / "scatter.csv");
    out << "wrote " << rows.size() << " rows\n";
  }
  m.write(dir);
  return exit_ok;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Viola-Jones face detector, analog channel simulator and spoofing attacks", "vjspoof"};
  app.require_subcommand(1);

  Common detect_c, attack_c, calib_c, apply_c, eval_c;
  std::string detect_image, apply_image;
  AttackArgs aa;
  CalibrateArgs ca;
  EvalArgs ea;

  auto* detect = app.add_subcommand("detect", "Print detections as CSV; exit 1 when there are none");
  detect->add_option("image", detect_image, "Input image (PGM or PNG)")->required();
  detect_c.attach(detect, false);

  auto* attack = app.add_subcommand("attack", "Run one spoofing attack");
  attack->add_option("variant", aa.variant, "blend|subset|randblend|exact|analog|gradient")
      ->required()
      ->check(CLI::IsMember({"blend", "subset", "randblend", "exact", "analog", "gradient"}));
  attack->add_option("--face", aa.face, "Face image")->required();
  attack->add_option("--cover", aa.cover, "Cover image")->required();
  attack->add_flag("--prepare", aa.prepare, "Replace everything outside the face box with the cover first");
  attack_c.attach(attack, true);

  auto* calib = app.add_subcommand("calibrate", "Fit channel parameters from captures");
  calib->add_option("--frames", ca.frames, "Directory of captures of the uniform test image")->required();
  calib->add_option("--test", ca.test, "The uniform test image")->required();
  auto* bars = calib->add_option("--bars", ca.bars, "Bar chart test image");
  auto* bars_cap = calib->add_option("--bars-capture", ca.bars_capture, "Capture of the bar chart");
  bars->needs(bars_cap);
  bars_cap->needs(bars);
  calib->add_option("--response", ca.response, "CSV input,observed of mean captured intensities");
  calib_c.attach(calib, true);

  auto* apply = app.add_subcommand("channel-apply", "Pass an image through the simulated channel");
  apply->add_option("image", apply_image, "Input image")->required();
  apply_c.attach(apply, true);

  auto* eval = app.add_subcommand("eval", "Detection rates, fidelity scatter, starter sweeps");
  eval->add_option("task", ea.task, "rate|scatter|sweep")->required()->check(CLI::IsMember({"rate", "scatter", "sweep"}));
  eval->add_option("images", ea.images, "Images to measure (rate, scatter)");
  eval->add_option("--reference", ea.reference, "Prepared face whose detection is the reference box");
  eval->add_option("--face", ea.face, "Face image (sweep)");
  eval->add_option("--cover", ea.cover, "Cover image (sweep)");
  eval->add_option("--trace", ea.trace, "Attack trace to sample iterates from");
  eval->add_option("--start", ea.start, "Start image of the trace (default: --reference)");
  eval_c.attach(eval, true);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? exit_ok : exit_error;
  }

  try {
    if (*detect) return cmd_detect(detect_c, detect_image, out);
    if (*attack) return cmd_attack(attack_c, aa, out);
    if (*calib) return cmd_calibrate(calib_c, ca, out, err);
    if (*apply) return cmd_channel_apply(apply_c, apply_image, out);
    if (*eval) return cmd_eval(eval_c, ea, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return *attack && e.code() == Errc::initial_oracle_failure ? exit_negative : exit_error;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_error;
  }
  return exit_error;
}

}  // namespace vjspoof::cli
