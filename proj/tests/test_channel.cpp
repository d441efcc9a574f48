#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "test_support.hpp"
#include "vjspoof/calibration.hpp"
#include "vjspoof/channel.hpp"
#include "vjspoof/channel_config.hpp"
#include "vjspoof/image_io.hpp"
#include "vjspoof/kvconfig.hpp"

using namespace vjspoof;

namespace {

double mean_of(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); }

// direct 2-D convolution with the outer product of the 1-D kernel, clamp-to-edge
RealImage blur_2d(const RealImage& img, double sigma) {
  const auto k = gaussian_kernel(sigma);
  const int r = static_cast<int>(k.size() / 2);
  RealImage out(img.width, img.height);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      double acc = 0.0;
      for (int j = -r; j <= r; ++j)
        for (int i = -r; i <= r; ++i)
          acc += k[i + r] * k[j + r] * img(std::clamp(x + i, 0, img.width - 1), std::clamp(y + j, 0, img.height - 1));
      out(x, y) = acc;
    }
  return out;
}

}  // namespace

// ---------------------------------------------------------------- channel

TEST(Channel, IdentityParamsAreIdentity) {
  const GrayImage img = testsupport::random_image(17, 11, 3);
  auto rng = make_rng(1);
  EXPECT_EQ(apply_channel(img, identity_channel_params(17, 11), rng), img);
}

TEST(Channel, UpscaleOnlyReplicates) {
  GrayImage one(1, 1, 9);
  auto rng = make_rng(1);
  const GrayImage out = apply_channel(one, identity_channel_params(1, 1, 4), rng);
  ASSERT_EQ(out.width(), 4);
  ASSERT_EQ(out.height(), 4);
  for (std::size_t i = 0; i < out.size(); ++i) EXPECT_EQ(out[i], 9);
  const GrayImage img = testsupport::random_image(6, 5, 8);
  EXPECT_EQ(apply_channel(img, identity_channel_params(6, 5, 3), rng), upscale_replicate(img, 3));
}

TEST(Channel, BrighteningSizeMismatch) {
  GrayImage img(10, 10, 100);
  ChannelParams p = default_channel_params(10, 10);
  p.upscale_k = 2;
  auto rng = make_rng(0);
  try {
    apply_channel(img, p, rng);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::dimension_mismatch);
  }
}

TEST(Channel, NoiseStdOnUniformGray) {
  ChannelParams p = identity_channel_params(400, 250);
  p.noise_sigma = 1.5;
  auto rng = make_rng(11);
  const GrayImage out = apply_channel(GrayImage(400, 250, 128), p, rng);
  double ss = 0.0, s = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    s += out[i] - 128.0;
    ss += (out[i] - 128.0) * (out[i] - 128.0);
  }
  const double n = out.size();
  const double sd = std::sqrt(ss / n - (s / n) * (s / n));
  // rounding adds 1/12 of variance: sqrt(2.25 + 1/12) = 1.528
  EXPECT_GE(sd, 1.45);
  EXPECT_LE(sd, 1.58);
}

TEST(Channel, NoiseFreeIsDeterministic) {
  const GrayImage img = testsupport::random_image(24, 30, 5);
  ChannelParams p = default_channel_params(24, 30);
  p.noise_sigma = 0.0;
  auto a = make_rng(1), b = make_rng(999);
  EXPECT_EQ(apply_channel(img, p, a), apply_channel(img, p, b));
}

TEST(Channel, SameSeedSameOutput) {
  const GrayImage img = testsupport::random_image(24, 30, 5);
  const ChannelParams p = default_channel_params(24, 30);
  auto a = make_rng(42), b = make_rng(42), c = make_rng(43);
  const GrayImage x = apply_channel(img, p, a);
  EXPECT_EQ(x, apply_channel(img, p, b));
  EXPECT_NE(x, apply_channel(img, p, c));
}

TEST(Channel, BlurSigmaZeroIsIdentity) {
  RealImage img = RealImage::from(testsupport::random_image(9, 7, 2));
  EXPECT_EQ(gaussian_blur(img, 0.0).values, img.values);
}

TEST(Channel, BlurUniformUnchanged) {
  RealImage img(13, 9, 77.0);
  for (double s : {0.3, 0.9, 2.5}) {
    for (double v : gaussian_blur(img, s).values) EXPECT_NEAR(v, 77.0, 1e-9);
  }
}

TEST(Channel, KernelShape) {
  const auto k = gaussian_kernel(0.9);
  EXPECT_EQ(k.size(), 7u);  // radius ceil(2.7) = 3
  EXPECT_NEAR(std::accumulate(k.begin(), k.end(), 0.0), 1.0, 1e-12);
  for (std::size_t i = 0; i < k.size(); ++i) EXPECT_DOUBLE_EQ(k[i], k[k.size() - 1 - i]);
  EXPECT_EQ(gaussian_kernel(1.0).size(), 7u);
  EXPECT_EQ(gaussian_kernel(1.01).size(), 9u);
}

TEST(Channel, BlurImpulseMatchesDirectConvolution) {
  RealImage img(21, 21, 0.0);
  img(10, 10) = 200.0;
  const RealImage sep = gaussian_blur(img, 0.9);
  const RealImage direct = blur_2d(img, 0.9);
  for (std::size_t i = 0; i < sep.values.size(); ++i) EXPECT_NEAR(sep.values[i], direct.values[i], 1e-9);
  const auto k = gaussian_kernel(0.9);
  EXPECT_NEAR(sep(10, 10), k[3] * k[3] * 200.0, 1e-9);
  EXPECT_NEAR(std::accumulate(sep.values.begin(), sep.values.end(), 0.0), 200.0, 1e-6);
}

TEST(Channel, BlurRandomMatchesDirectConvolutionAtEdges) {
  const RealImage img = RealImage::from(testsupport::random_image(15, 12, 9));
  const RealImage sep = gaussian_blur(img, 1.3);
  const RealImage direct = blur_2d(img, 1.3);
  for (std::size_t i = 0; i < sep.values.size(); ++i) EXPECT_NEAR(sep.values[i], direct.values[i], 1e-9);
}

TEST(Channel, ResponseCurveContinuousAndMonotone) {
  const ResponseCurve c{96.0, 60.0, 0.7, 1.2};
  EXPECT_DOUBLE_EQ(c(96.0), 60.0);
  EXPECT_NEAR(c(96.0 - 1e-9), 60.0, 1e-8);
  EXPECT_NEAR(c(96.0 + 1e-9), 60.0, 1e-8);
  double prev = c(-50.0);
  for (double x = -50.0; x <= 300.0; x += 0.25) {
    EXPECT_GE(c(x), prev);
    prev = c(x);
  }
  const ResponseCurve d = default_response_curve();
  EXPECT_NEAR(d(0.0), 0.0, 1e-9);
  EXPECT_NEAR(d(255.0), 255.0, 1e-9);
  EXPECT_LT(d(48.0), 48.0);  // dark contrast reduced
}

TEST(Channel, ResponseCurveValidation) {
  EXPECT_THROW((ResponseCurve{0.0, 0.0, 1.0, 1.0}.validate()), Error);
  EXPECT_THROW((ResponseCurve{100.0, 0.0, -0.1, 1.0}.validate()), Error);
  EXPECT_NO_THROW(default_response_curve().validate());
}

TEST(Channel, OutputClampedOnExtremeCurve) {
  ChannelParams p = identity_channel_params(8, 8);
  p.response = {128.0, 128.0, 3.0, 3.0};
  auto rng = make_rng(0);
  const GrayImage out = apply_channel(testsupport::random_image(8, 8, 4), p, rng);
  int extremes = 0;
  for (std::size_t i = 0; i < out.size(); ++i) extremes += out[i] == 0 || out[i] == 255;
  EXPECT_GT(extremes, 0);
}

TEST(Channel, OffsetMapIsZeroMean) {
  const OffsetMap m(3, 2, {1, 2, 3, 4, 5, 6});
  EXPECT_NEAR(mean_of(m.values()), 0.0, 1e-12);
  EXPECT_DOUBLE_EQ(m(0, 0), -2.5);
  const OffsetMap s = synthetic_brightening(384, 480, 6.0);
  EXPECT_NEAR(mean_of(s.values()), 0.0, 1e-6);
  EXPECT_NEAR(*std::max_element(s.values().begin(), s.values().end()), 6.0, 1e-9);
  EXPECT_GT(s(192, 240), s(0, 0));
}

TEST(Channel, BrighteningPreservesMeanWithinRounding) {
  ChannelParams p = identity_channel_params(32, 32);
  p.brightening = synthetic_brightening(32, 32, 6.0);
  auto rng = make_rng(0);
  const GrayImage img(32, 32, 100);
  const GrayImage out = apply_channel(img, p, rng);
  double s = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) s += out[i];
  EXPECT_NEAR(s / out.size(), 100.0, 0.5);
}

// ---------------------------------------------------------------- calibration

TEST(Calibration, BrighteningUniformFramesGiveZero) {
  std::vector<GrayImage> frames(5, GrayImage(8, 6, 128));
  const OffsetMap m = estimate_brightening(frames, GrayImage(8, 6, 128));
  for (double v : m.values()) EXPECT_EQ(v, 0.0);
}

TEST(Calibration, BrighteningSinglePixel) {
  std::vector<GrayImage> frames(3, GrayImage(5, 4, 100));
  for (auto& f : frames) f(2, 1) = 110;
  const OffsetMap m = estimate_brightening(frames, GrayImage(5, 4, 100));
  const double p = 20.0;
  EXPECT_NEAR(m(2, 1), 10.0 - 10.0 / p, 1e-12);
  EXPECT_NEAR(m(0, 0), -10.0 / p, 1e-12);
}

TEST(Calibration, BrighteningErrors) {
  try {
    estimate_brightening({}, GrayImage(4, 4));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::empty_input);
  }
  try {
    estimate_brightening({GrayImage(4, 4), GrayImage(5, 4)}, GrayImage(4, 4));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::dimension_mismatch);
  }
  EXPECT_NO_THROW(estimate_brightening({GrayImage(8, 8)}, GrayImage(4, 4)));
  EXPECT_THROW(estimate_brightening({GrayImage(9, 8)}, GrayImage(4, 4)), Error);
}

TEST(Calibration, BrighteningRecovery) {
  const int k = 2, w = 20, h = 16;
  ChannelParams truth = identity_channel_params(w, h, k);
  truth.brightening = synthetic_brightening(k * w, k * h, 6.0);
  truth.noise_sigma = 1.5;
  const GrayImage test(w, h, 128);
  std::vector<GrayImage> frames;
  for (int i = 0; i < 300; ++i) {
    auto rng = make_rng(derive_seed(5, {static_cast<std::uint64_t>(i)}));
    frames.push_back(apply_channel(test, truth, rng));
  }
  const OffsetMap est = estimate_brightening(frames, test);
  double worst = 0.0;
  for (std::size_t i = 0; i < est.values().size(); ++i)
    worst = std::max(worst, std::abs(est.values()[i] - truth.brightening.values()[i]));
  EXPECT_LE(worst, 0.5);
}

TEST(Calibration, NoiseSigmaArithmetic) {
  EXPECT_EQ(fit_noise_sigma(std::vector<GrayImage>(4, GrayImage(3, 3, 50))), 0.0);
  EXPECT_DOUBLE_EQ(fit_noise_sigma({GrayImage(6, 5, 100), GrayImage(6, 5, 102)}), 1.0);
  try {
    fit_noise_sigma({GrayImage(3, 3)});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::too_few_frames);
  }
}

TEST(Calibration, NoiseSigmaRecovery) {
  ChannelParams p = identity_channel_params(100, 100);
  p.noise_sigma = 1.5;
  std::vector<GrayImage> frames;
  for (int i = 0; i < 300; ++i) {
    auto rng = make_rng(derive_seed(17, {static_cast<std::uint64_t>(i)}));
    frames.push_back(apply_channel(GrayImage(100, 100, 128), p, rng));
  }
  // the estimate sees rounded captures: sqrt(1.5^2 + 1/12) = 1.5275
  const double s = fit_noise_sigma(frames);
  EXPECT_NEAR(s, std::sqrt(1.5 * 1.5 + 1.0 / 12.0), 0.02);
}

TEST(Calibration, ResponseIdentityData) {
  std::vector<double> x, y;
  for (int i = 0; i <= 255; i += 5) {
    x.push_back(i);
    y.push_back(i);
  }
  const ResponseCurve c = fit_response_curve(x, y);
  EXPECT_NEAR(c.slope_low, 1.0, 1e-6);
  EXPECT_NEAR(c.slope_high, 1.0, 1e-6);
  EXPECT_NEAR(c(200.0), 200.0, 1e-6);
}

TEST(Calibration, ResponseNoiseFreeRecovery) {
  const ResponseCurve truth{96.0, 60.0, 0.7, 1.2};
  std::vector<double> x, y;
  for (int i = 0; i <= 255; i += 3) {
    x.push_back(i);
    y.push_back(truth(i));
  }
  const ResponseCurve c = fit_response_curve(x, y);
  EXPECT_NEAR(c.knot_x, 96.0, 1e-3);
  EXPECT_NEAR(c.knot_y, 60.0, 1e-3);
  EXPECT_NEAR(c.slope_low, 0.7, 1e-3);
  EXPECT_NEAR(c.slope_high, 1.2, 1e-3);
}

TEST(Calibration, ResponseNoisyRecovery) {
  const ResponseCurve truth{96.0, 60.0, 0.7, 1.2};
  auto rng = make_rng(23);
  GaussianSampler n;
  std::vector<double> x, y;
  for (int i = 0; i < 256; ++i) {
    x.push_back(i);
    y.push_back(truth(i) + n(rng));
  }
  const ResponseCurve c = fit_response_curve(x, y);
  EXPECT_NEAR(c.slope_low, 0.7, 0.05);
  EXPECT_NEAR(c.slope_high, 1.2, 0.05);
}

TEST(Calibration, ResponseDegenerate) {
  try {
    fit_response_curve({10, 10, 10, 10}, {1, 2, 3, 4});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::degenerate_data);
  }
  EXPECT_THROW(fit_response_curve({1, 2, 3}, {1, 2, 3}), Error);
  EXPECT_THROW(fit_response_curve({1, 2, 3, 4}, {1, 2, 3}), Error);
}

TEST(Calibration, ResponseSlopesNeverNegative) {
  std::vector<double> x, y;
  for (int i = 0; i < 256; i += 4) {
    x.push_back(i);
    y.push_back(i < 128 ? 200.0 - i : 72.0 + 0.5 * (i - 128));
  }
  const ResponseCurve c = fit_response_curve(x, y);
  EXPECT_GE(c.slope_low, 0.0);
  EXPECT_GE(c.slope_high, 0.0);
}

TEST(Calibration, BarChartLayout) {
  const GrayImage b = bar_chart(20, 3);
  // 1 dark, 1 light, 2 dark, 2 light, 3 dark, 3 light, 4 dark, 4 light
  const std::string expect = "dLddLLdddLLLddddLLLL";
  for (int x = 0; x < 20; ++x) EXPECT_EQ(b(x, 1), expect[x] == 'd' ? 0 : 255) << x;
}

TEST(Calibration, BlurIdentityCapture) {
  const GrayImage test = bar_chart(40, 8);
  EXPECT_EQ(fit_blur_sigma(test, upscale_replicate(test, 4)), 0.0);
}

TEST(Calibration, BlurRecovery) {
  const GrayImage test = bar_chart(40, 8);
  for (double sigma : {0.9, 2.0}) {
    ChannelParams p = identity_channel_params(40, 8, 4);
    p.blur_sigma = sigma;
    p.noise_sigma = 1.5;
    auto rng = make_rng(3);
    EXPECT_NEAR(fit_blur_sigma(test, apply_channel(test, p, rng)), sigma, 0.05 + 1e-9);
  }
  EXPECT_THROW(fit_blur_sigma(test, GrayImage(41, 8)), Error);
}

// ---------------------------------------------------------------- key = value

TEST(KeyValues, ParseAndTypes) {
  const auto kv = KeyValues::parse("# comment\n a = 1.5 \nb=7\n\nname = hello world # trailing\n");
  EXPECT_DOUBLE_EQ(kv.get("a", 0.0), 1.5);
  EXPECT_EQ(kv.get("b", 0), 7);
  EXPECT_EQ(kv.get("name", std::string()), "hello world");
  EXPECT_EQ(kv.get("missing", 3), 3);
  EXPECT_THROW(kv.get("name", 0.0), Error);
}

TEST(KeyValues, Errors) {
  EXPECT_THROW(KeyValues::parse("a = 1\na = 2\n"), Error);
  EXPECT_THROW(KeyValues::parse("just text\n"), Error);
  EXPECT_THROW(KeyValues::parse(" = 3\n"), Error);
  try {
    KeyValues::load("/nonexistent/x.cfg");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::file_not_found);
  }
}

TEST(KeyValues, DoubleRoundTrip) {
  KeyValues kv;
  for (double v : {0.1, 1.0 / 3.0, 175.0 / 159.0, -2.5e-7, 6.0}) {
    kv.set("v", v);
    EXPECT_EQ(KeyValues::parse(kv.str()).get("v", 0.0), v);
  }
}

// ---------------------------------------------------------------- channel config

TEST(ChannelConfig, DefaultsResolveToReferenceChannel) {
  const ChannelConfig c = ChannelConfig::from_keys(KeyValues{});
  const ChannelParams p = c.resolve(96, 120);
  const ChannelParams d = default_channel_params(96, 120);
  EXPECT_EQ(p.upscale_k, 4);
  EXPECT_EQ(p.blur_sigma, 0.9);
  EXPECT_EQ(p.noise_sigma, 1.5);
  EXPECT_EQ(p.response, d.response);
  EXPECT_EQ(p.brightening.values(), d.brightening.values());
}

TEST(ChannelConfig, ShippedDefaultFileMatchesBuiltIns) {
  const auto path = std::filesystem::path(VJSPOOF_SOURCE_DIR) / "data" / "channel_default.cfg";
  const ChannelParams p = load_channel_config(path).resolve(96, 120);
  const ChannelParams d = default_channel_params(96, 120);
  EXPECT_EQ(p.upscale_k, d.upscale_k);
  EXPECT_EQ(p.blur_sigma, d.blur_sigma);
  EXPECT_EQ(p.noise_sigma, d.noise_sigma);
  EXPECT_EQ(p.response, d.response);
  EXPECT_EQ(p.brightening.values(), d.brightening.values());
}

TEST(ChannelConfig, PrefixedKeys) {
  const auto kv = KeyValues::parse("channel_b.noise_sigma = 2.5\nchannel_b.blur_sigma = 1.2\nnoise_sigma = 0.5\n");
  EXPECT_EQ(ChannelConfig::from_keys(kv, "channel_b.").noise_sigma, 2.5);
  EXPECT_EQ(ChannelConfig::from_keys(kv, "channel_b.").blur_sigma, 1.2);
  EXPECT_EQ(ChannelConfig::from_keys(kv).noise_sigma, 0.5);
}

TEST(ChannelConfig, InvalidValues) {
  EXPECT_THROW(ChannelConfig::from_keys(KeyValues::parse("upscale_k = 0\n")), Error);
  EXPECT_THROW(ChannelConfig::from_keys(KeyValues::parse("noise_sigma = -1\n")), Error);
  EXPECT_THROW(ChannelConfig::from_keys(KeyValues::parse("response_slope_low = -0.5\n")), Error);
}

TEST(ChannelConfig, SidecarRoundTrip) {
  testsupport::TempDir dir("chcfg");
  ChannelParams p = default_channel_params(12, 10);
  p.blur_sigma = 1.1;
  p.response = {100.0, 90.0, 0.9, 1.05};
  save_channel_params(p, dir.path / "cal.cfg");
  ASSERT_TRUE(std::filesystem::exists(dir.path / "cal_brightening.pgm"));
  const ChannelParams q = load_channel_config(dir.path / "cal.cfg").resolve(12, 10);
  EXPECT_EQ(q.blur_sigma, 1.1);
  EXPECT_EQ(q.response, p.response);
  // 8-bit quantization of the map: half a step of max_abs / 127, plus re-centering
  const double step = p.brightening.max_abs() / 127.0;
  for (std::size_t i = 0; i < q.brightening.values().size(); ++i)
    EXPECT_NEAR(q.brightening.values()[i], p.brightening.values()[i], step);
  EXPECT_THROW(load_channel_config(dir.path / "cal.cfg").resolve(13, 10), Error);
}
