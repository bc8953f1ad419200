#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "emgesture/config.hpp"
#include "emgesture/denoise.hpp"
#include "test_util.hpp"

using namespace emg;

namespace {

ModeSet fake_modes(std::vector<double> omegas, std::size_t len = 8) {
  ModeSet m;
  m.center_freqs = std::move(omegas);
  m.modes.assign(m.center_freqs.size(), std::vector<double>(len, 1.0));
  return m;
}

AveragePowerSpectrum aps_of(std::vector<double> p, double bin = 100.0) {
  return AveragePowerSpectrum{std::move(p), bin, 50, SpectrumSource::gesture, "x"};
}

// Smooth, strictly positive spectrum: a floor with four Lorentzian bumps.
std::vector<double> smooth_spectrum(std::size_t n = 1024) {
  std::vector<double> x(n, 1.0);
  for (double c : {150.0, 350.0, 600.0, 850.0})
    for (std::size_t i = 0; i < n; ++i) x[i] += 8.0 / (1.0 + std::pow((static_cast<double>(i) - c) / 12.0, 2));
  return x;
}

// Averaged periodogram of complex white noise: each bin is a mean of M
// exponential draws with the given mean.
std::vector<double> noisy_floor(const std::vector<double>& mean, int m, std::mt19937_64& rng) {
  std::vector<double> out(mean.size());
  std::exponential_distribution<double> e(1.0);
  for (std::size_t i = 0; i < mean.size(); ++i) {
    double s = 0;
    for (int j = 0; j < m; ++j) s += e(rng);
    out[i] = mean[i] * s / m;
  }
  return out;
}

}  // namespace

TEST(PairModes, IdenticalSetsPairOneToOne) {
  const auto a = fake_modes({0.1, 0.2, 0.3});
  const auto p = pair_modes(a, a);
  ASSERT_EQ(p.pairs.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(p.pairs[i].gesture_mode, i);
    EXPECT_EQ(p.pairs[i].noise_mode, i);
    EXPECT_EQ(p.pairs[i].delta, 0.0);
  }
  EXPECT_TRUE(p.unmatched_gesture_modes.empty());
}

TEST(PairModes, CrossedCentres) {
  const auto p = pair_modes(fake_modes({0.1, 0.3}), fake_modes({0.29, 0.11}));
  ASSERT_EQ(p.pairs.size(), 2u);
  EXPECT_EQ(p.pairs[0].noise_mode, 1u);
  EXPECT_EQ(p.pairs[1].noise_mode, 0u);
}

TEST(PairModes, ThresholdLeavesModeUnmatched) {
  auto g = fake_modes({0.1, 0.4});
  auto n = fake_modes({0.1});
  const auto p = pair_modes(g, n, 0.05);
  ASSERT_EQ(p.pairs.size(), 1u);
  EXPECT_EQ(p.pairs[0].gesture_mode, 0u);
  EXPECT_EQ(p.unmatched_gesture_modes, std::vector<std::size_t>{1});
}

TEST(PairModes, EachNoiseModeUsedOnce) {
  const auto p = pair_modes(fake_modes({0.10, 0.11, 0.12}), fake_modes({0.105}), 0.05);
  EXPECT_EQ(p.pairs.size(), 1u);
  EXPECT_EQ(p.unmatched_gesture_modes.size(), 2u);
}

TEST(PairModes, ConfigMismatchIsAnError) {
  auto g = fake_modes({0.1});
  auto n = fake_modes({0.1});
  n.config.alpha = 500;
  EXPECT_ERROR_CODE(pair_modes(g, n), "config_mismatch");
}

TEST(SpectralSubtract, Examples) {
  const std::vector<double> a{5, 1}, b{2, 3};
  EXPECT_EQ(spectral_subtract(a, b), (std::vector<double>{3, 0}));
  EXPECT_EQ(spectral_subtract(a, a), (std::vector<double>{0, 0}));
  EXPECT_ERROR_CODE(spectral_subtract(a, std::vector<double>{1}), "dimension_mismatch");
}

TEST(SpectralSubtract, RecoversCleanSpectrumFromRealNoise) {
  // Time-domain tones plus complex white noise, averaged over 50 windows; the
  // profile comes from an independent noise take.
  const std::size_t n = 256, m = 50;
  const double sigma = 0.2;
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, sigma);
  auto aps = [&](bool tones, bool noise) {
    std::vector<double> acc(n, 0.0);
    for (std::size_t w = 0; w < m; ++w) {
      std::vector<cplx> x(n);
      for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i);
        if (tones)
          x[i] += std::polar(1.0, 2 * std::numbers::pi * 20 * t / n) + std::polar(0.5, 2 * std::numbers::pi * 70 * t / n);
        if (noise) x[i] += cplx{g(rng), g(rng)};
      }
      const auto X = fft(x);
      for (std::size_t k = 0; k < n; ++k) acc[k] += std::norm(X.bins[k]) / m;
    }
    return acc;
  };
  const auto clean = aps(true, false);
  const auto noisy = aps(true, true);
  const auto profile = aps(false, true);
  const double noise_var = 2 * sigma * sigma * n;  // E|N_k|^2
  const auto est = spectral_subtract(noisy, profile);
  int checked = 0;
  for (std::size_t k = 0; k < n; ++k) {
    if (clean[k] <= 10 * noise_var) continue;
    EXPECT_NEAR(est[k] / clean[k], 1.0, 0.10) << "bin " << k;
    ++checked;
  }
  EXPECT_EQ(checked, 2);
}

TEST(DenoiseAps, SelfSubtractionVanishes) {
  std::mt19937_64 rng(1);
  const auto x = aps_of(noisy_floor(smooth_spectrum(), 50, rng));
  for (const VmdConfig& vc : {VmdConfig{}, reference_scenario().denoise.vmd}) {
    const auto out = denoise_aps(x, make_noise_profile(x, vc), vc);
    EXPECT_LT(l2(out.power), 0.05 * l2(x.power));
    EXPECT_EQ(out.source, SpectrumSource::denoised);
  }
}

TEST(DenoiseAps, ZeroProfileLeavesOnlyReconstructionResidual) {
  const auto x = aps_of(smooth_spectrum());
  auto zero = x;
  std::fill(zero.power.begin(), zero.power.end(), 0.0);
  const VmdConfig vc;
  const auto r = denoise_aps_detailed(x, make_noise_profile(zero, vc), vc);
  auto recon = reconstruct(r.gesture_modes);
  for (auto& v : recon) v = std::max(v, 0.0);
  EXPECT_LT(rel_l2(r.aps.power, recon), 1e-12);
  EXPECT_LT(rel_l2(r.aps.power, x.power), 0.05);
}

TEST(DenoiseAps, OutputNonNegative) {
  std::mt19937_64 rng(2);
  const auto mean = smooth_spectrum();
  const auto g = aps_of(noisy_floor(mean, 5, rng));
  const auto n = aps_of(noisy_floor(std::vector<double>(mean.size(), 3.0), 5, rng));
  for (int k : {1, 3, 5}) {
    VmdConfig vc;
    vc.k_modes = k;
    vc.max_iter = 100;
    for (double v : denoise_aps(g, make_noise_profile(n, vc), vc).power) EXPECT_GE(v, 0.0);
  }
}

TEST(DenoiseAps, MonotoneInNoiseScale) {
  std::mt19937_64 rng(4);
  const auto mean = smooth_spectrum();
  const auto g = aps_of(noisy_floor(mean, 50, rng));
  const auto n = aps_of(noisy_floor(std::vector<double>(mean.size(), 1.0), 50, rng));
  const VmdConfig vc;
  const auto profile = make_noise_profile(n, vc);
  const auto gm = vmd_decompose(g.power, vc);
  const auto pairing = pair_modes(gm, profile.mode_set);
  ASSERT_FALSE(pairing.pairs.empty());
  std::vector<double> prev = subtract_modes(gm, profile.mode_set, pairing, 0.0);
  for (double s : {0.25, 0.5, 0.75, 1.0}) {
    const auto cur = subtract_modes(gm, profile.mode_set, pairing, s);
    for (std::size_t i = 0; i < cur.size(); ++i) ASSERT_LE(cur[i], prev[i]) << "s=" << s << " bin " << i;
    prev = cur;
  }
}

TEST(DenoiseAps, DeepensAttenuatedBandUnderBroadbandNoise) {
  // Band of carrier power with a 0.4-amplitude (0.16 power) dip, buried in a
  // white floor as strong as the band itself.
  const std::size_t n = 1024;
  std::vector<double> clean(n, 0.0);
  for (std::size_t i = 200; i < 800; ++i) clean[i] = (i >= 450 && i < 550) ? 0.16 : 1.0;
  std::vector<double> floor(n, 1.0);
  std::mt19937_64 rng(12);
  std::vector<double> mean(n);
  for (std::size_t i = 0; i < n; ++i) mean[i] = clean[i] + floor[i];
  const auto gesture = aps_of(noisy_floor(mean, 50, rng));
  // Profile averaged over many noise segments, as in the pipeline.
  std::vector<double> profile_power(n, 0.0);
  for (int r = 0; r < 40; ++r) {
    const auto one = noisy_floor(floor, 50, rng);
    for (std::size_t i = 0; i < n; ++i) profile_power[i] += one[i] / 40;
  }
  const VmdConfig vc = reference_scenario().denoise.vmd;
  const auto out = denoise_aps(gesture, make_noise_profile(aps_of(profile_power), vc), vc);

  auto contrast = [&](const std::vector<double>& p) {
    double in = 0, outside = 0;
    for (std::size_t i = 460; i < 540; ++i) in += p[i] / 80;
    for (std::size_t i = 250; i < 400; ++i) outside += p[i] / 300;
    for (std::size_t i = 600; i < 750; ++i) outside += p[i] / 300;
    return in / outside;
  };
  const double raw = contrast(gesture.power), den = contrast(out.power);
  EXPECT_GE(raw / den, 2.0) << "raw " << raw << " denoised " << den;
}

TEST(DenoiseAps, GeometryMismatch) {
  const VmdConfig vc;
  const auto a = aps_of(std::vector<double>(64, 1.0));
  EXPECT_ERROR_CODE(denoise_aps(a, make_noise_profile(aps_of(std::vector<double>(32, 1.0)), vc), vc),
                    "dimension_mismatch");
  EXPECT_ERROR_CODE(denoise_aps(a, make_noise_profile(aps_of(std::vector<double>(64, 1.0), 50.0), vc), vc),
                    "dimension_mismatch");
  EXPECT_ERROR_CODE(denoise_whole_spectrum(a, aps_of(std::vector<double>(32, 1.0))), "dimension_mismatch");
}

TEST(DenoiseWhole, SubtractsAndTags) {
  const auto out = denoise_whole_spectrum(aps_of({5, 1, 2}), aps_of({2, 3, 2}));
  EXPECT_EQ(out.power, (std::vector<double>{3, 0, 0}));
  EXPECT_EQ(out.source, SpectrumSource::denoised);
  EXPECT_EQ(out.label, std::optional<std::string>("x"));
}
