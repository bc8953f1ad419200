#pragma once

// Mode-wise spectral subtraction of an ambient-noise profile from a gesture
// spectrum. Both spectra are decomposed with the same VMD settings, gesture
// modes are paired with the nearest-centre noise mode, and each pair is
// spectrally subtracted in power units. The per-mode results are summed and
// floored at zero.

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "emgesture/error.hpp"
#include "emgesture/spectrum.hpp"
#include "emgesture/vmd.hpp"

namespace emg {

struct NoiseProfile {
  AveragePowerSpectrum aps;
  ModeSet mode_set;
  VmdConfig vmd_config;
};

inline NoiseProfile make_noise_profile(AveragePowerSpectrum noise_aps, const VmdConfig& cfg) {
  noise_aps.source = SpectrumSource::noise;
  ModeSet modes = vmd_decompose(noise_aps.power, cfg);
  return NoiseProfile{std::move(noise_aps), std::move(modes), cfg};
}

struct ModePair {
  std::size_t gesture_mode = 0;
  std::size_t noise_mode = 0;
  double delta = 0.0;  // |w_gesture - w_noise|
};

struct ModePairing {
  std::vector<ModePair> pairs;  // ordered by gesture mode index
  std::vector<std::size_t> unmatched_gesture_modes;
};

inline constexpr double kDefaultPairingThreshold = 0.05;

/// Greedy matching by ascending |dw|: each noise mode is used at most once and
/// candidate pairs farther apart than `threshold` are dropped.
inline ModePairing pair_modes(const ModeSet& gesture, const ModeSet& noise,
                              double threshold = kDefaultPairingThreshold) {
  require(gesture.config.same_decomposition(noise.config), ErrorKind::data, "config_mismatch",
          "gesture and noise modes were produced with different VMD parameters");
  require(gesture.k() == gesture.center_freqs.size() && noise.k() == noise.center_freqs.size(), ErrorKind::data,
          "bad_modes", "mode set is inconsistent");

  std::vector<ModePair> candidates;
  for (std::size_t g = 0; g < gesture.center_freqs.size(); ++g)
    for (std::size_t n = 0; n < noise.center_freqs.size(); ++n)
      candidates.push_back({g, n, std::abs(gesture.center_freqs[g] - noise.center_freqs[n])});
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const ModePair& a, const ModePair& b) { return a.delta < b.delta; });

  std::vector<bool> gesture_used(gesture.k(), false), noise_used(noise.k(), false);
  ModePairing out;
  for (const auto& c : candidates) {
    if (c.delta > threshold) break;
    if (gesture_used[c.gesture_mode] || noise_used[c.noise_mode]) continue;
    gesture_used[c.gesture_mode] = noise_used[c.noise_mode] = true;
    out.pairs.push_back(c);
  }
  std::sort(out.pairs.begin(), out.pairs.end(),
            [](const ModePair& a, const ModePair& b) { return a.gesture_mode < b.gesture_mode; });
  for (std::size_t g = 0; g < gesture.k(); ++g)
    if (!gesture_used[g]) out.unmatched_gesture_modes.push_back(g);
  return out;
}

/// out[k] = max(a[k] - b[k], 0)
inline std::vector<double> spectral_subtract(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size(), ErrorKind::data, "dimension_mismatch", "spectral_subtract: length mismatch");
  std::vector<double> out(a.size());
  for (std::size_t k = 0; k < a.size(); ++k) out[k] = std::max(a[k] - b[k], 0.0);
  return out;
}

namespace detail {

inline void check_geometry(const AveragePowerSpectrum& gesture, const AveragePowerSpectrum& noise) {
  require(gesture.size() == noise.size(), ErrorKind::data, "dimension_mismatch",
          "gesture and noise spectra differ in length (" + std::to_string(gesture.size()) + " vs " +
              std::to_string(noise.size()) + ")");
  require(std::abs(gesture.bin_width_hz - noise.bin_width_hz) <= 1e-9 * std::abs(noise.bin_width_hz),
          ErrorKind::data, "dimension_mismatch", "gesture and noise spectra differ in bin width");
}

}  // namespace detail

/// Mode-level subtraction given an already decomposed gesture spectrum.
/// A paired mode loses the positive part of its noise mode, but never more
/// than its own positive part: g_k - min(s n_k+, g_k+). Where g_k >= 0 this is
/// max(g_k+ - s n_k+, 0); where g_k < 0 the mode is left alone so the
/// oscillation of a band-pass mode still cancels in the sum. Unmatched modes
/// pass through. The sum is floored at zero. `noise_scale` (s) is 1 for
/// ordinary use.
inline std::vector<double> subtract_modes(const ModeSet& gesture, const ModeSet& noise, const ModePairing& pairing,
                                          double noise_scale = 1.0) {
  require(gesture.length() == noise.length(), ErrorKind::data, "dimension_mismatch",
          "gesture and noise modes differ in length");
  std::vector<const std::vector<double>*> partner(gesture.k(), nullptr);
  for (const auto& p : pairing.pairs) partner[p.gesture_mode] = &noise.modes[p.noise_mode];
  std::vector<double> out(gesture.length(), 0.0);
  for (std::size_t k = 0; k < gesture.k(); ++k) {
    const auto& g = gesture.modes[k];
    if (partner[k] == nullptr) {
      for (std::size_t i = 0; i < out.size(); ++i) out[i] += g[i];
    } else {
      const auto& n = *partner[k];
      for (std::size_t i = 0; i < out.size(); ++i)
        out[i] += g[i] - std::min(noise_scale * std::max(n[i], 0.0), std::max(g[i], 0.0));
    }
  }
  for (auto& v : out) v = std::max(v, 0.0);
  return out;
}

struct DenoiseResult {
  AveragePowerSpectrum aps;
  ModeSet gesture_modes;
  ModePairing pairing;
};

inline DenoiseResult denoise_aps_detailed(const AveragePowerSpectrum& gesture_aps, const NoiseProfile& profile,
                                          const VmdConfig& cfg, double pairing_threshold = kDefaultPairingThreshold) {
  detail::check_geometry(gesture_aps, profile.aps);
  ModeSet gesture_modes = vmd_decompose(gesture_aps.power, cfg);
  ModePairing pairing = pair_modes(gesture_modes, profile.mode_set, pairing_threshold);
  AveragePowerSpectrum out = gesture_aps;
  out.power = subtract_modes(gesture_modes, profile.mode_set, pairing);
  out.source = SpectrumSource::denoised;
  return DenoiseResult{std::move(out), std::move(gesture_modes), std::move(pairing)};
}

inline AveragePowerSpectrum denoise_aps(const AveragePowerSpectrum& gesture_aps, const NoiseProfile& profile,
                                        const VmdConfig& cfg, double pairing_threshold = kDefaultPairingThreshold) {
  return denoise_aps_detailed(gesture_aps, profile, cfg, pairing_threshold).aps;
}

/// Plain whole-spectrum subtraction, no decomposition.
inline AveragePowerSpectrum denoise_whole_spectrum(const AveragePowerSpectrum& gesture_aps,
                                                   const AveragePowerSpectrum& noise_aps) {
  detail::check_geometry(gesture_aps, noise_aps);
  AveragePowerSpectrum out = gesture_aps;
  out.power = spectral_subtract(gesture_aps.power, noise_aps.power);
  out.source = SpectrumSource::denoised;
  return out;
}

}  // namespace emg
