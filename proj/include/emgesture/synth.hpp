#pragma once

// Synthetic charger-field recordings.
//
// A recording is a sum of complex carrier tones, each with a slow random phase
// walk that spreads it into a narrow band, plus ambient interference lines and
// complex Gaussian noise. Gestures scale each carrier band by a fixed factor;
// the distance between antenna and charger applies skin-depth decay. All
// generators are pure functions of (config, profile, duration).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "emgesture/error.hpp"
#include "emgesture/signal_io.hpp"
#include "emgesture/spectrum.hpp"

namespace emg {

inline constexpr double kVacuumPermeability = 4.0e-7 * std::numbers::pi;

/// Good-conductor skin depth sqrt(2 / (mu0 sigma omega)).
inline double skin_depth(double conductivity_s_per_m, double frequency_hz) {
  require(conductivity_s_per_m > 0 && frequency_hz > 0, ErrorKind::data, "bad_argument",
          "skin depth needs positive conductivity and frequency");
  const double omega = 2.0 * std::numbers::pi * frequency_hz;
  return std::sqrt(2.0 / (kVacuumPermeability * conductivity_s_per_m * omega));
}

inline double distance_attenuation(double amplitude, double distance_m, double skin_depth_m) {
  require(distance_m >= 0 && skin_depth_m > 0, ErrorKind::data, "bad_argument",
          "distance must be non-negative and skin depth positive");
  return amplitude * std::exp(-distance_m / skin_depth_m);
}

struct CarrierBand {
  double center_hz = 0.0;
  double amplitude = 0.0;
  double bandwidth_hz = 0.0;
};

/// Ambient interference present whether or not the charger is active.
/// `fluctuation` is the relative std of its amplitude from one jitter interval to the next.
struct AmbientLine {
  double center_hz = 0.0;
  double amplitude = 0.0;
  double bandwidth_hz = 0.0;
  double fluctuation = 0.0;
};

struct SynthConfig {
  double sample_rate_hz = 409600.0;
  std::vector<CarrierBand> carrier_bands;
  std::vector<AmbientLine> ambient_lines;
  double noise_std = 0.0;  // per component of the complex Gaussian noise
  double distance_m = 0.05;
  double conductivity_s_per_m = 0.5;
  double jitter_interval_s = 0.5;  // carrier gains and line levels are redrawn this often
  std::uint64_t seed = 1;

  void validate() const {
    require(sample_rate_hz > 0, ErrorKind::usage, "bad_config", "sample rate must be positive");
    const double nyquist = sample_rate_hz / 2.0;
    for (const auto& b : carrier_bands) {
      require(b.center_hz > 0 && b.center_hz < nyquist, ErrorKind::usage, "nyquist",
              "carrier at " + std::to_string(b.center_hz) + " Hz is outside (0, fs/2)");
      require(b.amplitude >= 0 && b.bandwidth_hz >= 0, ErrorKind::usage, "bad_config",
              "carrier amplitude and bandwidth must be non-negative");
    }
    for (const auto& l : ambient_lines) {
      require(std::abs(l.center_hz) < nyquist, ErrorKind::usage, "nyquist",
              "ambient line at " + std::to_string(l.center_hz) + " Hz violates Nyquist");
      require(l.amplitude >= 0 && l.bandwidth_hz >= 0 && l.fluctuation >= 0, ErrorKind::usage, "bad_config",
              "ambient line parameters must be non-negative");
    }
    require(noise_std >= 0, ErrorKind::usage, "bad_config", "noise_std must be non-negative");
    require(distance_m >= 0, ErrorKind::usage, "bad_config", "distance must be non-negative");
    require(conductivity_s_per_m > 0, ErrorKind::usage, "bad_config", "conductivity must be positive");
    require(jitter_interval_s > 0, ErrorKind::usage, "bad_config", "jitter interval must be positive");
  }
};

struct GestureProfile {
  std::string name;
  std::vector<double> band_attenuation;
  double jitter_std = 0.05;
};

struct ModulationSpec {
  double f_mod_hz = 7000.0;
  double duty = 0.5;
  double depth = 0.5;
};

inline const std::vector<std::string>& gesture_class_names() {
  static const std::vector<std::string> names = {"no-gesture",     "gesture-1",  "gesture-2",
                                                 "gesture-3",      "gesture-4",  "hand-spreading",
                                                 "gesture-ok",     "gesture-8",  "fist"};
  return names;
}

/// Profiles for the four-band reference charger. Any two differ by at least
/// 0.3 in at least two bands.
inline std::vector<GestureProfile> default_gesture_profiles() {
  const std::vector<std::vector<double>> factors = {
      {1.0, 1.0, 1.0, 1.0}, {0.7, 0.7, 1.0, 1.0}, {1.0, 0.7, 0.7, 1.0},
      {1.0, 1.0, 0.7, 0.7}, {0.7, 1.0, 1.0, 0.7}, {0.7, 0.4, 0.7, 1.0},
      {0.4, 0.7, 1.0, 0.7}, {1.0, 0.7, 0.4, 0.7}, {0.4, 0.4, 0.4, 0.4},
  };
  std::vector<GestureProfile> out;
  for (std::size_t i = 0; i < factors.size(); ++i) out.push_back({gesture_class_names()[i], factors[i], 0.05});
  return out;
}

/// Every pair of profiles must differ by >= min_delta in >= min_bands band factors.
inline void check_profile_separability(std::span<const GestureProfile> profiles, double min_delta = 0.15,
                                       std::size_t min_bands = 2) {
  for (const auto& p : profiles) {
    for (double a : p.band_attenuation)
      require(a >= 0.0 && a <= 1.0, ErrorKind::usage, "bad_profile",
              "profile '" + p.name + "' has an attenuation factor outside [0, 1]");
    if (p.name == "no-gesture")
      for (double a : p.band_attenuation)
        require(a == 1.0, ErrorKind::usage, "bad_profile", "the no-gesture profile must not attenuate any band");
  }
  for (std::size_t i = 0; i < profiles.size(); ++i) {
    for (std::size_t j = i + 1; j < profiles.size(); ++j) {
      const auto& a = profiles[i].band_attenuation;
      const auto& b = profiles[j].band_attenuation;
      require(a.size() == b.size(), ErrorKind::usage, "bad_profile", "profiles disagree on the number of bands");
      std::size_t differing = 0;
      for (std::size_t k = 0; k < a.size(); ++k)
        if (std::abs(a[k] - b[k]) >= min_delta - 1e-12) ++differing;
      require(differing >= min_bands, ErrorKind::usage, "not_separable",
              "profiles '" + profiles[i].name + "' and '" + profiles[j].name + "' are too similar");
    }
  }
}

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

enum class Stream : std::uint64_t { noise = 1, carriers = 2, ambient = 3 };

inline std::mt19937_64 make_stream(std::uint64_t seed, Stream stream) {
  return std::mt19937_64(splitmix64(seed * 4 + static_cast<std::uint64_t>(stream)));
}

// Phase-walk oscillator: complex rotator whose increment gets a random offset
// once per block, giving a Lorentzian line of the requested width.
struct WalkingTone {
  cplx phasor{1.0, 0.0};
  double base_step = 0.0;   // 2 pi f / fs
  double walk_sigma = 0.0;  // std of the phase walk accumulated over one block
  cplx rotator{1.0, 0.0};

  void start_block(std::mt19937_64& rng, std::normal_distribution<double>& normal, std::size_t block) {
    const double extra = walk_sigma > 0 ? walk_sigma * normal(rng) : 0.0;
    rotator = std::polar(1.0, base_step + extra / static_cast<double>(block));
    phasor /= std::abs(phasor);
  }
};

inline WalkingTone make_tone(double center_hz, double bandwidth_hz, double fs, std::size_t block,
                             std::mt19937_64& rng) {
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  WalkingTone t;
  t.phasor = std::polar(1.0, phase(rng));
  t.base_step = 2.0 * std::numbers::pi * center_hz / fs;
  // Per-sample phase variance 2 pi B / fs yields a Lorentzian of FWHM B.
  t.walk_sigma = std::sqrt(2.0 * std::numbers::pi * bandwidth_hz / fs * static_cast<double>(block));
  return t;
}

struct GenerateRequest {
  const SynthConfig* cfg = nullptr;
  std::vector<double> band_gain;  // gesture attenuation per band; empty = carriers off
  double jitter_std = 0.0;
  std::optional<ModulationSpec> modulation;
  double duration_s = 0.0;
};

inline IQRecording generate(const GenerateRequest& req) {
  const SynthConfig& cfg = *req.cfg;
  cfg.validate();
  require(req.duration_s > 0, ErrorKind::usage, "bad_argument", "duration must be positive");
  const double fs = cfg.sample_rate_hz;
  const std::size_t n = seconds_to_samples(req.duration_s, fs);
  require(n > 0, ErrorKind::usage, "bad_argument", "duration shorter than one sample");
  const bool carriers_on = !req.band_gain.empty();
  if (carriers_on)
    require(req.band_gain.size() == cfg.carrier_bands.size(), ErrorKind::usage, "bad_profile",
            "profile has " + std::to_string(req.band_gain.size()) + " band factors but the config has " +
                std::to_string(cfg.carrier_bands.size()) + " carrier bands");
  if (req.modulation) {
    require(req.modulation->f_mod_hz > 0 && req.modulation->f_mod_hz < fs / 2, ErrorKind::usage, "nyquist",
            "modulation frequency must lie in (0, fs/2)");
    require(req.modulation->duty > 0 && req.modulation->duty < 1, ErrorKind::usage, "bad_argument",
            "duty must lie in (0, 1)");
    require(req.modulation->depth >= 0 && req.modulation->depth <= 1, ErrorKind::usage, "bad_argument",
            "depth must lie in [0, 1]");
  }

  constexpr std::size_t kBlock = 16;
  const std::size_t interval = std::max<std::size_t>(1, seconds_to_samples(cfg.jitter_interval_s, fs));

  auto noise_rng = make_stream(cfg.seed, Stream::noise);
  auto carrier_rng = make_stream(cfg.seed, Stream::carriers);
  auto ambient_rng = make_stream(cfg.seed, Stream::ambient);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::normal_distribution<double> carrier_normal(0.0, 1.0);
  std::normal_distribution<double> ambient_normal(0.0, 1.0);

  std::vector<WalkingTone> carriers;
  std::vector<double> carrier_amp;
  for (std::size_t b = 0; b < cfg.carrier_bands.size(); ++b) {
    const auto& band = cfg.carrier_bands[b];
    carriers.push_back(make_tone(band.center_hz, band.bandwidth_hz, fs, kBlock, carrier_rng));
    const double decay =
        distance_attenuation(1.0, cfg.distance_m, skin_depth(cfg.conductivity_s_per_m, band.center_hz));
    carrier_amp.push_back(carriers_on ? band.amplitude * req.band_gain[b] * decay : 0.0);
  }
  std::vector<WalkingTone> lines;
  for (const auto& l : cfg.ambient_lines) lines.push_back(make_tone(l.center_hz, l.bandwidth_hz, fs, kBlock, ambient_rng));

  std::vector<double> carrier_level(carriers.size()), line_level(lines.size());
  std::vector<cplx> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (i % interval == 0) {
      for (std::size_t b = 0; b < carriers.size(); ++b)
        carrier_level[b] = carrier_amp[b] * std::max(0.0, 1.0 + req.jitter_std * carrier_normal(carrier_rng));
      for (std::size_t l = 0; l < lines.size(); ++l)
        line_level[l] = cfg.ambient_lines[l].amplitude *
                        std::max(0.0, 1.0 + cfg.ambient_lines[l].fluctuation * ambient_normal(ambient_rng));
    }
    if (i % kBlock == 0) {
      for (auto& t : carriers) t.start_block(carrier_rng, carrier_normal, kBlock);
      for (auto& t : lines) t.start_block(ambient_rng, ambient_normal, kBlock);
    }
    double envelope = 1.0;
    if (req.modulation) {
      const double cycles = static_cast<double>(i) * req.modulation->f_mod_hz / fs;
      if (cycles - std::floor(cycles) >= req.modulation->duty) envelope = 1.0 - req.modulation->depth;
    }
    cplx carrier_sum{};
    for (std::size_t b = 0; b < carriers.size(); ++b) {
      carrier_sum += carrier_level[b] * carriers[b].phasor;
      carriers[b].phasor *= carriers[b].rotator;
    }
    cplx v = envelope * carrier_sum;
    for (std::size_t l = 0; l < lines.size(); ++l) {
      v += line_level[l] * lines[l].phasor;
      lines[l].phasor *= lines[l].rotator;
    }
    const double re = normal(noise_rng);
    const double im = normal(noise_rng);
    out[i] = v + cfg.noise_std * cplx(re, im);
  }
  return IQRecording(std::move(out), fs, Origin::synthetic);
}

}  // namespace detail

inline IQRecording synth_recording(const SynthConfig& cfg, const GestureProfile& profile, double duration_s) {
  return detail::generate({&cfg, profile.band_attenuation, profile.jitter_std, std::nullopt, duration_s});
}

/// Charger disconnected: only ambient lines and Gaussian noise remain.
inline IQRecording synth_noise(const SynthConfig& cfg, double duration_s) {
  return detail::generate({&cfg, {}, 0.0, std::nullopt, duration_s});
}

/// Unattenuated carriers gated by a square wave in {1 - depth, 1} at f_mod.
inline IQRecording synth_modulated(const SynthConfig& cfg, const ModulationSpec& mod, double duration_s,
                                   double jitter_std = 0.0) {
  std::vector<double> unity(cfg.carrier_bands.size(), 1.0);
  return detail::generate({&cfg, unity, jitter_std, mod, duration_s});
}

/// APS of the magnitude envelope |x[n]| over the whole recording.
/// Envelope sub-windows are longer than feature sub-windows: 10 Hz bins lift a
/// coherent modulation line about 10 dB further above the envelope noise.
inline constexpr double kEnvelopeSubwindowS = 0.1;

inline AveragePowerSpectrum envelope_aps(const IQRecording& rec, double subwindow_len_s = kEnvelopeSubwindowS) {
  Segment seg{std::vector<cplx>(rec.size()), rec.sample_rate_hz(), 0, std::nullopt};
  for (std::size_t i = 0; i < rec.size(); ++i) seg.samples[i] = std::abs(rec.samples()[i]);
  return average_power_spectrum(seg, subwindow_len_s);
}

namespace detail {

// Share of a Lorentzian line (centre c, FWHM b) that falls inside [lo, hi].
inline double lorentzian_share(double c, double b, double lo, double hi) {
  if (b <= 0) return (c >= lo && c <= hi) ? 1.0 : 0.0;
  return (std::atan(2.0 * (hi - c) / b) - std::atan(2.0 * (lo - c) / b)) / std::numbers::pi;
}

}  // namespace detail

/// Expected in-band signal-to-noise ratio of an unattenuated recording, in dB.
/// Each band spans centre +- half_width_hz; noise counts white noise plus the
/// mean power of every ambient line that lands in a band.
inline double band_snr_db(const SynthConfig& cfg, double half_width_hz) {
  require(half_width_hz > 0, ErrorKind::usage, "bad_argument", "band half width must be positive");
  double signal = 0.0, noise = 0.0;
  for (const auto& band : cfg.carrier_bands) {
    const double lo = band.center_hz - half_width_hz, hi = band.center_hz + half_width_hz;
    const double amp =
        distance_attenuation(band.amplitude, cfg.distance_m, skin_depth(cfg.conductivity_s_per_m, band.center_hz));
    signal += amp * amp * detail::lorentzian_share(band.center_hz, band.bandwidth_hz, lo, hi);
    noise += 2.0 * cfg.noise_std * cfg.noise_std * (2.0 * half_width_hz / cfg.sample_rate_hz);
    for (const auto& l : cfg.ambient_lines)
      noise += l.amplitude * l.amplitude * (1.0 + l.fluctuation * l.fluctuation) *
               detail::lorentzian_share(l.center_hz, l.bandwidth_hz, lo, hi);
  }
  require(noise > 0, ErrorKind::data, "no_noise", "configuration has no noise in the carrier bands");
  return 10.0 * std::log10(signal / noise);
}

struct ModulationDetection {
  bool detected = false;
  double prominence_db = 0.0;
  double f_peak_hz = 0.0;
};

inline constexpr double kDetectionThresholdDb = 10.0;

/// Peak within f_expected +- tol against the median of the surrounding
/// +- 10 tol band (search window excluded).
inline ModulationDetection detect_modulation(const AveragePowerSpectrum& aps, double f_expected_hz, double tol_hz) {
  require(tol_hz > 0, ErrorKind::usage, "bad_argument", "tolerance must be positive");
  require(aps.bin_width_hz > 0 && aps.size() > 2, ErrorKind::data, "bad_argument", "spectrum is empty");
  const double span_hz = aps.bin_width_hz * static_cast<double>(aps.size());
  require(f_expected_hz > 0 && f_expected_hz < span_hz, ErrorKind::data, "out_of_range",
          "expected frequency lies outside the spectrum");

  const auto last = static_cast<std::ptrdiff_t>(aps.size()) - 1;
  auto to_bin_lo = [&](double f) { return std::clamp<std::ptrdiff_t>(std::llround(std::ceil(f / aps.bin_width_hz)), 1, last); };
  auto to_bin_hi = [&](double f) { return std::clamp<std::ptrdiff_t>(std::llround(std::floor(f / aps.bin_width_hz)), 1, last); };

  const std::ptrdiff_t lo = to_bin_lo(f_expected_hz - tol_hz);
  const std::ptrdiff_t hi = std::max(lo, to_bin_hi(f_expected_hz + tol_hz));
  std::ptrdiff_t peak = lo;
  for (std::ptrdiff_t k = lo; k <= hi; ++k)
    if (aps.power[static_cast<std::size_t>(k)] > aps.power[static_cast<std::size_t>(peak)]) peak = k;

  std::vector<double> around;
  const std::ptrdiff_t outer_lo = to_bin_lo(f_expected_hz - 10.0 * tol_hz);
  const std::ptrdiff_t outer_hi = to_bin_hi(f_expected_hz + 10.0 * tol_hz);
  for (std::ptrdiff_t k = outer_lo; k <= outer_hi; ++k)
    if (k < lo || k > hi) around.push_back(aps.power[static_cast<std::size_t>(k)]);
  require(!around.empty(), ErrorKind::data, "out_of_range", "no reference bins around the expected frequency");
  const auto mid = around.begin() + static_cast<std::ptrdiff_t>(around.size() / 2);
  std::nth_element(around.begin(), mid, around.end());
  double median = *mid;
  if (around.size() % 2 == 0) {
    const double lower = *std::max_element(around.begin(), mid);
    median = 0.5 * (median + lower);
  }

  const double peak_power = aps.power[static_cast<std::size_t>(peak)];
  // Floor the reference so a noiseless spectrum gives a large finite ratio.
  const double reference = std::max(median, std::max(peak_power, 1e-300) * 1e-30);
  ModulationDetection out;
  out.f_peak_hz = static_cast<double>(peak) * aps.bin_width_hz;
  out.prominence_db = peak_power > 0 ? 10.0 * std::log10(peak_power / reference) : 0.0;
  out.detected = out.prominence_db >= kDetectionThresholdDb;
  return out;
}

}  // namespace emg
