// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "emgesture/config.hpp"
#include "emgesture/denoise.hpp"
#include "emgesture/pipeline.hpp"
#include "emgesture/plot.hpp"
#include "emgesture/spectrum.hpp"
#include "emgesture/synth.hpp"
#include "emgesture/vmd.hpp"

using namespace emg;
namespace fs = std::filesystem;

namespace {

using clk = std::chrono::steady_clock;
double since(clk::time_point t) { return std::chrono::duration<double>(clk::now() - t).count(); }

int failures = 0;

void report(int n, bool ok, const std::string& detail) {
  std::printf("criterion %2d: %s  %s\n", n, ok ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double rel_l2(std::span<const double> a, std::span<const double> ref) {
  double num = 0, den = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - ref[i]) * (a[i] - ref[i]);
    den += ref[i] * ref[i];
  }
  return std::sqrt(num / den);
}

double norm2(std::span<const double> a) {
  double s = 0;
  for (double v : a) s += v * v;
  return std::sqrt(s);
}

double correlation(const std::vector<double>& a, const std::vector<double>& b) {
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) ma += a[i], mb += b[i];
  ma /= static_cast<double>(a.size());
  mb /= static_cast<double>(b.size());
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += (a[i] - ma) * (b[i] - mb);
    aa += (a[i] - ma) * (a[i] - ma);
    bb += (b[i] - mb) * (b[i] - mb);
  }
  return ab / std::sqrt(aa * bb);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// 1 and 2 share their inputs.
void fft_criteria() {
  const auto t0 = clk::now();
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> g;
  double max_bin = 0, max_round = 0, max_parseval = 0;
  int inputs = 0;
  for (std::size_t n : {16u, 256u, 4096u}) {
    for (int r = 0; r < 200; ++r) {
      std::vector<cplx> x(n);
      for (auto& v : x) v = {g(rng), g(rng)};
      const auto fast = fft(x);
      const auto slow = dft_direct(x);
      const auto back = ifft(fast);
      double ex = 0, eX = 0;
      for (std::size_t k = 0; k < n; ++k) {
        max_bin = std::max(max_bin, std::abs(fast.bins[k] - slow.bins[k]));
        max_round = std::max(max_round, std::abs(back[k] - x[k]));
        ex += std::norm(x[k]);
        eX += std::norm(fast.bins[k]);
      }
      max_parseval = std::max(max_parseval, std::abs(eX / static_cast<double>(n) - ex) / ex);
      ++inputs;
    }
  }
  const double t = since(t0);
  report(1, max_bin < 1e-9 && max_round < 1e-9 && t < 10.0,
         fmt("%d inputs, max |fft-dft| %.2e, max round trip %.2e, %.1f s", inputs, max_bin, max_round, t));
  report(2, max_parseval < 1e-9, fmt("max Parseval relative error %.2e", max_parseval));
}

void vmd_criterion() {
  const auto t0 = clk::now();
  const std::size_t n = 4096;
  std::vector<double> a(n), b(n), x(n);
  for (std::size_t i = 0; i < n; ++i) {
    a[i] = std::cos(2 * std::numbers::pi * 0.05 * static_cast<double>(i));
    b[i] = std::cos(2 * std::numbers::pi * 0.20 * static_cast<double>(i));
    x[i] = a[i] + b[i];
  }
  VmdConfig c;
  c.k_modes = 2;
  const auto ms = vmd_decompose(x, c);
  const double e0 = std::abs(ms.center_freqs[0] - 0.05) / 0.05, e1 = std::abs(ms.center_freqs[1] - 0.20) / 0.20;
  const double c0 = correlation(ms.modes[0], a), c1 = correlation(ms.modes[1], b);
  const double rec = rel_l2(reconstruct(ms), x);
  const double t = since(t0);
  report(3, e0 < 0.01 && e1 < 0.01 && c0 > 0.99 && c1 > 0.99 && rec < 0.05 && t < 30.0,
         fmt("centres %.5f %.5f, corr %.4f %.4f, reconstruction %.2f%%, %d iterations, %.2f s", ms.center_freqs[0],
             ms.center_freqs[1], c0, c1, 100 * rec, ms.n_iterations, t));
}

// Expected APS of the reference world with its noise and carriers, without the
// per-window randomness: a smooth input on which every VMD configuration converges.
AveragePowerSpectrum expected_reference_aps(const ScenarioConfig& cfg) {
  const double fs = cfg.synth.sample_rate_hz;
  const std::size_t n = detail::seconds_to_samples(cfg.features.subwindow_s, fs);
  const double bin = fs / static_cast<double>(n);
  AveragePowerSpectrum out{std::vector<double>(n, 2 * cfg.synth.noise_std * cfg.synth.noise_std * double(n)), bin, 50,
                           SpectrumSource::gesture, std::string("no-gesture")};
  for (const auto& band : cfg.synth.carrier_bands) {
    const double amp = distance_attenuation(band.amplitude, cfg.synth.distance_m,
                                            skin_depth(cfg.synth.conductivity_s_per_m, band.center_hz));
    const double gamma = band.bandwidth_hz / 2 / bin;
    const double k0 = band.center_hz / bin;
    for (std::size_t k = 0; k < n; ++k) {
      const double d = static_cast<double>(k) - k0;
      out.power[k] += amp * amp * double(n) * double(n) * gamma / (std::numbers::pi * (d * d + gamma * gamma));
    }
  }
  return out;
}

void denoise_criterion(const AveragePowerSpectrum& real, const ScenarioConfig& cfg) {
  const VmdConfig defaults;
  const VmdConfig reference = cfg.denoise.vmd;
  bool ok = true;
  std::string detail;

  for (const auto& [name, vc] : {std::pair{"default", defaults}, std::pair{"reference", reference}}) {
    const auto out = denoise_aps(real, make_noise_profile(real, vc), vc);
    const double r = norm2(out.power) / norm2(real.power);
    ok = ok && r < 0.05;
    detail += fmt("self %s %.2e; ", name, r);
  }

  // Zero profile: the output must be the floored reconstruction, and that must sit near the input.
  auto zero_like = [](const AveragePowerSpectrum& a) {
    auto z = a;
    std::fill(z.power.begin(), z.power.end(), 0.0);
    return z;
  };
  auto floored_recon = [](const ModeSet& m) {
    auto r = reconstruct(m);
    for (auto& v : r) v = std::max(v, 0.0);
    return r;
  };
  const auto smooth = expected_reference_aps(cfg);
  const auto zs = denoise_aps_detailed(smooth, make_noise_profile(zero_like(smooth), defaults), defaults);
  const double dev_recon = rel_l2(zs.aps.power, floored_recon(zs.gesture_modes));
  const double dev_input = rel_l2(zs.aps.power, smooth.power);
  ok = ok && dev_recon < 1e-12 && dev_input < 0.05;
  detail += fmt("zero-profile: out vs reconstruction %.1e, out vs input %.3f%%", dev_recon, 100 * dev_input);

  const auto zr = denoise_aps_detailed(real, make_noise_profile(zero_like(real), reference), reference);
  const double real_recon = rel_l2(zr.aps.power, floored_recon(zr.gesture_modes));
  ok = ok && real_recon < 1e-12;
  detail += fmt(" (measured APS, reference config: out vs reconstruction %.1e)", real_recon);
  report(4, ok, detail);
}

struct Variant {
  std::string name;
  DenoiseMode mode;
  std::vector<double> acc;
};

void accuracy_criteria(const FeatureSet& features, const ScenarioConfig& cfg) {
  const auto t0 = clk::now();
  const auto noise = noise_profile_aps(features.noise);
  std::vector<Variant> variants{{"vmd", DenoiseMode::vmd, {}}, {"whole", DenoiseMode::whole, {}}, {"none", DenoiseMode::none, {}}};
  std::vector<double> knn;
  ml::LabeledDataset vmd_ds;
  for (auto& v : variants) {
    DenoiseConfig dc = cfg.denoise;
    dc.mode = v.mode;
    const auto ds = build_dataset(denoise_spectra(features.gesture, noise, dc), cfg.train);
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      TrainConfig tc = cfg.train;
      tc.seed = seed;
      v.acc.push_back(run_experiment(ds, tc).report.accuracy);
    }
    if (v.mode == DenoiseMode::vmd) vmd_ds = ds;
  }
  const auto& rf = variants[0].acc;
  int at_least_95 = 0, rf_ge_knn = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    TrainConfig tc = cfg.train;
    tc.seed = seed;
    tc.model = "knn";
    knn.push_back(run_experiment(vmd_ds, tc).report.accuracy);
    at_least_95 += rf[seed - 1] >= 0.95;
    rf_ge_knn += rf[seed - 1] >= knn.back();
  }
  const double t = since(t0);
  auto mean = [](const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / double(v.size()); };
  std::string per_seed;
  for (std::size_t i = 0; i < rf.size(); ++i) per_seed += fmt("%s%.3f/%.3f", i ? " " : "", rf[i], knn[i]);
  report(5, at_least_95 >= 9 && rf_ge_knn == 10 && t < 300.0,
         fmt("RF >= 0.95 on %d/10 seeds, RF >= KNN(PCA-64) on %d/10 (rf/knn: %s), %.0f s", at_least_95, rf_ge_knn,
             per_seed.c_str(), t));

  const double m_vmd = mean(variants[0].acc), m_whole = mean(variants[1].acc), m_none = mean(variants[2].acc);
  report(6, m_vmd > m_whole && m_whole > m_none && m_vmd - m_none >= 0.05,
         fmt("band SNR %.2f dB; mean accuracy vmd %.4f > whole %.4f > none %.4f, gain %.1f points",
             band_snr_db(cfg.synth, cfg.synth.carrier_bands[0].bandwidth_hz), m_vmd, m_whole, m_none,
             100 * (m_vmd - m_none)));
}

void skin_depth_criterion() {
  const double d = skin_depth(5.8e7, 1e6);
  const double e_step = distance_attenuation(1.0, d, d);
  const auto series = decay_series(d, 8)[0];
  std::vector<double> x, y;
  for (std::size_t i = 0; i < series.x.size(); ++i) {
    x.push_back(std::stod(series.x[i]));
    y.push_back(std::log(series.y[i]));
  }
  const double n = double(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n, my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  const double slope = sxy / sxx, r2 = sxy * sxy / (sxx * syy);
  const bool ok = std::abs(d / 6.61e-5 - 1) < 0.01 && std::abs(e_step - std::exp(-1.0)) < 1e-12 &&
                  std::abs(slope * d + 1) < 1e-6 && r2 > 0.999;
  report(7, ok, fmt("delta %.4e m, one-delta factor %.6f, plot slope %.4e (-1/delta %.4e), R^2 %.8f", d, e_step, slope,
                    -1 / d, r2));
}

void modulation_criterion(const ScenarioConfig& cfg) {
  int hits = 0, quiet = 0;
  double worst_hit = 1e9, worst_ctrl = -1e9;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    SynthConfig sc = cfg.synth;
    sc.seed = seed;
    const auto env = envelope_aps(synth_modulated(sc, {7000.0, 0.5, 0.5}, 1.0));
    const auto m = detect_modulation(env, 7000.0, 200.0);
    hits += m.detected && std::abs(m.f_peak_hz - 7000.0) <= env.bin_width_hz;
    worst_hit = std::min(worst_hit, m.prominence_db);
    const auto ctrl = detect_modulation(envelope_aps(synth_recording(sc, cfg.profiles[0], 1.0)), 7000.0, 200.0);
    quiet += !ctrl.detected;
    worst_ctrl = std::max(worst_ctrl, ctrl.prominence_db);
  }
  report(8, hits == 10 && quiet == 10,
         fmt("detected %d/10 (weakest %.1f dB), controls quiet %d/10 (strongest %.1f dB), threshold %.0f dB", hits,
             worst_hit, quiet, worst_ctrl, kDetectionThresholdDb));
}

void determinism_criterion() {
  const fs::path root = fs::temp_directory_path() / ("emgesture_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(root);
  fs::create_directories(root);
  const std::string cli = EMGESTURE_CLI;
  const std::string smoke = std::string(EMGESTURE_SOURCE_DIR) + "/configs/smoke.json";
  auto run = [&](const std::string& config, const fs::path& out) {
    const std::string cmd = "\"" + cli + "\" run-all --config \"" + config + "\" --out \"" + out.string() +
                            "\" > \"" + (out.string() + ".log") + "\" 2>&1";
    return std::system(cmd.c_str()) == 0;
  };
  const bool ran = run(smoke, root / "a") && run((root / "a" / "manifest.json").string(), root / "b");
  bool same = ran;
  std::string detail;
  for (const char* f : {"features.csv", "model.json", "report.json"}) {
    const auto a = slurp(root / "a" / f), b = slurp(root / "b" / f);
    const bool eq = !a.empty() && a == b;
    same = same && eq;
    detail += fmt("%s %s (%zu bytes); ", f, eq ? "identical" : "DIFFERENT", a.size());
  }
  if (!ran) detail += "run-all failed, see " + root.string();
  report(9, same, detail + "second run replayed the first run's manifest");
  if (same) fs::remove_all(root);
}

void geometry_criterion(const FeatureSet& features, const ScenarioConfig& cfg) {
  std::map<std::string, int> per;
  for (const auto& s : features.gesture) ++per[s.label.value_or("?")];
  bool ok = per.size() == 9 && features.gesture.size() == 414;
  for (const auto& [name, n] : per) ok = ok && n == 46;
  report(10, ok,
         fmt("trim(%.0f, %.0f) + %.1f s segments: %zu classes x 46 = %zu rows", cfg.features.trim_start_s,
             cfg.features.trim_end_s, cfg.features.segment_s, per.size(), features.gesture.size()));
}

}  // namespace

int main() {
  try {
    fft_criteria();
    vmd_criterion();

    const ScenarioConfig cfg = reference_scenario();
    const auto t0 = clk::now();
    const FeatureSet features = scenario_features(cfg);
    std::printf("reference world: %zu gesture rows, %zu noise rows, %.0f s\n", features.gesture.size(),
                features.noise.size(), since(t0));

    denoise_criterion(features.gesture.front(), cfg);
    accuracy_criteria(features, cfg);
    skin_depth_criterion();
    modulation_criterion(cfg);
    determinism_criterion();
    geometry_criterion(features, cfg);
  } catch (const std::exception& e) {
    std::printf("aborted: %s\n", e.what());
    return 2;
  }
  std::printf("%s\n", failures == 0 ? "all criteria PASS" : fmt("%d criteria FAIL", failures).c_str());
  return failures == 0 ? 0 : 1;
}
