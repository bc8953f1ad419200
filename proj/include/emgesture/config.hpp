#pragma once

// Scenario configuration: everything needed to regenerate a run, with JSON
// round-tripping. Unknown keys are rejected so typos surface as errors.
//
// Top-level keys: seed, duration_s, takes_per_class, synth, profiles,
// features, denoise, train. See configs/reference.json for a full example.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "emgesture/error.hpp"
#include "emgesture/ml/forest.hpp"
#include "emgesture/spectrum.hpp"
#include "emgesture/synth.hpp"
#include "emgesture/vmd.hpp"

namespace emg {

using json = nlohmann::ordered_json;

struct FeatureConfig {
  double trim_start_s = 2.0;
  double trim_end_s = 25.0;
  double segment_s = 0.5;
  double subwindow_s = 0.01;
  WindowKind window = WindowKind::rectangular;
  bool swap_iq = false;
};

enum class DenoiseMode { none, whole, vmd };

inline const char* to_string(DenoiseMode m) {
  switch (m) {
    case DenoiseMode::none:
      return "none";
    case DenoiseMode::whole:
      return "whole";
    case DenoiseMode::vmd:
      return "vmd";
  }
  return "vmd";
}

inline DenoiseMode denoise_mode_from_string(const std::string& s) {
  if (s == "none") return DenoiseMode::none;
  if (s == "whole") return DenoiseMode::whole;
  if (s == "vmd") return DenoiseMode::vmd;
  fail(ErrorKind::usage, "bad_config", "unknown denoise mode '" + s + "'");
}

struct DenoiseConfig {
  DenoiseMode mode = DenoiseMode::vmd;
  double pairing_threshold = 0.05;
  VmdConfig vmd;
};

struct TrainConfig {
  std::uint64_t seed = 1;  // drives the split and the forest
  std::string model = "rf";  // "rf" or "knn"
  ml::ForestParams forest;
  double test_fraction = 0.2;
  bool stratified = true;
  std::size_t pool_bins = 4096;
  std::size_t knn_k = 5;
  std::size_t pca_components = 64;  // 0 disables PCA for knn
};

struct ScenarioConfig {
  std::uint64_t seed = 7;
  double duration_s = 30.0;
  int takes_per_class = 1;
  SynthConfig synth;
  std::vector<GestureProfile> profiles;
  FeatureConfig features;
  DenoiseConfig denoise;
  TrainConfig train;

  void validate() const {
    synth.validate();
    require(duration_s > 0, ErrorKind::usage, "bad_config", "duration_s must be positive");
    require(takes_per_class >= 1, ErrorKind::usage, "bad_config", "takes_per_class must be at least 1");
    require(!profiles.empty(), ErrorKind::usage, "bad_config", "at least one gesture profile is required");
    for (const auto& p : profiles)
      require(p.band_attenuation.size() == synth.carrier_bands.size(), ErrorKind::usage, "bad_profile",
              "profile '" + p.name + "' does not match the number of carrier bands");
    check_profile_separability(profiles);
    denoise.vmd.validate();
    train.forest.validate();
    require(train.model == "rf" || train.model == "knn", ErrorKind::usage, "bad_config",
            "train.model must be rf or knn");
    require(train.pool_bins >= 1, ErrorKind::usage, "bad_config", "train.pool_bins must be positive");
    require(train.knn_k >= 1, ErrorKind::usage, "bad_config", "train.knn_k must be positive");
  }
};

/// Desk-scale reference world: 409.6 kHz complex baseband (0.01 s sub-windows
/// are exactly 4096 samples, 100 Hz bins), four carrier bands, 30 s takes.
/// Each carrier has four wandering ambient lines at +-400 Hz and +-2 kHz, and a
/// few stronger wandering lines sit between the carriers. Band SNR is about 3 dB.
inline ScenarioConfig reference_scenario() {
  ScenarioConfig c;
  c.synth.sample_rate_hz = 409600.0;
  c.synth.carrier_bands.clear();
  c.synth.ambient_lines.clear();
  for (double f : {40000.0, 80000.0, 120000.0, 160000.0}) {
    c.synth.carrier_bands.push_back({f, 0.014, 1500.0});
    for (double off : {-2000.0, -400.0, 400.0, 2000.0}) c.synth.ambient_lines.push_back({f + off, 0.0033, 0.0, 0.5});
  }
  for (double f : {20000.0, 60000.0, 100000.0, 140000.0, 180000.0, -50000.0, -100000.0})
    c.synth.ambient_lines.push_back({f, 0.006, 0.0, 0.5});
  c.synth.noise_std = 0.05;
  c.synth.distance_m = 0.05;
  c.synth.conductivity_s_per_m = 0.5;
  c.synth.jitter_interval_s = 0.5;
  c.profiles = default_gesture_profiles();
  c.denoise.vmd.k_modes = 1;
  c.denoise.vmd.alpha = 2000.0;
  c.denoise.vmd.tau = 0.0;
  c.denoise.vmd.init = VmdInit::uniform_spread;
  c.train.pool_bins = 256;
  return c;
}

/// 20 MHz geometry: 0.01 s sub-windows hold 200,000 samples, zero-padded to 2^18.
inline ScenarioConfig fidelity_scenario() {
  ScenarioConfig c = reference_scenario();
  c.synth.sample_rate_hz = 20e6;
  c.train.pool_bins = 4096;
  return c;
}

// ---------------------------------------------------------------------------
// JSON

namespace detail {

inline void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  require(j.is_object(), ErrorKind::usage, "bad_config", where + " must be a JSON object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items())
    require(ok.count(key) > 0, ErrorKind::usage, "bad_config", "unknown key '" + key + "' in " + where);
}

template <class T>
void read_opt(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    fail(ErrorKind::usage, "bad_config", std::string("bad value for '") + key + "': " + e.what());
  }
}

}  // namespace detail

inline json to_json(const VmdConfig& v) {
  return json{{"k_modes", v.k_modes}, {"alpha", v.alpha},         {"tau", v.tau}, {"tol", v.tol},
              {"max_iter", v.max_iter}, {"init", to_string(v.init)}, {"seed", v.seed}};
}

inline VmdConfig vmd_config_from_json(const json& j, VmdConfig v = {}) {
  detail::check_keys(j, {"k_modes", "alpha", "tau", "tol", "max_iter", "init", "seed"}, "vmd");
  detail::read_opt(j, "k_modes", v.k_modes);
  detail::read_opt(j, "alpha", v.alpha);
  detail::read_opt(j, "tau", v.tau);
  detail::read_opt(j, "tol", v.tol);
  detail::read_opt(j, "max_iter", v.max_iter);
  detail::read_opt(j, "seed", v.seed);
  std::string init = to_string(v.init);
  detail::read_opt(j, "init", init);
  v.init = vmd_init_from_string(init);
  return v;
}

inline const char* to_string(ml::FeatureRule r) {
  switch (r) {
    case ml::FeatureRule::sqrt:
      return "sqrt";
    case ml::FeatureRule::log2:
      return "log2";
    case ml::FeatureRule::fixed:
      return "fixed";
  }
  return "sqrt";
}

inline json to_json(const ml::ForestParams& p) {
  return json{{"n_trees", p.n_trees},
              {"max_depth", p.max_depth},
              {"min_samples_leaf", p.min_samples_leaf},
              {"features_per_split", to_string(p.features_per_split)},
              {"fixed_features", p.fixed_features},
              {"bootstrap", p.bootstrap}};
}

inline ml::ForestParams forest_params_from_json(const json& j, ml::ForestParams p = {}) {
  detail::check_keys(j,
                     {"n_trees", "max_depth", "min_samples_leaf", "features_per_split", "fixed_features", "bootstrap"},
                     "forest");
  detail::read_opt(j, "n_trees", p.n_trees);
  detail::read_opt(j, "max_depth", p.max_depth);
  detail::read_opt(j, "min_samples_leaf", p.min_samples_leaf);
  detail::read_opt(j, "fixed_features", p.fixed_features);
  detail::read_opt(j, "bootstrap", p.bootstrap);
  std::string rule = to_string(p.features_per_split);
  detail::read_opt(j, "features_per_split", rule);
  if (rule == "sqrt") {
    p.features_per_split = ml::FeatureRule::sqrt;
  } else if (rule == "log2") {
    p.features_per_split = ml::FeatureRule::log2;
  } else if (rule == "fixed") {
    p.features_per_split = ml::FeatureRule::fixed;
  } else {
    fail(ErrorKind::usage, "bad_config", "unknown features_per_split '" + rule + "'");
  }
  return p;
}

inline json to_json(const ScenarioConfig& c) {
  json bands = json::array(), lines = json::array(), profiles = json::array();
  for (const auto& b : c.synth.carrier_bands)
    bands.push_back({{"center_hz", b.center_hz}, {"amplitude", b.amplitude}, {"bandwidth_hz", b.bandwidth_hz}});
  for (const auto& l : c.synth.ambient_lines)
    lines.push_back({{"center_hz", l.center_hz},
                     {"amplitude", l.amplitude},
                     {"bandwidth_hz", l.bandwidth_hz},
                     {"fluctuation", l.fluctuation}});
  for (const auto& p : c.profiles)
    profiles.push_back({{"name", p.name}, {"band_attenuation", p.band_attenuation}, {"jitter_std", p.jitter_std}});

  return json{
      {"seed", c.seed},
      {"duration_s", c.duration_s},
      {"takes_per_class", c.takes_per_class},
      {"synth",
       {{"sample_rate_hz", c.synth.sample_rate_hz},
        {"carrier_bands", bands},
        {"ambient_lines", lines},
        {"noise_std", c.synth.noise_std},
        {"distance_m", c.synth.distance_m},
        {"conductivity_s_per_m", c.synth.conductivity_s_per_m},
        {"jitter_interval_s", c.synth.jitter_interval_s}}},
      {"profiles", profiles},
      {"features",
       {{"trim_start_s", c.features.trim_start_s},
        {"trim_end_s", c.features.trim_end_s},
        {"segment_s", c.features.segment_s},
        {"subwindow_s", c.features.subwindow_s},
        {"window", c.features.window == WindowKind::hann ? "hann" : "rectangular"},
        {"swap_iq", c.features.swap_iq}}},
      {"denoise",
       {{"mode", to_string(c.denoise.mode)},
        {"pairing_threshold", c.denoise.pairing_threshold},
        {"vmd", to_json(c.denoise.vmd)}}},
      {"train",
       {{"seed", c.train.seed},
        {"model", c.train.model},
        {"forest", to_json(c.train.forest)},
        {"test_fraction", c.train.test_fraction},
        {"stratified", c.train.stratified},
        {"pool_bins", c.train.pool_bins},
        {"knn_k", c.train.knn_k},
        {"pca_components", c.train.pca_components}}},
  };
}

/// Keys absent from `j` keep the values in `base`.
inline ScenarioConfig scenario_from_json(const json& j, ScenarioConfig c = reference_scenario()) {
  detail::check_keys(j, {"seed", "duration_s", "takes_per_class", "synth", "profiles", "features", "denoise", "train"},
                     "config");
  detail::read_opt(j, "seed", c.seed);
  detail::read_opt(j, "duration_s", c.duration_s);
  detail::read_opt(j, "takes_per_class", c.takes_per_class);

  if (j.contains("synth")) {
    const json& s = j.at("synth");
    detail::check_keys(s,
                       {"sample_rate_hz", "carrier_bands", "ambient_lines", "noise_std", "distance_m",
                        "conductivity_s_per_m", "jitter_interval_s"},
                       "synth");
    detail::read_opt(s, "sample_rate_hz", c.synth.sample_rate_hz);
    detail::read_opt(s, "noise_std", c.synth.noise_std);
    detail::read_opt(s, "distance_m", c.synth.distance_m);
    detail::read_opt(s, "conductivity_s_per_m", c.synth.conductivity_s_per_m);
    detail::read_opt(s, "jitter_interval_s", c.synth.jitter_interval_s);
    if (s.contains("carrier_bands")) {
      c.synth.carrier_bands.clear();
      for (const auto& b : s.at("carrier_bands")) {
        detail::check_keys(b, {"center_hz", "amplitude", "bandwidth_hz"}, "carrier_bands[]");
        CarrierBand band;
        detail::read_opt(b, "center_hz", band.center_hz);
        detail::read_opt(b, "amplitude", band.amplitude);
        detail::read_opt(b, "bandwidth_hz", band.bandwidth_hz);
        c.synth.carrier_bands.push_back(band);
      }
    }
    if (s.contains("ambient_lines")) {
      c.synth.ambient_lines.clear();
      for (const auto& l : s.at("ambient_lines")) {
        detail::check_keys(l, {"center_hz", "amplitude", "bandwidth_hz", "fluctuation"}, "ambient_lines[]");
        AmbientLine line;
        detail::read_opt(l, "center_hz", line.center_hz);
        detail::read_opt(l, "amplitude", line.amplitude);
        detail::read_opt(l, "bandwidth_hz", line.bandwidth_hz);
        detail::read_opt(l, "fluctuation", line.fluctuation);
        c.synth.ambient_lines.push_back(line);
      }
    }
  }
  if (j.contains("profiles")) {
    c.profiles.clear();
    for (const auto& p : j.at("profiles")) {
      detail::check_keys(p, {"name", "band_attenuation", "jitter_std"}, "profiles[]");
      GestureProfile profile;
      detail::read_opt(p, "name", profile.name);
      detail::read_opt(p, "band_attenuation", profile.band_attenuation);
      detail::read_opt(p, "jitter_std", profile.jitter_std);
      require(!profile.name.empty() && profile.name.find('_') == std::string::npos, ErrorKind::usage, "bad_profile",
              "profile names must be non-empty and contain no '_'");
      c.profiles.push_back(profile);
    }
  }
  if (j.contains("features")) {
    const json& f = j.at("features");
    detail::check_keys(f, {"trim_start_s", "trim_end_s", "segment_s", "subwindow_s", "window", "swap_iq"},
                       "features");
    detail::read_opt(f, "trim_start_s", c.features.trim_start_s);
    detail::read_opt(f, "trim_end_s", c.features.trim_end_s);
    detail::read_opt(f, "segment_s", c.features.segment_s);
    detail::read_opt(f, "subwindow_s", c.features.subwindow_s);
    detail::read_opt(f, "swap_iq", c.features.swap_iq);
    std::string window = c.features.window == WindowKind::hann ? "hann" : "rectangular";
    detail::read_opt(f, "window", window);
    require(window == "hann" || window == "rectangular", ErrorKind::usage, "bad_config",
            "features.window must be rectangular or hann");
    c.features.window = window == "hann" ? WindowKind::hann : WindowKind::rectangular;
  }
  if (j.contains("denoise")) {
    const json& d = j.at("denoise");
    detail::check_keys(d, {"mode", "pairing_threshold", "vmd"}, "denoise");
    std::string mode = to_string(c.denoise.mode);
    detail::read_opt(d, "mode", mode);
    c.denoise.mode = denoise_mode_from_string(mode);
    detail::read_opt(d, "pairing_threshold", c.denoise.pairing_threshold);
    if (d.contains("vmd")) c.denoise.vmd = vmd_config_from_json(d.at("vmd"), c.denoise.vmd);
  }
  if (j.contains("train")) {
    const json& t = j.at("train");
    detail::check_keys(t, {"seed", "model", "forest", "test_fraction", "stratified", "pool_bins", "knn_k", "pca_components"},
                       "train");
    detail::read_opt(t, "seed", c.train.seed);
    detail::read_opt(t, "model", c.train.model);
    detail::read_opt(t, "test_fraction", c.train.test_fraction);
    detail::read_opt(t, "stratified", c.train.stratified);
    detail::read_opt(t, "pool_bins", c.train.pool_bins);
    detail::read_opt(t, "knn_k", c.train.knn_k);
    detail::read_opt(t, "pca_components", c.train.pca_components);
    if (t.contains("forest")) c.train.forest = forest_params_from_json(t.at("forest"), c.train.forest);
  }
  c.validate();
  return c;
}

inline json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::data, "missing_file", "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::data, "bad_json", path.string() + ": " + e.what());
  }
}

inline void write_json_file(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::data, "io", "cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) fail(ErrorKind::data, "io", "failed writing " + path.string());
}

}  // namespace emg
