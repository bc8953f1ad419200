#pragma once

// Glue between the stages: recordings -> segment spectra -> denoised spectra
// -> pooled dataset -> trained model -> report. Everything here is a pure
// function of its inputs and the seeds it is handed.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "emgesture/config.hpp"
#include "emgesture/denoise.hpp"
#include "emgesture/ml/dataset.hpp"
#include "emgesture/ml/eval.hpp"
#include "emgesture/ml/forest.hpp"
#include "emgesture/ml/knn.hpp"
#include "emgesture/ml/pca.hpp"
#include "emgesture/signal_io.hpp"
#include "emgesture/spectrum.hpp"
#include "emgesture/synth.hpp"

namespace emg {

inline constexpr const char* kNoiseLabel = "noise";

/// Runs f(i) for i in [0, n) on up to hardware_concurrency threads. Work is
/// split into contiguous blocks; callers write results by index, so output
/// never depends on scheduling.
template <class F>
void parallel_for(std::size_t n, F&& f, unsigned max_threads = 0) {
  unsigned threads = max_threads ? max_threads : std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::vector<std::exception_ptr> errors(threads);
  {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) {
      pool.emplace_back([&, t] {
        const std::size_t begin = n * t / threads, end = n * (t + 1) / threads;
        try {
          for (std::size_t i = begin; i < end; ++i) f(i);
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

/// "<class>_<take>" split at the last underscore; a stem without one is all class.
inline std::pair<std::string, std::string> parse_recording_stem(const std::string& stem) {
  const auto pos = stem.rfind('_');
  if (pos == std::string::npos) return {stem, ""};
  return {stem.substr(0, pos), stem.substr(pos + 1)};
}

/// Trim, segment and take the APS of every segment.
inline std::vector<AveragePowerSpectrum> extract_features(const IQRecording& rec, const std::string& label,
                                                          const FeatureConfig& fc) {
  const IQRecording trimmed = trim(rec, fc.trim_start_s, fc.trim_end_s);
  const std::vector<Segment> segments = segment(trimmed, fc.segment_s, label);
  std::vector<AveragePowerSpectrum> out(segments.size());
  ApsOptions opts;
  opts.window = fc.window;
  parallel_for(segments.size(), [&](std::size_t i) {
    out[i] = average_power_spectrum(segments[i], fc.subwindow_s, opts);
    out[i].source = label == kNoiseLabel ? SpectrumSource::noise : SpectrumSource::gesture;
  });
  return out;
}

/// Seed of take `take` of class `class_index`; the noise recording uses
/// class_index = number of profiles.
inline std::uint64_t recording_seed(std::uint64_t world_seed, std::size_t class_index, int take) {
  return detail::splitmix64(detail::splitmix64(world_seed) ^ (static_cast<std::uint64_t>(class_index) << 20) ^
                            static_cast<std::uint64_t>(take));
}

struct ScenarioRecording {
  std::string label;  // class name or "noise"
  int take = 0;
  IQRecording recording;
};

inline std::string recording_stem(const std::string& label, int take) { return label + "_" + std::to_string(take); }

/// Synthesises one recording per (class, take) plus one noise take.
/// `visit` receives each recording as soon as it exists so callers can stream.
template <class Visit>
void synthesize_scenario(const ScenarioConfig& cfg, Visit&& visit) {
  cfg.validate();
  for (std::size_t c = 0; c < cfg.profiles.size(); ++c) {
    for (int take = 0; take < cfg.takes_per_class; ++take) {
      SynthConfig sc = cfg.synth;
      sc.seed = recording_seed(cfg.seed, c, take);
      visit(ScenarioRecording{cfg.profiles[c].name, take, synth_recording(sc, cfg.profiles[c], cfg.duration_s)});
    }
  }
  SynthConfig sc = cfg.synth;
  sc.seed = recording_seed(cfg.seed, cfg.profiles.size(), 0);
  visit(ScenarioRecording{kNoiseLabel, 0, synth_noise(sc, cfg.duration_s)});
}

struct FeatureSet {
  std::vector<AveragePowerSpectrum> gesture;  // labelled by class
  std::vector<AveragePowerSpectrum> noise;    // labelled "noise"
};

inline void add_recording_features(FeatureSet& fs, const ScenarioRecording& r, const FeatureConfig& fc) {
  auto spectra = extract_features(r.recording, r.label, fc);
  auto& dst = r.label == kNoiseLabel ? fs.noise : fs.gesture;
  dst.insert(dst.end(), std::make_move_iterator(spectra.begin()), std::make_move_iterator(spectra.end()));
}

/// In-memory synth + feature extraction for a whole scenario.
inline FeatureSet scenario_features(const ScenarioConfig& cfg) {
  FeatureSet fs;
  synthesize_scenario(cfg, [&](const ScenarioRecording& r) { add_recording_features(fs, r, cfg.features); });
  return fs;
}

/// Average of all noise segments.
inline AveragePowerSpectrum noise_profile_aps(std::span<const AveragePowerSpectrum> noise) {
  require(!noise.empty(), ErrorKind::data, "missing_noise", "no noise spectra to build a profile from");
  AveragePowerSpectrum p = mean_spectrum(noise);
  p.source = SpectrumSource::noise;
  p.label = kNoiseLabel;
  return p;
}

struct DenoiseStats {
  std::size_t vmd_runs = 0;
  std::size_t not_converged = 0;  // decompositions that hit max_iter
};

/// Denoises every gesture spectrum against one shared profile.
inline std::vector<AveragePowerSpectrum> denoise_spectra(std::span<const AveragePowerSpectrum> gesture,
                                                         const AveragePowerSpectrum& noise_aps,
                                                         const DenoiseConfig& dc, DenoiseStats* stats = nullptr) {
  std::vector<AveragePowerSpectrum> out(gesture.size());
  DenoiseStats local;
  switch (dc.mode) {
    case DenoiseMode::none:
      out.assign(gesture.begin(), gesture.end());
      break;
    case DenoiseMode::whole:
      parallel_for(gesture.size(), [&](std::size_t i) { out[i] = denoise_whole_spectrum(gesture[i], noise_aps); });
      break;
    case DenoiseMode::vmd: {
      const NoiseProfile profile = make_noise_profile(noise_aps, dc.vmd);
      std::vector<char> converged(gesture.size(), 1);
      parallel_for(gesture.size(), [&](std::size_t i) {
        auto r = denoise_aps_detailed(gesture[i], profile, dc.vmd, dc.pairing_threshold);
        converged[i] = r.gesture_modes.converged ? 1 : 0;
        out[i] = std::move(r.aps);
      });
      local.vmd_runs = gesture.size() + 1;
      local.not_converged = static_cast<std::size_t>(std::count(converged.begin(), converged.end(), 0)) +
                            (profile.mode_set.converged ? 0 : 1);
      break;
    }
  }
  if (stats) *stats = local;
  return out;
}

/// Pooled training matrix in canonical class order.
inline ml::LabeledDataset build_dataset(std::span<const AveragePowerSpectrum> spectra, const TrainConfig& tc) {
  return ml::pool_features(ml::dataset_from_spectra(spectra, gesture_class_names()), tc.pool_bins);
}

// ---------------------------------------------------------------------------
// Models

struct KnnModel {
  ml::LabeledDataset train;  // PCA-projected when pca is set
  std::optional<ml::PcaModel> pca;
  std::size_t k = 5;
  std::size_t n_dims = 0;  // input dimensionality
};

struct TrainedModel {
  std::string kind;  // "rf" or "knn"
  std::vector<std::string> class_names;
  ml::FeatureMeta meta;
  std::optional<ml::ForestModel> forest;
  std::optional<KnnModel> knn;
  // Split the model was trained under, so eval can recover the held-out rows.
  std::uint64_t seed = 0;
  double test_fraction = 0.2;
  bool stratified = true;

  std::size_t n_dims() const { return forest ? forest->n_dims : knn->n_dims; }
};

inline TrainedModel train_model(const ml::LabeledDataset& train, const TrainConfig& tc) {
  TrainedModel m;
  m.kind = tc.model;
  m.class_names = train.class_names;
  m.meta = train.meta;
  m.seed = tc.seed;
  m.test_fraction = tc.test_fraction;
  m.stratified = tc.stratified;
  require(tc.model == "rf" || tc.model == "knn", ErrorKind::usage, "bad_model", "model must be rf or knn");
  if (tc.model == "rf") {
    ml::ForestParams p = tc.forest;
    p.seed = tc.seed;
    m.forest = ml::rf_train(train, p);
  } else {
    KnnModel k;
    k.k = std::min(tc.knn_k, train.size());
    k.n_dims = train.n_dims;
    if (tc.pca_components > 0) {
      const std::size_t comps = std::min({tc.pca_components, train.size(), train.n_dims});
      k.pca = ml::pca_fit(train, comps);
      k.train = ml::pca_transform(*k.pca, train);
    } else {
      k.train = train;
    }
    m.knn = std::move(k);
  }
  return m;
}

inline int predict(const TrainedModel& m, std::span<const double> x) {
  if (m.forest) return ml::rf_predict(*m.forest, x).label;
  require(m.knn.has_value(), ErrorKind::data, "bad_model", "model holds no classifier");
  require(x.size() == m.knn->n_dims, ErrorKind::data, "dimension_mismatch",
          "feature vector has " + std::to_string(x.size()) + " dims, model expects " + std::to_string(m.knn->n_dims));
  if (m.knn->pca) {
    const auto z = ml::pca_transform(*m.knn->pca, x);
    return ml::knn_predict(m.knn->train, z, m.knn->k);
  }
  return ml::knn_predict(m.knn->train, x, m.knn->k);
}

inline std::string model_display_name(const TrainConfig& tc) {
  if (tc.model == "rf") return "random-forest";
  return tc.pca_components > 0 ? "knn-pca" + std::to_string(tc.pca_components) : "knn";
}

/// Evaluates `model` on `test`, remapping test labels by class name.
inline ml::EvalReport evaluate_model(const TrainedModel& model, const ml::LabeledDataset& test, std::string name) {
  require(test.n_dims == model.n_dims(), ErrorKind::data, "dimension_mismatch",
          "test features have " + std::to_string(test.n_dims) + " dims, model expects " +
              std::to_string(model.n_dims()));
  ml::LabeledDataset t = test;
  t.class_names = model.class_names;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const auto& name_i = test.class_names[static_cast<std::size_t>(test.labels[i])];
    auto it = std::find(model.class_names.begin(), model.class_names.end(), name_i);
    require(it != model.class_names.end(), ErrorKind::data, "unknown_class",
            "test class '" + name_i + "' is unknown to the model");
    t.labels[i] = static_cast<int>(it - model.class_names.begin());
  }
  return ml::evaluate([&](std::span<const double> x) { return predict(model, x); }, t, std::move(name));
}

struct Experiment {
  TrainedModel model;
  ml::EvalReport report;
  ml::Split split;
};

/// Split, train and evaluate on one dataset.
inline Experiment run_experiment(const ml::LabeledDataset& ds, const TrainConfig& tc) {
  Experiment e;
  e.split = ml::split_indices(ds, tc.test_fraction, tc.seed, tc.stratified);
  const auto train = ds.subset(e.split.train);
  const auto test = ds.subset(e.split.test);
  e.model = train_model(train, tc);
  e.report = evaluate_model(e.model, test, model_display_name(tc));
  return e;
}

}  // namespace emg
