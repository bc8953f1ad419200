// emgesture: command-line front end for the synth -> features -> denoise ->
// train -> eval chain.
//
// Errors print one line to stderr,
//   error kind=<usage|data|numeric> code=<code> message=<text>
// and exit with 2 (usage), 3 (data) or 4 (numeric).

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "emgesture/config.hpp"
#include "emgesture/io.hpp"
#include "emgesture/pipeline.hpp"
#include "emgesture/plot.hpp"

namespace fs = std::filesystem;
using namespace emg;

namespace {

struct Globals {
  std::optional<std::uint64_t> seed;
  std::string config;
  std::string out;
  bool swap_iq = false;
  bool no_vmd = false;
  std::optional<std::string> model;
  std::optional<std::size_t> pca;
  bool fidelity = false;
  bool strict = false;
};

struct VmdOverrides {
  std::optional<int> k_modes, max_iter;
  std::optional<double> alpha, tau, tol, pairing_threshold;
  std::optional<std::string> mode;

  void add_to(CLI::App* app) {
    app->add_option("--mode", mode, "Denoising: vmd, whole or none")->check(CLI::IsMember({"vmd", "whole", "none"}));
    app->add_option("--k-modes", k_modes, "VMD mode count");
    app->add_option("--alpha", alpha, "VMD bandwidth penalty");
    app->add_option("--tau", tau, "VMD multiplier step (0 = noise slack)");
    app->add_option("--tol", tol, "VMD convergence tolerance");
    app->add_option("--max-iter", max_iter, "VMD iteration cap");
    app->add_option("--pairing-threshold", pairing_threshold, "max centre-frequency gap for paired modes");
  }

  void apply(DenoiseConfig& d) const {
    if (mode) d.mode = denoise_mode_from_string(*mode);
    if (k_modes) d.vmd.k_modes = *k_modes;
    if (alpha) d.vmd.alpha = *alpha;
    if (tau) d.vmd.tau = *tau;
    if (tol) d.vmd.tol = *tol;
    if (max_iter) d.vmd.max_iter = *max_iter;
    if (pairing_threshold) d.pairing_threshold = *pairing_threshold;
    d.vmd.validate();
  }
};

struct TrainOverrides {
  std::optional<std::size_t> pool_bins;
  std::optional<double> test_fraction;
  std::optional<int> n_trees, max_depth, min_samples_leaf;
  bool no_stratify = false;

  void add_to(CLI::App* app) {
    app->add_option("--pool-bins", pool_bins, "max-pool spectra to this many bins before training");
    app->add_option("--test-fraction", test_fraction, "held-out fraction");
    app->add_option("--n-trees", n_trees, "forest size");
    app->add_option("--max-depth", max_depth, "tree depth cap (0 = unlimited)");
    app->add_option("--min-samples-leaf", min_samples_leaf, "smallest leaf");
    app->add_flag("--no-stratify", no_stratify, "plain random split");
  }

  void apply(TrainConfig& t) const {
    if (pool_bins) t.pool_bins = *pool_bins;
    if (test_fraction) t.test_fraction = *test_fraction;
    if (n_trees) t.forest.n_trees = *n_trees;
    if (max_depth) t.forest.max_depth = *max_depth;
    if (min_samples_leaf) t.forest.min_samples_leaf = *min_samples_leaf;
    if (no_stratify) t.stratified = false;
    t.forest.validate();
  }
};

/// Config from --config (or reference/fidelity defaults) with global flags applied.
ScenarioConfig load_config(const Globals& g) {
  ScenarioConfig base = g.fidelity ? fidelity_scenario() : reference_scenario();
  ScenarioConfig c = g.config.empty() ? base : scenario_from_file(g.config, base);
  if (g.swap_iq) c.features.swap_iq = true;
  if (g.no_vmd) c.denoise.mode = DenoiseMode::whole;
  if (g.model) c.train.model = *g.model;
  if (g.pca) c.train.pca_components = *g.pca;
  return c;
}

fs::path require_out(const Globals& g) {
  require(!g.out.empty(), ErrorKind::usage, "missing_out", "--out is required");
  return g.out;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  require(!ec && fs::is_directory(dir), ErrorKind::data, "io", "cannot create directory " + dir.string());
}

fs::path parent_dir(const fs::path& file) {
  const fs::path p = file.parent_path();
  return p.empty() ? fs::path(".") : p;
}

fs::path sibling(const fs::path& file, const std::string& suffix) {
  return parent_dir(file) / (file.stem().string() + suffix);
}

WavEncoding encoding_from_string(const std::string& s) {
  if (s == "float32") return WavEncoding::float32;
  if (s == "pcm16") return WavEncoding::pcm16;
  if (s == "pcm32") return WavEncoding::pcm32;
  fail(ErrorKind::usage, "bad_argument", "unknown encoding '" + s + "'");
}

// ---------------------------------------------------------------------------
// Stages. Each returns the files it wrote so run-all can build one manifest.

std::vector<fs::path> stage_synth(const ScenarioConfig& cfg, const fs::path& dir, WavEncoding enc) {
  ensure_dir(dir);
  std::vector<fs::path> files;
  synthesize_scenario(cfg, [&](const ScenarioRecording& r) {
    const fs::path path = dir / (recording_stem(r.label, r.take) + ".wav");
    write_iq_wav(path, r.recording, enc);
    files.push_back(path);
    const auto it = std::find_if(cfg.profiles.begin(), cfg.profiles.end(),
                                 [&](const GestureProfile& p) { return p.name == r.label; });
    const std::size_t cls = static_cast<std::size_t>(it - cfg.profiles.begin());
    std::printf("%s seed=%llu\n", path.filename().string().c_str(),
                static_cast<unsigned long long>(recording_seed(cfg.seed, cls, r.take)));
  });
  return files;
}

std::vector<fs::path> collect_wavs(const std::vector<std::string>& inputs) {
  std::vector<fs::path> out;
  for (const auto& in : inputs) {
    const fs::path p(in);
    if (fs::is_directory(p)) {
      std::vector<fs::path> found;
      for (const auto& e : fs::directory_iterator(p))
        if (e.is_regular_file() && e.path().extension() == ".wav") found.push_back(e.path());
      std::sort(found.begin(), found.end());
      out.insert(out.end(), found.begin(), found.end());
    } else {
      require(fs::exists(p), ErrorKind::data, "missing_file", "no such input: " + in);
      out.push_back(p);
    }
  }
  require(!out.empty(), ErrorKind::data, "no_inputs", "no wav files found");
  return out;
}

struct FeatureFiles {
  fs::path gesture, noise;
  std::size_t gesture_rows = 0, noise_rows = 0;
};

/// Gesture rows go to `out`; recordings labelled "noise" go to `noise_out`.
FeatureFiles stage_features(const std::vector<fs::path>& wavs, const FeatureConfig& fc, const fs::path& out,
                            const fs::path& noise_out) {
  FeatureSet fs_all;
  for (const auto& w : wavs) {
    const auto [label, take] = parse_recording_stem(w.stem().string());
    require(!label.empty() && !take.empty(), ErrorKind::data, "unlabeled",
            w.filename().string() + ": file names must look like <class>_<take>.wav");
    ScenarioRecording r{label, 0, load_iq_wav(w, fc.swap_iq)};
    add_recording_features(fs_all, r, fc);
  }
  require(!fs_all.gesture.empty(), ErrorKind::data, "no_gesture", "no gesture recordings among the inputs");
  write_aps_csv(out, fs_all.gesture);
  FeatureFiles f{out, {}, fs_all.gesture.size(), fs_all.noise.size()};
  if (!fs_all.noise.empty()) {
    write_aps_csv(noise_out, fs_all.noise);
    f.noise = noise_out;
  }
  return f;
}

std::vector<AveragePowerSpectrum> read_rows(const fs::path& path, bool want_noise) {
  auto rows = read_aps_csv(path);
  std::vector<AveragePowerSpectrum> out;
  for (auto& r : rows)
    if ((r.source == SpectrumSource::noise) == want_noise) out.push_back(std::move(r));
  return out;
}

void check_convergence(const DenoiseStats& st, bool strict) {
  if (st.not_converged == 0) return;
  const std::string msg = std::to_string(st.not_converged) + " of " + std::to_string(st.vmd_runs) +
                          " VMD runs stopped at max_iter";
  if (strict) fail(ErrorKind::numeric, "vmd_not_converged", msg);
  std::fprintf(stderr, "warning code=vmd_not_converged message=%s\n", msg.c_str());
}

struct DenoiseFiles {
  fs::path denoised, bundle_csv, bundle_json;
};

DenoiseFiles stage_denoise(const fs::path& features, const fs::path& noise, const DenoiseConfig& dc,
                           const fs::path& out, bool strict) {
  const auto gesture = read_rows(features, false);
  require(!gesture.empty(), ErrorKind::data, "empty_dataset", features.string() + " holds no gesture rows");
  auto noise_rows = read_aps_csv(noise);
  const AveragePowerSpectrum profile = noise_profile_aps(noise_rows);
  DenoiseStats st;
  const auto denoised = denoise_spectra(gesture, profile, dc, &st);
  check_convergence(st, strict);

  DenoiseFiles f{out, sibling(out, ".bundle.csv"), sibling(out, ".bundle.json")};
  write_aps_csv(out, denoised);
  write_aps_csv(f.bundle_csv, make_bundle(gesture, profile, denoised));
  json vmd = to_json(dc.vmd);
  write_json_file(f.bundle_json, json{{"csv", f.bundle_csv.filename().string()},
                                      {"n_samples", gesture.size()},
                                      {"rows_per_sample", 3},
                                      {"order", {"original", "noise", "denoised"}},
                                      {"mode", to_string(dc.mode)},
                                      {"pairing_threshold", dc.pairing_threshold},
                                      {"vmd", vmd},
                                      {"vmd_runs", st.vmd_runs},
                                      {"vmd_not_converged", st.not_converged}});
  return f;
}

struct TrainFiles {
  fs::path model, report, confusion;
  double accuracy = 0;
};

void write_report(const fs::path& dir, const ml::EvalReport& r, TrainFiles& f) {
  f.report = dir / "report.json";
  f.confusion = dir / "confusion.csv";
  write_json_file(f.report, report_to_json(r));
  write_confusion_csv(f.confusion, r);
  f.accuracy = r.accuracy;
}

TrainFiles stage_train(const fs::path& features, const TrainConfig& tc, const fs::path& dir) {
  ensure_dir(dir);
  const auto rows = read_rows(features, false);
  const auto ds = build_dataset(rows, tc);
  require(ds.n_classes() >= 2, ErrorKind::data, "degenerate_dataset", "training needs at least two classes");
  const Experiment e = run_experiment(ds, tc);
  TrainFiles f;
  f.model = dir / "model.json";
  save_model(f.model, e.model);
  write_report(dir, e.report, f);
  return f;
}

void print_report(const ml::EvalReport& r) {
  std::printf("model=%s accuracy=%.4f n_test=%zu\n", r.model_name.c_str(), r.accuracy, r.n_test);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gesture recognition from wireless-charger EM leakage: synthesis, features, denoising, training."};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "world seed (synth), split/forest seed (train, eval); run-all sets both");
  app.add_option("--config", g.config, "config or manifest JSON");
  app.add_option("--out", g.out, "output file or directory");
  app.add_flag("--swap-iq", g.swap_iq, "wav channel 0 is Q, channel 1 is I");
  app.add_flag("--no-vmd", g.no_vmd, "whole-spectrum subtraction instead of VMD");
  app.add_option("--model", g.model, "classifier")->check(CLI::IsMember({"rf", "knn"}));
  app.add_option("--pca", g.pca, "PCA components for knn (0 = none)");
  app.add_flag("--fidelity", g.fidelity, "20 MHz geometry");
  app.add_flag("--strict", g.strict, "treat VMD non-convergence as an error");

  // synth
  auto* synth = app.add_subcommand("synth", "write one wav per class/take plus a noise wav");
  std::string encoding = "float32";
  synth->add_option("--encoding", encoding, "float32, pcm16 or pcm32")->capture_default_str();

  // features
  auto* features = app.add_subcommand("features", "wav recordings -> APS feature CSV");
  std::vector<std::string> inputs;
  std::string noise_out;
  std::optional<double> trim_start, trim_end, seg_len, sub_len;
  features->add_option("inputs", inputs, "wav files or directories")->required();
  features->add_option("--noise-out", noise_out, "CSV for recordings labelled noise (default noise.csv next to --out)");
  features->add_option("--trim-start", trim_start, "seconds");
  features->add_option("--trim-end", trim_end, "seconds");
  features->add_option("--segment", seg_len, "segment length, seconds");
  features->add_option("--subwindow", sub_len, "sub-window length, seconds");

  // denoise
  auto* denoise = app.add_subcommand("denoise", "subtract the ambient profile from every feature row");
  std::string feat_in, noise_in;
  denoise->add_option("--features", feat_in, "feature CSV")->required();
  denoise->add_option("--noise", noise_in, "noise feature CSV")->required();
  VmdOverrides vmd_over;
  vmd_over.add_to(denoise);

  // train
  auto* train = app.add_subcommand("train", "split, fit and evaluate");
  std::string train_in;
  train->add_option("--features", train_in, "feature CSV (denoised or raw)")->required();
  TrainOverrides train_over;
  train_over.add_to(train);

  // eval
  auto* eval = app.add_subcommand("eval", "evaluate a saved model");
  std::string model_file, eval_in;
  bool eval_all = false;
  eval->add_option("--model-file", model_file, "model JSON")->required();
  eval->add_option("--features", eval_in, "feature CSV")->required();
  eval->add_flag("--all", eval_all, "score every row instead of the model's held-out split");

  // plot
  auto* plot = app.add_subcommand("plot", "emit tidy plot data (x,y,series)");
  std::string kind, plot_in, svg;
  std::size_t index = 0;
  int points = 4;
  std::optional<double> conductivity, frequency;
  plot->add_option("--kind", kind, "spectrum, confusion, convergence or decay")->required();
  plot->add_option("--in", plot_in, "bundle CSV (spectrum), report JSON (confusion), feature CSV (convergence)");
  plot->add_option("--svg", svg, "also render an SVG here");
  plot->add_option("--index", index, "sample index (spectrum, convergence)");
  plot->add_option("--points", points, "decay: distances 0, delta, ... (count)");
  plot->add_option("--conductivity", conductivity, "decay: S/m (default from config)");
  plot->add_option("--frequency", frequency, "decay: Hz (default first carrier)");
  VmdOverrides plot_vmd;
  plot_vmd.add_to(plot);

  // run-all
  auto* run_all = app.add_subcommand("run-all", "synth -> features -> denoise -> train -> eval into --out");
  run_all->add_option("--encoding", encoding, "wav encoding")->capture_default_str();
  VmdOverrides run_vmd;
  run_vmd.add_to(run_all);
  TrainOverrides run_train;
  run_train.add_to(run_all);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::Error& e) {
    std::string msg = e.what();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    std::fprintf(stderr, "error kind=usage code=bad_arguments message=%s\n", msg.c_str());
    return static_cast<int>(ErrorKind::usage);
  }

  try {
    ScenarioConfig cfg = load_config(g);

    if (synth->parsed()) {
      if (g.seed) cfg.seed = *g.seed;
      cfg.validate();
      const fs::path dir = require_out(g);
      const auto files = stage_synth(cfg, dir, encoding_from_string(encoding));
      Manifest m(dir, to_json(cfg));
      for (const auto& f : files) m.add_output("synth", f);
      m.finalize(dir / "manifest.json");
    } else if (features->parsed()) {
      if (trim_start) cfg.features.trim_start_s = *trim_start;
      if (trim_end) cfg.features.trim_end_s = *trim_end;
      if (seg_len) cfg.features.segment_s = *seg_len;
      if (sub_len) cfg.features.subwindow_s = *sub_len;
      const fs::path out = require_out(g);
      ensure_dir(parent_dir(out));
      const fs::path nout = noise_out.empty() ? parent_dir(out) / "noise.csv" : fs::path(noise_out);
      const auto f = stage_features(collect_wavs(inputs), cfg.features, out, nout);
      std::printf("rows=%zu noise_rows=%zu\n", f.gesture_rows, f.noise_rows);
      Manifest m(parent_dir(out), to_json(cfg));
      m.add_output("features", f.gesture);
      if (!f.noise.empty()) m.add_output("features", f.noise);
      m.finalize(sibling(out, ".manifest.json"));
    } else if (denoise->parsed()) {
      vmd_over.apply(cfg.denoise);
      if (g.no_vmd) cfg.denoise.mode = DenoiseMode::whole;
      const fs::path out = require_out(g);
      ensure_dir(parent_dir(out));
      const auto f = stage_denoise(feat_in, noise_in, cfg.denoise, out, g.strict);
      Manifest m(parent_dir(out), to_json(cfg));
      m.add_output("denoise", f.denoised);
      m.add_output("denoise", f.bundle_csv);
      m.add_output("denoise", f.bundle_json);
      m.finalize(sibling(out, ".manifest.json"));
    } else if (train->parsed()) {
      if (g.seed) cfg.train.seed = *g.seed;
      train_over.apply(cfg.train);
      const fs::path dir = require_out(g);
      const auto f = stage_train(train_in, cfg.train, dir);
      print_report(report_from_json(read_json_file(f.report)));
      Manifest m(dir, to_json(cfg));
      m.add_output("train", f.model);
      m.add_output("train", f.report);
      m.add_output("train", f.confusion);
      m.finalize(dir / "manifest.json");
    } else if (eval->parsed()) {
      const fs::path dir = require_out(g);
      ensure_dir(dir);
      const TrainedModel model = load_model(model_file);
      const auto rows = read_rows(eval_in, false);
      // Same pooling as training: the raw row length over the model's width.
      ml::LabeledDataset ds = ml::pool_features(ml::dataset_from_spectra(rows, gesture_class_names()), model.n_dims());
      if (!eval_all) {
        const auto split = ml::split_indices(ds, model.test_fraction, g.seed.value_or(model.seed), model.stratified);
        ds = ds.subset(split.test);
      }
      const std::string name = model.kind == "rf"
                                   ? "random-forest"
                                   : (model.knn->pca ? "knn-pca" + std::to_string(model.knn->pca->n_components) : "knn");
      const auto report = evaluate_model(model, ds, name);
      TrainFiles f;
      write_report(dir, report, f);
      print_report(report);
    } else if (plot->parsed()) {
      const PlotKind pk = plot_kind_from_string(kind);
      const fs::path out = require_out(g);
      ensure_dir(parent_dir(out));
      std::vector<Series> series;
      bool log_y = false;
      std::optional<ml::EvalReport> report;
      std::string title = kind;
      if (pk != PlotKind::decay) require(!plot_in.empty(), ErrorKind::usage, "missing_input", "--in is required");
      switch (pk) {
        case PlotKind::decay: {
          const double sigma = conductivity.value_or(cfg.synth.conductivity_s_per_m);
          require(frequency || !cfg.synth.carrier_bands.empty(), ErrorKind::usage, "bad_argument", "--frequency needed");
          const double f = frequency.value_or(cfg.synth.carrier_bands.front().center_hz);
          const double delta = skin_depth(sigma, f);
          series = decay_series(delta, points);
          title = "attenuation vs distance, skin depth " + format_double(delta) + " m";
          break;
        }
        case PlotKind::spectrum: {
          const auto rows = read_aps_csv(plot_in);
          const auto s = bundle_sample(rows, index);
          const std::vector<AveragePowerSpectrum> spectra{s.original, s.noise, s.denoised};
          const std::vector<std::string> names{"original", "noise", "denoised"};
          series = spectrum_series(spectra, names);
          log_y = true;
          title = "sample " + std::to_string(index) + " (" + s.original.label.value_or("") + ")";
          break;
        }
        case PlotKind::confusion:
          report = report_from_json(read_json_file(plot_in));
          series = confusion_series(*report);
          break;
        case PlotKind::convergence: {
          plot_vmd.apply(cfg.denoise);
          const auto rows = read_aps_csv(plot_in);
          require(index < rows.size(), ErrorKind::usage, "bounds", "--index past the last row");
          std::vector<VmdIteration> trace;
          vmd_decompose(rows[index].power, cfg.denoise.vmd, [&](const VmdIteration& it) { trace.push_back(it); });
          series = convergence_series(trace);
          log_y = true;
          title = "VMD convergence, row " + std::to_string(index);
          break;
        }
      }
      write_tidy_csv(out, series);
      if (!svg.empty()) {
        if (report) {
          write_svg_confusion(svg, *report);
        } else {
          write_svg_lines(svg, series, title, log_y);
        }
      }
    } else if (run_all->parsed()) {
      if (g.seed) cfg.seed = cfg.train.seed = *g.seed;
      run_vmd.apply(cfg.denoise);
      if (g.no_vmd) cfg.denoise.mode = DenoiseMode::whole;
      run_train.apply(cfg.train);
      cfg.validate();
      const fs::path dir = require_out(g);
      ensure_dir(dir);
      Manifest m(dir, to_json(cfg));

      const auto wavs = stage_synth(cfg, dir / "wav", encoding_from_string(encoding));
      for (const auto& w : wavs) m.add_output("synth", w);
      m.stage("synth")["wav_encoding"] = encoding;

      const auto ff = stage_features(wavs, cfg.features, dir / "features.csv", dir / "noise.csv");
      m.add_output("features", ff.gesture);
      m.add_output("features", ff.noise);
      m.stage("features")["rows"] = ff.gesture_rows;

      const auto df = stage_denoise(ff.gesture, ff.noise, cfg.denoise, dir / "denoised.csv", g.strict);
      m.add_output("denoise", df.denoised);
      m.add_output("denoise", df.bundle_csv);
      m.add_output("denoise", df.bundle_json);

      const auto tf = stage_train(df.denoised, cfg.train, dir);
      m.add_output("train", tf.model);
      m.add_output("train", tf.report);
      m.add_output("train", tf.confusion);
      m.stage("train")["accuracy"] = tf.accuracy;

      const fs::path plots = dir / "plots";
      ensure_dir(plots);
      const auto report = report_from_json(read_json_file(tf.report));
      write_tidy_csv(plots / "confusion.csv", confusion_series(report));
      write_svg_confusion(plots / "confusion.svg", report);
      const auto bundle = read_aps_csv(df.bundle_csv);
      const auto s0 = bundle_sample(bundle, 0);
      const std::vector<AveragePowerSpectrum> spectra{s0.original, s0.noise, s0.denoised};
      const std::vector<std::string> names{"original", "noise", "denoised"};
      write_tidy_csv(plots / "spectrum.csv", spectrum_series(spectra, names));
      write_tidy_csv(plots / "decay.csv",
                     decay_series(skin_depth(cfg.synth.conductivity_s_per_m, cfg.synth.carrier_bands.front().center_hz)));
      for (const char* p : {"confusion.csv", "confusion.svg", "spectrum.csv", "decay.csv"})
        m.add_output("plot", plots / p);

      m.finalize(dir / "manifest.json");
      print_report(report);
    }
  } catch (const Error& e) {
    std::string msg = e.what();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    std::fprintf(stderr, "error kind=%s code=%s message=%s\n", to_string(e.kind()), e.code().c_str(), msg.c_str());
    return static_cast<int>(e.kind());
  } catch (const std::exception& e) {
    std::string msg = e.what();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    std::fprintf(stderr, "error kind=data code=internal message=%s\n", msg.c_str());
    return static_cast<int>(ErrorKind::data);
  }
  return 0;
}
