#pragma once

// On-disk formats for models, reports, denoise bundles and run manifests.
// All writers emit keys in a fixed order and doubles in shortest round-trip
// form, so identical inputs give identical bytes.

#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "emgesture/config.hpp"
#include "emgesture/pipeline.hpp"

namespace emg {

inline constexpr const char* kModelFormat = "emgesture-model";
inline constexpr int kModelVersion = 1;

namespace detail {

template <class T>
T get_field(const json& j, const char* key, const std::string& where) {
  require(j.is_object() && j.contains(key), ErrorKind::data, "bad_model", where + ": missing '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    fail(ErrorKind::data, "bad_model", where + ": bad '" + key + "': " + e.what());
  }
}

inline json meta_to_json(const ml::FeatureMeta& m) {
  return json{{"bin_width_hz", m.bin_width_hz}, {"n_subwindows", m.n_subwindows}, {"pool_width", m.pool_width}};
}

inline ml::FeatureMeta meta_from_json(const json& j) {
  ml::FeatureMeta m;
  m.bin_width_hz = get_field<double>(j, "bin_width_hz", "feature_meta");
  m.n_subwindows = get_field<std::size_t>(j, "n_subwindows", "feature_meta");
  m.pool_width = get_field<std::size_t>(j, "pool_width", "feature_meta");
  return m;
}

inline json tree_to_json(const ml::DecisionTree& t) {
  json feature = json::array(), threshold = json::array(), left = json::array(), right = json::array(),
       n_samples = json::array(), histogram = json::array();
  for (const auto& n : t.nodes) {
    feature.push_back(n.feature);
    threshold.push_back(n.threshold);
    left.push_back(n.left);
    right.push_back(n.right);
    n_samples.push_back(n.n_samples);
    histogram.push_back(n.histogram);
  }
  return json{{"feature", feature}, {"threshold", threshold}, {"left", left},
              {"right", right},     {"n_samples", n_samples}, {"histogram", histogram}};
}

inline ml::DecisionTree tree_from_json(const json& j, std::size_t n_dims, std::size_t n_classes) {
  const auto feature = get_field<std::vector<int>>(j, "feature", "tree");
  const auto threshold = get_field<std::vector<double>>(j, "threshold", "tree");
  const auto left = get_field<std::vector<int>>(j, "left", "tree");
  const auto right = get_field<std::vector<int>>(j, "right", "tree");
  const auto n_samples = get_field<std::vector<std::size_t>>(j, "n_samples", "tree");
  const auto histogram = get_field<std::vector<std::vector<int>>>(j, "histogram", "tree");
  const std::size_t n = feature.size();
  require(n > 0 && threshold.size() == n && left.size() == n && right.size() == n && n_samples.size() == n &&
              histogram.size() == n,
          ErrorKind::data, "bad_model", "tree arrays differ in length");
  ml::DecisionTree t;
  t.nodes.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& node = t.nodes[i];
    node.feature = feature[i];
    node.threshold = threshold[i];
    node.left = left[i];
    node.right = right[i];
    node.n_samples = n_samples[i];
    node.histogram = histogram[i];
    if (node.is_leaf()) {
      require(node.histogram.size() == n_classes, ErrorKind::data, "bad_model", "leaf histogram has wrong length");
    } else {
      // Children always come after their parent, which also rules out cycles.
      require(static_cast<std::size_t>(node.feature) < n_dims, ErrorKind::data, "bad_model",
              "split feature out of range");
      require(node.left > static_cast<int>(i) && node.right > static_cast<int>(i) &&
                  static_cast<std::size_t>(node.left) < n && static_cast<std::size_t>(node.right) < n,
              ErrorKind::data, "bad_model", "bad child index");
    }
  }
  return t;
}

inline json dataset_to_json(const ml::LabeledDataset& ds) {
  return json{{"n_dims", ds.n_dims}, {"labels", ds.labels}, {"features", ds.features}};
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Models

inline json model_to_json(const TrainedModel& m) {
  json j{{"format", kModelFormat},
         {"version", kModelVersion},
         {"kind", m.kind},
         {"class_names", m.class_names},
         {"feature_meta", detail::meta_to_json(m.meta)},
         {"split", {{"seed", m.seed}, {"test_fraction", m.test_fraction}, {"stratified", m.stratified}}}};
  if (m.forest) {
    const auto& f = *m.forest;
    json trees = json::array();
    for (const auto& t : f.trees) trees.push_back(detail::tree_to_json(t));
    j["forest"] = json{{"params", to_json(f.params)},
                       {"n_dims", f.n_dims},
                       {"degenerate", f.degenerate},
                       {"oob_estimate", f.oob_estimate ? json(*f.oob_estimate) : json(nullptr)},
                       {"trees", trees}};
  }
  if (m.knn) {
    const auto& k = *m.knn;
    json pca = nullptr;
    if (k.pca) {
      pca = json{{"n_dims", k.pca->n_dims},
                 {"n_components", k.pca->n_components},
                 {"mean", k.pca->mean},
                 {"components", k.pca->components},
                 {"eigenvalues", k.pca->eigenvalues},
                 {"explained_variance_ratio", k.pca->explained_variance_ratio}};
    }
    j["knn"] = json{{"k", k.k}, {"n_dims", k.n_dims}, {"pca", pca}, {"train", detail::dataset_to_json(k.train)}};
  }
  return j;
}

inline TrainedModel model_from_json(const json& j) {
  using detail::get_field;
  require(j.is_object() && j.value("format", "") == kModelFormat, ErrorKind::data, "bad_model",
          "not an emgesture model file");
  require(j.value("version", 0) == kModelVersion, ErrorKind::data, "bad_model", "unsupported model version");
  TrainedModel m;
  m.kind = get_field<std::string>(j, "kind", "model");
  m.class_names = get_field<std::vector<std::string>>(j, "class_names", "model");
  require(m.class_names.size() >= 1, ErrorKind::data, "bad_model", "model lists no classes");
  m.meta = detail::meta_from_json(j.at("feature_meta"));
  const json& split = j.at("split");
  m.seed = get_field<std::uint64_t>(split, "seed", "split");
  m.test_fraction = get_field<double>(split, "test_fraction", "split");
  m.stratified = get_field<bool>(split, "stratified", "split");

  if (m.kind == "rf") {
    require(j.contains("forest"), ErrorKind::data, "bad_model", "rf model without a forest");
    const json& fj = j.at("forest");
    ml::ForestModel f;
    try {
      f.params = forest_params_from_json(fj.at("params"));
    } catch (const Error& e) {
      fail(ErrorKind::data, "bad_model", e.what());
    }
    f.params.seed = m.seed;
    f.n_dims = get_field<std::size_t>(fj, "n_dims", "forest");
    f.degenerate = get_field<bool>(fj, "degenerate", "forest");
    if (fj.contains("oob_estimate") && !fj.at("oob_estimate").is_null())
      f.oob_estimate = get_field<double>(fj, "oob_estimate", "forest");
    f.class_names = m.class_names;
    f.meta = m.meta;
    const json& trees = fj.at("trees");
    require(trees.is_array() && !trees.empty(), ErrorKind::data, "bad_model", "forest has no trees");
    for (const auto& t : trees) f.trees.push_back(detail::tree_from_json(t, f.n_dims, m.class_names.size()));
    m.forest = std::move(f);
  } else if (m.kind == "knn") {
    require(j.contains("knn"), ErrorKind::data, "bad_model", "knn model without neighbours");
    const json& kj = j.at("knn");
    KnnModel k;
    k.k = get_field<std::size_t>(kj, "k", "knn");
    k.n_dims = get_field<std::size_t>(kj, "n_dims", "knn");
    const json& pj = kj.at("pca");
    if (!pj.is_null()) {
      ml::PcaModel p;
      p.n_dims = get_field<std::size_t>(pj, "n_dims", "pca");
      p.n_components = get_field<std::size_t>(pj, "n_components", "pca");
      p.mean = get_field<std::vector<double>>(pj, "mean", "pca");
      p.components = get_field<std::vector<double>>(pj, "components", "pca");
      p.eigenvalues = get_field<std::vector<double>>(pj, "eigenvalues", "pca");
      p.explained_variance_ratio = get_field<std::vector<double>>(pj, "explained_variance_ratio", "pca");
      require(p.n_dims == k.n_dims && p.mean.size() == p.n_dims && p.components.size() == p.n_dims * p.n_components,
              ErrorKind::data, "bad_model", "PCA arrays have the wrong size");
      k.pca = std::move(p);
    }
    const json& tj = kj.at("train");
    k.train.n_dims = get_field<std::size_t>(tj, "n_dims", "knn.train");
    k.train.labels = get_field<std::vector<int>>(tj, "labels", "knn.train");
    k.train.features = get_field<std::vector<double>>(tj, "features", "knn.train");
    k.train.class_names = m.class_names;
    k.train.meta = m.meta;
    require(k.train.n_dims == (k.pca ? k.pca->n_components : k.n_dims), ErrorKind::data, "bad_model",
            "stored neighbours have the wrong dimension");
    k.train.validate();
    require(k.k >= 1 && k.k <= k.train.size(), ErrorKind::data, "bad_model", "k out of range");
    m.knn = std::move(k);
  } else {
    fail(ErrorKind::data, "bad_model", "unknown model kind '" + m.kind + "'");
  }
  return m;
}

inline void save_model(const std::filesystem::path& path, const TrainedModel& m) {
  write_json_file(path, model_to_json(m));
}

inline TrainedModel load_model(const std::filesystem::path& path) { return model_from_json(read_json_file(path)); }

// ---------------------------------------------------------------------------
// Reports

inline json report_to_json(const ml::EvalReport& r) {
  return json{{"model", r.model_name},           {"accuracy", r.accuracy},
              {"n_test", r.n_test},              {"class_names", r.class_names},
              {"confusion", r.confusion},        {"per_class_recall", r.per_class_recall}};
}

inline ml::EvalReport report_from_json(const json& j) {
  using detail::get_field;
  ml::EvalReport r;
  r.model_name = get_field<std::string>(j, "model", "report");
  r.accuracy = get_field<double>(j, "accuracy", "report");
  r.n_test = get_field<std::size_t>(j, "n_test", "report");
  r.class_names = get_field<std::vector<std::string>>(j, "class_names", "report");
  r.confusion = get_field<std::vector<std::vector<std::size_t>>>(j, "confusion", "report");
  r.per_class_recall = get_field<std::vector<double>>(j, "per_class_recall", "report");
  require(r.confusion.size() == r.class_names.size(), ErrorKind::data, "bad_report", "confusion size mismatch");
  for (const auto& row : r.confusion)
    require(row.size() == r.class_names.size(), ErrorKind::data, "bad_report", "confusion size mismatch");
  return r;
}

/// Matrix layout: header "true\predicted,<classes>", one row per true class.
inline void write_confusion_csv(const std::filesystem::path& path, const ml::EvalReport& r) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::data, "io", "cannot write " + path.string());
  out << "true\\predicted";
  for (const auto& c : r.class_names) out << ',' << c;
  out << '\n';
  for (std::size_t i = 0; i < r.confusion.size(); ++i) {
    out << r.class_names[i];
    for (std::size_t v : r.confusion[i]) out << ',' << v;
    out << '\n';
  }
  if (!out) fail(ErrorKind::data, "io", "failed writing " + path.string());
}

// ---------------------------------------------------------------------------
// Denoise bundles: three CSV rows per sample (original, noise profile,
// denoised), each carrying the sample's label.

inline std::vector<AveragePowerSpectrum> make_bundle(std::span<const AveragePowerSpectrum> original,
                                                     const AveragePowerSpectrum& noise,
                                                     std::span<const AveragePowerSpectrum> denoised) {
  require(original.size() == denoised.size(), ErrorKind::data, "dimension_mismatch",
          "original and denoised sample counts differ");
  std::vector<AveragePowerSpectrum> rows;
  rows.reserve(original.size() * 3);
  for (std::size_t i = 0; i < original.size(); ++i) {
    AveragePowerSpectrum o = original[i], n = noise, d = denoised[i];
    o.source = SpectrumSource::gesture;
    n.source = SpectrumSource::noise;
    d.source = SpectrumSource::denoised;
    n.label = o.label;
    rows.push_back(std::move(o));
    rows.push_back(std::move(n));
    rows.push_back(std::move(d));
  }
  return rows;
}

struct BundleSample {
  AveragePowerSpectrum original, noise, denoised;
};

inline BundleSample bundle_sample(std::span<const AveragePowerSpectrum> rows, std::size_t index) {
  require(rows.size() % 3 == 0, ErrorKind::data, "bad_bundle", "bundle row count is not a multiple of 3");
  require(index < rows.size() / 3, ErrorKind::usage, "bounds",
          "sample " + std::to_string(index) + " not in bundle of " + std::to_string(rows.size() / 3));
  BundleSample s{rows[3 * index], rows[3 * index + 1], rows[3 * index + 2]};
  require(s.original.source == SpectrumSource::gesture && s.noise.source == SpectrumSource::noise &&
              s.denoised.source == SpectrumSource::denoised,
          ErrorKind::data, "bad_bundle", "bundle rows are not in original/noise/denoised order");
  return s;
}

// ---------------------------------------------------------------------------
// Run manifests

/// FNV-1a over the canonical config dump; names a run by what it computes.
inline std::string run_id_for(const json& config) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : config.dump()) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline std::string utc_timestamp() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Stage outputs are stored relative to the manifest's directory.
class Manifest {
 public:
  Manifest(std::filesystem::path dir, const json& config) : dir_(std::move(dir)) {
    j_ = json{{"run_id", run_id_for(config)},
              {"config", config},
              {"stages", json::object()},
              {"started_utc", utc_timestamp()},
              {"finished_utc", nullptr}};
  }

  json& stage(const std::string& name) {
    auto& s = j_["stages"][name];
    if (s.is_null()) s = json{{"outputs", json::array()}};
    return s;
  }

  void add_output(const std::string& stage_name, const std::filesystem::path& file) {
    stage(stage_name)["outputs"].push_back(std::filesystem::relative(file, dir_).generic_string());
  }

  /// Checks every listed output exists, stamps the finish time and writes the file.
  void finalize(const std::filesystem::path& path) {
    for (const auto& [name, s] : j_["stages"].items())
      for (const auto& f : s["outputs"])
        require(std::filesystem::exists(dir_ / f.get<std::string>()), ErrorKind::data, "missing_output",
                "stage '" + name + "' output missing: " + f.get<std::string>());
    j_["finished_utc"] = utc_timestamp();
    write_json_file(path, j_);
  }

  const json& data() const { return j_; }

 private:
  std::filesystem::path dir_;
  json j_;
};

/// Accepts either a bare config object or a manifest holding one under "config".
inline ScenarioConfig scenario_from_file(const std::filesystem::path& path, ScenarioConfig base) {
  const json j = read_json_file(path);
  if (j.is_object() && j.contains("run_id") && j.contains("config")) return scenario_from_json(j.at("config"), base);
  return scenario_from_json(j, base);
}

}  // namespace emg
