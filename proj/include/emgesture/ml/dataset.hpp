#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "emgesture/error.hpp"
#include "emgesture/spectrum.hpp"

namespace emg::ml {

struct FeatureMeta {
  double bin_width_hz = 0.0;
  std::size_t n_subwindows = 0;
  std::size_t pool_width = 1;
};

/// Row-major feature matrix with integer class labels.
struct LabeledDataset {
  std::vector<double> features;
  std::size_t n_dims = 0;
  std::vector<int> labels;
  std::vector<std::string> class_names;
  FeatureMeta meta;

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t n_classes() const noexcept { return class_names.size(); }

  std::span<const double> row(std::size_t i) const {
    return {features.data() + i * n_dims, n_dims};
  }

  void validate() const {
    require(features.size() == labels.size() * n_dims, ErrorKind::data, "bad_dataset",
            "feature matrix does not match label count");
    for (int y : labels)
      require(y >= 0 && static_cast<std::size_t>(y) < class_names.size(), ErrorKind::data, "bad_dataset",
              "label out of range");
  }

  std::vector<std::size_t> class_counts() const {
    std::vector<std::size_t> counts(class_names.size(), 0);
    for (int y : labels) ++counts[static_cast<std::size_t>(y)];
    return counts;
  }

  LabeledDataset subset(std::span<const std::size_t> indices) const {
    LabeledDataset out;
    out.n_dims = n_dims;
    out.class_names = class_names;
    out.meta = meta;
    out.features.reserve(indices.size() * n_dims);
    for (std::size_t i : indices) {
      auto r = row(i);
      out.features.insert(out.features.end(), r.begin(), r.end());
      out.labels.push_back(labels[i]);
    }
    return out;
  }
};

/// Class order: names found in `preferred` keep that order, others follow sorted.
inline std::vector<std::string> order_class_names(const std::vector<std::string>& found,
                                                  const std::vector<std::string>& preferred) {
  std::vector<std::string> out;
  for (const auto& p : preferred)
    if (std::find(found.begin(), found.end(), p) != found.end()) out.push_back(p);
  std::vector<std::string> rest;
  for (const auto& f : found)
    if (std::find(preferred.begin(), preferred.end(), f) == preferred.end() &&
        std::find(rest.begin(), rest.end(), f) == rest.end())
      rest.push_back(f);
  std::sort(rest.begin(), rest.end());
  out.insert(out.end(), rest.begin(), rest.end());
  return out;
}

/// One labelled spectrum per sample.
inline LabeledDataset dataset_from_spectra(std::span<const AveragePowerSpectrum> spectra,
                                           const std::vector<std::string>& preferred_order = {}) {
  require(!spectra.empty(), ErrorKind::data, "empty_dataset", "no spectra to build a dataset from");
  std::vector<std::string> found;
  for (const auto& s : spectra) {
    require(s.label.has_value() && !s.label->empty(), ErrorKind::data, "unlabeled", "spectrum without a label");
    found.push_back(*s.label);
  }
  LabeledDataset ds;
  ds.class_names = order_class_names(found, preferred_order);
  ds.n_dims = spectra.front().size();
  ds.meta = {spectra.front().bin_width_hz, spectra.front().n_subwindows, 1};
  ds.features.reserve(spectra.size() * ds.n_dims);
  for (const auto& s : spectra) {
    require(s.size() == ds.n_dims, ErrorKind::data, "dimension_mismatch", "spectra differ in length");
    ds.features.insert(ds.features.end(), s.power.begin(), s.power.end());
    auto it = std::find(ds.class_names.begin(), ds.class_names.end(), *s.label);
    ds.labels.push_back(static_cast<int>(it - ds.class_names.begin()));
  }
  return ds;
}

/// Max-pools every row into at most `target_bins` features.
inline LabeledDataset pool_features(const LabeledDataset& ds, std::size_t target_bins) {
  if (ds.n_dims <= target_bins) return ds;
  LabeledDataset out;
  out.class_names = ds.class_names;
  out.labels = ds.labels;
  out.meta = ds.meta;
  std::size_t width = 1;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    auto pooled = max_pool(ds.row(i), target_bins, &width);
    out.n_dims = pooled.size();
    out.features.insert(out.features.end(), pooled.begin(), pooled.end());
  }
  out.meta.pool_width = ds.meta.pool_width * width;
  return out;
}

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Stratified: class c contributes floor(n_c f) test samples plus one more for
/// the classes with the largest remainders until round(n f) is reached, so every
/// class lands within one of round(n_c f).
inline Split split_indices(const LabeledDataset& ds, double test_fraction, std::uint64_t seed,
                           bool stratified = true) {
  require(test_fraction > 0 && test_fraction < 1, ErrorKind::usage, "bad_argument",
          "test fraction must lie in (0, 1)");
  ds.validate();
  std::mt19937_64 rng(seed);
  Split split;
  std::vector<bool> in_test(ds.size(), false);

  if (!stratified) {
    require(ds.size() >= 2, ErrorKind::data, "too_few_samples", "need at least two samples to split");
    std::vector<std::size_t> all(ds.size());
    std::iota(all.begin(), all.end(), 0);
    std::shuffle(all.begin(), all.end(), rng);
    auto n_test = static_cast<std::size_t>(std::llround(static_cast<double>(ds.size()) * test_fraction));
    n_test = std::clamp<std::size_t>(n_test, 1, ds.size() - 1);
    for (std::size_t i = 0; i < n_test; ++i) in_test[all[i]] = true;
  } else {
    const auto counts = ds.class_counts();
    std::vector<std::vector<std::size_t>> members(ds.n_classes());
    for (std::size_t i = 0; i < ds.size(); ++i) members[static_cast<std::size_t>(ds.labels[i])].push_back(i);

    std::vector<std::size_t> quota(ds.n_classes(), 0);
    std::vector<double> remainder(ds.n_classes(), -1.0);
    std::size_t allocated = 0, total = 0;
    for (std::size_t c = 0; c < ds.n_classes(); ++c) {
      if (counts[c] == 0) continue;
      require(counts[c] >= 2, ErrorKind::data, "too_few_samples",
              "class '" + ds.class_names[c] + "' has fewer than two samples");
      const double exact = static_cast<double>(counts[c]) * test_fraction;
      quota[c] = std::clamp<std::size_t>(static_cast<std::size_t>(std::floor(exact)), 1, counts[c] - 1);
      remainder[c] = exact - std::floor(exact);
      allocated += quota[c];
      total += counts[c];
    }
    const auto target = static_cast<std::size_t>(std::llround(static_cast<double>(total) * test_fraction));
    // Largest remainder first; ties go in a seed-dependent class order.
    std::vector<std::size_t> order(ds.n_classes());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
    for (std::size_t c : order) {
      if (allocated >= target) break;
      if (counts[c] == 0 || quota[c] + 1 >= counts[c]) continue;
      ++quota[c];
      ++allocated;
    }
    for (std::size_t c = 0; c < ds.n_classes(); ++c) {
      auto& m = members[c];
      std::shuffle(m.begin(), m.end(), rng);
      for (std::size_t i = 0; i < quota[c]; ++i) in_test[m[i]] = true;
    }
  }
  for (std::size_t i = 0; i < ds.size(); ++i) (in_test[i] ? split.test : split.train).push_back(i);
  return split;
}

inline std::pair<LabeledDataset, LabeledDataset> train_test_split(const LabeledDataset& ds, double test_fraction,
                                                                  std::uint64_t seed, bool stratified = true) {
  const Split s = split_indices(ds, test_fraction, seed, stratified);
  return {ds.subset(s.train), ds.subset(s.test)};
}

}  // namespace emg::ml
