#pragma once

// PCA by power iteration with Hotelling deflation. When there are fewer
// samples than dimensions the eigenproblem is solved on the n x n Gram matrix
// and mapped back to feature space; both routes share the same non-zero
// eigenvalues.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "emgesture/error.hpp"
#include "emgesture/ml/dataset.hpp"

namespace emg::ml {

struct PcaModel {
  std::vector<double> mean;
  std::vector<double> components;  // n_components x n_dims, row-major, unit rows
  std::vector<double> eigenvalues;  // sample-covariance eigenvalues, descending
  std::vector<double> explained_variance_ratio;
  std::size_t n_dims = 0;
  std::size_t n_components = 0;

  std::span<const double> component(std::size_t i) const { return {components.data() + i * n_dims, n_dims}; }
};

struct EigenPair {
  double value = 0.0;
  std::vector<double> vector;
};

/// Leading eigenpairs of a symmetric positive semi-definite matrix (row-major,
/// size m x m). Each pair is refined until successive unit vectors differ by
/// less than `tol`, then deflated out of the matrix.
inline std::vector<EigenPair> top_eigenpairs(std::vector<double> a, std::size_t m, std::size_t count,
                                             double tol = 1e-10, int max_iter = 5000) {
  std::vector<EigenPair> out;
  std::vector<double> v(m), w(m);
  for (std::size_t c = 0; c < count; ++c) {
    // Deterministic start that is unlikely to be orthogonal to any eigenvector.
    for (std::size_t i = 0; i < m; ++i) v[i] = 1.0 + 0.01 * static_cast<double>((i * 7919 + c * 104729) % 101);
    for (const auto& prev : out) {
      const double dot = std::inner_product(v.begin(), v.end(), prev.vector.begin(), 0.0);
      for (std::size_t i = 0; i < m; ++i) v[i] -= dot * prev.vector[i];
    }
    double norm = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
    for (auto& x : v) x /= norm;

    double lambda = 0.0;
    for (int it = 0; it < max_iter; ++it) {
      for (std::size_t i = 0; i < m; ++i) {
        const double* row = a.data() + i * m;
        w[i] = std::inner_product(row, row + m, v.begin(), 0.0);
      }
      for (const auto& prev : out) {
        const double dot = std::inner_product(w.begin(), w.end(), prev.vector.begin(), 0.0);
        for (std::size_t i = 0; i < m; ++i) w[i] -= dot * prev.vector[i];
      }
      lambda = std::inner_product(w.begin(), w.end(), v.begin(), 0.0);
      norm = std::sqrt(std::inner_product(w.begin(), w.end(), w.begin(), 0.0));
      if (norm <= 0.0) break;  // remaining spectrum is zero
      double change = 0.0;
      for (std::size_t i = 0; i < m; ++i) {
        const double next = w[i] / norm;
        change += (next - v[i]) * (next - v[i]);
        v[i] = next;
      }
      if (std::sqrt(change) < tol) break;
    }
    lambda = std::max(lambda, 0.0);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j) a[i * m + j] -= lambda * v[i] * v[j];
    out.push_back({lambda, v});
  }
  return out;
}

inline PcaModel pca_fit(const LabeledDataset& train, std::size_t n_components, double tol = 1e-10) {
  const std::size_t n = train.size();
  const std::size_t d = train.n_dims;
  require(n_components >= 1, ErrorKind::usage, "bad_argument", "need at least one component");
  require(n >= 2, ErrorKind::data, "too_few_samples", "PCA needs at least two samples");
  require(n_components <= std::min(n, d), ErrorKind::usage, "too_many_components",
          "n_components must not exceed min(n_samples, n_dims)");

  PcaModel model;
  model.n_dims = d;
  model.n_components = n_components;
  model.mean.assign(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    auto r = train.row(i);
    for (std::size_t j = 0; j < d; ++j) model.mean[j] += r[j];
  }
  for (auto& m : model.mean) m /= static_cast<double>(n);

  std::vector<double> centered(n * d);
  for (std::size_t i = 0; i < n; ++i) {
    auto r = train.row(i);
    for (std::size_t j = 0; j < d; ++j) centered[i * d + j] = r[j] - model.mean[j];
  }
  const double scale = 1.0 / static_cast<double>(n - 1);
  double total_variance = 0.0;
  for (double x : centered) total_variance += x * x;
  total_variance *= scale;

  const bool use_gram = n < d;
  const std::size_t m = use_gram ? n : d;
  std::vector<double> mat(m * m, 0.0);
  if (use_gram) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i; j < n; ++j) {
        const double s = std::inner_product(centered.begin() + static_cast<std::ptrdiff_t>(i * d),
                                            centered.begin() + static_cast<std::ptrdiff_t>((i + 1) * d),
                                            centered.begin() + static_cast<std::ptrdiff_t>(j * d), 0.0) *
                         scale;
        mat[i * n + j] = mat[j * n + i] = s;
      }
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      const double* r = centered.data() + i * d;
      for (std::size_t a = 0; a < d; ++a)
        for (std::size_t b = a; b < d; ++b) mat[a * d + b] += r[a] * r[b] * scale;
    }
    for (std::size_t a = 0; a < d; ++a)
      for (std::size_t b = 0; b < a; ++b) mat[a * d + b] = mat[b * d + a];
  }

  const auto pairs = top_eigenpairs(std::move(mat), m, n_components, tol);
  model.components.assign(n_components * d, 0.0);
  for (std::size_t c = 0; c < n_components; ++c) {
    const auto& p = pairs[c];
    model.eigenvalues.push_back(p.value);
    model.explained_variance_ratio.push_back(total_variance > 0 ? p.value / total_variance : 0.0);
    double* comp = model.components.data() + c * d;
    if (use_gram) {
      // Feature-space direction X^T v, normalised.
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) comp[j] += centered[i * d + j] * p.vector[i];
      const double norm = std::sqrt(std::inner_product(comp, comp + d, comp, 0.0));
      if (norm > 0)
        for (std::size_t j = 0; j < d; ++j) comp[j] /= norm;
    } else {
      std::copy(p.vector.begin(), p.vector.end(), comp);
    }
  }
  return model;
}

inline std::vector<double> pca_transform(const PcaModel& model, std::span<const double> x) {
  require(x.size() == model.n_dims, ErrorKind::data, "dimension_mismatch", "PCA input dimension mismatch");
  std::vector<double> out(model.n_components, 0.0);
  for (std::size_t c = 0; c < model.n_components; ++c) {
    auto comp = model.component(c);
    double s = 0.0;
    for (std::size_t j = 0; j < model.n_dims; ++j) s += (x[j] - model.mean[j]) * comp[j];
    out[c] = s;
  }
  return out;
}

inline LabeledDataset pca_transform(const PcaModel& model, const LabeledDataset& ds) {
  LabeledDataset out;
  out.class_names = ds.class_names;
  out.labels = ds.labels;
  out.meta = ds.meta;
  out.n_dims = model.n_components;
  out.features.reserve(ds.size() * model.n_components);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    auto t = pca_transform(model, ds.row(i));
    out.features.insert(out.features.end(), t.begin(), t.end());
  }
  return out;
}

}  // namespace emg::ml
