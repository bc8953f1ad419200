#pragma once

#include <algorithm>
#include <numeric>
#include <span>
#include <utility>
#include <vector>

#include "emgesture/error.hpp"
#include "emgesture/ml/dataset.hpp"
#include "emgesture/ml/forest.hpp"

namespace emg::ml {

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double t = a[i] - b[i];
    d += t * t;
  }
  return d;
}

/// Majority label among the k nearest training rows (Euclidean). Distance ties
/// go to the lower sample index, vote ties to the lower class id.
inline int knn_predict(const LabeledDataset& train, std::span<const double> x, std::size_t k) {
  require(k > 0, ErrorKind::usage, "bad_argument", "k must be positive");
  require(k <= train.size(), ErrorKind::usage, "bad_argument", "k exceeds the number of training samples");
  require(x.size() == train.n_dims, ErrorKind::data, "dimension_mismatch", "query dimension mismatch");

  std::vector<std::pair<double, std::size_t>> dist(train.size());
  for (std::size_t i = 0; i < train.size(); ++i) dist[i] = {squared_distance(train.row(i), x), i};
  std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());

  std::vector<int> votes(train.n_classes(), 0);
  for (std::size_t i = 0; i < k; ++i) ++votes[static_cast<std::size_t>(train.labels[dist[i].second])];
  return argmax_lowest(votes);
}

}  // namespace emg::ml
