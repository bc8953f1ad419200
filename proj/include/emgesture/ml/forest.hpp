#pragma once

// Random forest of Gini-split decision trees. Tree t draws its bootstrap
// sample and its per-node feature subsets from an engine seeded with
// seed + t, so a forest is reproducible regardless of training order.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "emgesture/error.hpp"
#include "emgesture/ml/dataset.hpp"

namespace emg::ml {

enum class FeatureRule { sqrt, log2, fixed };

struct ForestParams {
  int n_trees = 100;
  int max_depth = 0;  // 0 = unlimited
  int min_samples_leaf = 1;
  FeatureRule features_per_split = FeatureRule::sqrt;
  std::size_t fixed_features = 0;  // used with FeatureRule::fixed
  std::uint64_t seed = 0;
  bool bootstrap = true;

  void validate() const {
    require(n_trees >= 1, ErrorKind::usage, "bad_config", "n_trees must be at least 1");
    require(max_depth >= 0, ErrorKind::usage, "bad_config", "max_depth must be non-negative");
    require(min_samples_leaf >= 1, ErrorKind::usage, "bad_config", "min_samples_leaf must be at least 1");
    if (features_per_split == FeatureRule::fixed)
      require(fixed_features >= 1, ErrorKind::usage, "bad_config", "fixed feature count must be at least 1");
  }

  std::size_t features_for(std::size_t n_dims) const {
    std::size_t m = 1;
    switch (features_per_split) {
      case FeatureRule::sqrt:
        m = static_cast<std::size_t>(std::sqrt(static_cast<double>(n_dims)));
        break;
      case FeatureRule::log2:
        m = static_cast<std::size_t>(std::log2(static_cast<double>(std::max<std::size_t>(n_dims, 1))));
        break;
      case FeatureRule::fixed:
        m = fixed_features;
        break;
    }
    return std::clamp<std::size_t>(m, 1, std::max<std::size_t>(n_dims, 1));
  }
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  std::size_t n_samples = 0;
  std::vector<int> histogram;  // leaves only: class counts of the training samples that reached it

  bool is_leaf() const noexcept { return feature < 0; }
};

/// Index of the largest count; ties go to the lowest class id.
inline int argmax_lowest(std::span<const int> counts) {
  int best = 0;
  for (std::size_t c = 1; c < counts.size(); ++c)
    if (counts[c] > counts[static_cast<std::size_t>(best)]) best = static_cast<int>(c);
  return best;
}

struct DecisionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  const TreeNode& leaf_for(std::span<const double> x) const {
    std::size_t i = 0;
    while (!nodes[i].is_leaf())
      i = static_cast<std::size_t>(x[static_cast<std::size_t>(nodes[i].feature)] <= nodes[i].threshold
                                       ? nodes[i].left
                                       : nodes[i].right);
    return nodes[i];
  }

  int predict(std::span<const double> x) const { return argmax_lowest(leaf_for(x).histogram); }

  int depth() const {
    std::vector<std::pair<std::size_t, int>> stack{{0, 0}};
    int best = 0;
    while (!stack.empty()) {
      auto [i, d] = stack.back();
      stack.pop_back();
      best = std::max(best, d);
      if (!nodes[i].is_leaf()) {
        stack.push_back({static_cast<std::size_t>(nodes[i].left), d + 1});
        stack.push_back({static_cast<std::size_t>(nodes[i].right), d + 1});
      }
    }
    return best;
  }
};

struct ForestModel {
  std::vector<DecisionTree> trees;
  ForestParams params;
  std::size_t n_dims = 0;
  std::vector<std::string> class_names;
  FeatureMeta meta;
  std::optional<double> oob_estimate;
  bool degenerate = false;  // trained on a single class
};

struct Prediction {
  int label = 0;
  std::vector<int> votes;  // per class
};

namespace detail {

class TreeBuilder {
 public:
  TreeBuilder(const LabeledDataset& ds, const ForestParams& p, std::mt19937_64& rng)
      : ds_(ds), params_(p), rng_(rng), n_classes_(ds.n_classes()), mtry_(p.features_for(ds.n_dims)) {
    feature_order_.resize(ds.n_dims);
    std::iota(feature_order_.begin(), feature_order_.end(), 0);
  }

  DecisionTree build(std::vector<std::size_t> samples) {
    samples_ = std::move(samples);
    tree_.nodes.clear();
    grow(0, samples_.size(), 0);
    return std::move(tree_);
  }

 private:
  struct Best {
    int feature = -1;
    double threshold = 0.0;
    double impurity = 0.0;  // weighted: n_left * gini_left + n_right * gini_right
  };

  int grow(std::size_t begin, std::size_t end, int depth) {
    const std::size_t n = end - begin;
    const int id = static_cast<int>(tree_.nodes.size());
    tree_.nodes.emplace_back();
    tree_.nodes[static_cast<std::size_t>(id)].n_samples = n;

    std::vector<int> hist(n_classes_, 0);
    for (std::size_t i = begin; i < end; ++i) ++hist[static_cast<std::size_t>(ds_.labels[samples_[i]])];
    const bool pure = std::count_if(hist.begin(), hist.end(), [](int c) { return c > 0; }) <= 1;
    const auto min_leaf = static_cast<std::size_t>(params_.min_samples_leaf);
    const bool depth_reached = params_.max_depth > 0 && depth >= params_.max_depth;

    Best best;
    if (!pure && !depth_reached && n >= 2 * min_leaf) best = find_split(begin, end, hist);

    if (best.feature < 0) {
      tree_.nodes[static_cast<std::size_t>(id)].histogram = std::move(hist);
      return id;
    }

    auto mid_it = std::partition(samples_.begin() + static_cast<std::ptrdiff_t>(begin),
                                 samples_.begin() + static_cast<std::ptrdiff_t>(end), [&](std::size_t s) {
                                   return ds_.row(s)[static_cast<std::size_t>(best.feature)] <= best.threshold;
                                 });
    const auto mid = static_cast<std::size_t>(mid_it - samples_.begin());
    const int left = grow(begin, mid, depth + 1);
    const int right = grow(mid, end, depth + 1);
    auto& node = tree_.nodes[static_cast<std::size_t>(id)];
    node.feature = best.feature;
    node.threshold = best.threshold;
    node.left = left;
    node.right = right;
    return id;
  }

  static double weighted_gini(double n, double sum_sq) { return n > 0 ? n - sum_sq / n : 0.0; }

  // Examines features in random order until mtry non-constant ones have been
  // scanned (or none are left); constant features do not count.
  Best find_split(std::size_t begin, std::size_t end, const std::vector<int>& hist) {
    const std::size_t n = end - begin;
    double parent_sq = 0.0;
    for (int c : hist) parent_sq += static_cast<double>(c) * c;
    const double parent = weighted_gini(static_cast<double>(n), parent_sq);
    const auto min_leaf = static_cast<std::size_t>(params_.min_samples_leaf);

    Best best;
    best.impurity = parent;
    std::size_t scanned = 0;
    values_.resize(n);
    std::vector<int> left(n_classes_), right(n_classes_);
    for (std::size_t f_i = 0; f_i < feature_order_.size() && scanned < mtry_; ++f_i) {
      std::uniform_int_distribution<std::size_t> pick(f_i, feature_order_.size() - 1);
      std::swap(feature_order_[f_i], feature_order_[pick(rng_)]);
      const std::size_t feature = feature_order_[f_i];

      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t s = samples_[begin + i];
        values_[i] = {ds_.row(s)[feature], ds_.labels[s]};
      }
      std::sort(values_.begin(), values_.end());
      if (values_.front().first == values_.back().first) continue;
      ++scanned;

      std::fill(left.begin(), left.end(), 0);
      std::copy(hist.begin(), hist.end(), right.begin());
      double left_sq = 0.0, right_sq = parent_sq;
      for (std::size_t i = 0; i + 1 < n; ++i) {
        const auto c = static_cast<std::size_t>(values_[i].second);
        left_sq += 2.0 * left[c] + 1.0;
        right_sq -= 2.0 * right[c] - 1.0;
        ++left[c];
        --right[c];
        const std::size_t n_left = i + 1;
        if (values_[i].first == values_[i + 1].first) continue;
        if (n_left < min_leaf || n - n_left < min_leaf) continue;
        const double imp = weighted_gini(static_cast<double>(n_left), left_sq) +
                           weighted_gini(static_cast<double>(n - n_left), right_sq);
        if (imp < best.impurity - 1e-12) {
          best.impurity = imp;
          best.feature = static_cast<int>(feature);
          double t = 0.5 * (values_[i].first + values_[i + 1].first);
          if (!(t < values_[i + 1].first)) t = values_[i].first;
          best.threshold = t;
        }
      }
    }
    return best;
  }

  const LabeledDataset& ds_;
  const ForestParams& params_;
  std::mt19937_64& rng_;
  std::size_t n_classes_;
  std::size_t mtry_;
  std::vector<std::size_t> feature_order_;
  std::vector<std::size_t> samples_;
  std::vector<std::pair<double, int>> values_;
  DecisionTree tree_;
};

}  // namespace detail

inline Prediction rf_predict(const ForestModel& model, std::span<const double> x) {
  require(x.size() == model.n_dims, ErrorKind::data, "dimension_mismatch",
          "feature vector has " + std::to_string(x.size()) + " dims, model expects " + std::to_string(model.n_dims));
  Prediction p;
  p.votes.assign(model.class_names.size(), 0);
  for (const auto& tree : model.trees) ++p.votes[static_cast<std::size_t>(tree.predict(x))];
  p.label = argmax_lowest(p.votes);
  return p;
}

inline ForestModel rf_train(const LabeledDataset& train, const ForestParams& params) {
  params.validate();
  train.validate();
  require(train.size() >= 2, ErrorKind::data, "too_few_samples", "need at least two training samples");

  ForestModel model;
  model.params = params;
  model.n_dims = train.n_dims;
  model.class_names = train.class_names;
  model.meta = train.meta;
  const auto counts = train.class_counts();
  model.degenerate = std::count_if(counts.begin(), counts.end(), [](std::size_t c) { return c > 0; }) < 2;

  const std::size_t n = train.size();
  std::vector<std::vector<int>> oob_votes(n, std::vector<int>(train.n_classes(), 0));
  std::vector<bool> in_bag(n);
  for (int t = 0; t < params.n_trees; ++t) {
    std::mt19937_64 rng(params.seed + static_cast<std::uint64_t>(t));
    std::vector<std::size_t> sample(n);
    std::fill(in_bag.begin(), in_bag.end(), !params.bootstrap);
    if (params.bootstrap) {
      std::uniform_int_distribution<std::size_t> draw(0, n - 1);
      for (auto& s : sample) {
        s = draw(rng);
        in_bag[s] = true;
      }
    } else {
      std::iota(sample.begin(), sample.end(), 0);
    }
    detail::TreeBuilder builder(train, params, rng);
    model.trees.push_back(builder.build(std::move(sample)));
    for (std::size_t i = 0; i < n; ++i)
      if (!in_bag[i]) ++oob_votes[i][static_cast<std::size_t>(model.trees.back().predict(train.row(i)))];
  }

  std::size_t voted = 0, correct = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (std::all_of(oob_votes[i].begin(), oob_votes[i].end(), [](int v) { return v == 0; })) continue;
    ++voted;
    if (argmax_lowest(oob_votes[i]) == train.labels[i]) ++correct;
  }
  if (voted > 0) model.oob_estimate = static_cast<double>(correct) / static_cast<double>(voted);
  return model;
}

}  // namespace emg::ml
