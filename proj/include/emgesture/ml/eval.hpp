#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "emgesture/error.hpp"
#include "emgesture/ml/dataset.hpp"

namespace emg::ml {

struct EvalReport {
  std::string model_name;
  std::vector<std::string> class_names;
  double accuracy = 0.0;
  std::vector<std::vector<std::size_t>> confusion;  // [true][predicted]
  std::vector<double> per_class_recall;             // 0 for classes absent from the test set
  std::size_t n_test = 0;
};

using Classifier = std::function<int(std::span<const double>)>;

inline EvalReport evaluate(const Classifier& predict, const LabeledDataset& test, std::string model_name = "") {
  require(test.size() > 0, ErrorKind::data, "empty_dataset", "cannot evaluate on an empty test set");
  const std::size_t k = test.n_classes();
  EvalReport r;
  r.model_name = std::move(model_name);
  r.class_names = test.class_names;
  r.confusion.assign(k, std::vector<std::size_t>(k, 0));
  for (std::size_t i = 0; i < test.size(); ++i) {
    const int predicted = predict(test.row(i));
    require(predicted >= 0 && static_cast<std::size_t>(predicted) < k, ErrorKind::data, "bad_prediction",
            "classifier returned an unknown class id");
    ++r.confusion[static_cast<std::size_t>(test.labels[i])][static_cast<std::size_t>(predicted)];
  }
  r.n_test = test.size();
  std::size_t trace = 0;
  for (std::size_t c = 0; c < k; ++c) {
    trace += r.confusion[c][c];
    std::size_t row = 0;
    for (std::size_t p = 0; p < k; ++p) row += r.confusion[c][p];
    r.per_class_recall.push_back(row > 0 ? static_cast<double>(r.confusion[c][c]) / static_cast<double>(row) : 0.0);
  }
  r.accuracy = static_cast<double>(trace) / static_cast<double>(r.n_test);
  return r;
}

}  // namespace emg::ml
