#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <vector>

#include "fedsim/data.hpp"
#include "fedsim/error.hpp"
#include "fedsim/model.hpp"

namespace fedsim {

struct EpsilonGap {
  double v_fed = 0.0;
  double v_sum = 0.0;
  double gap = 0.0;
  double epsilon = 0.0;
  bool pass = false;
};

struct EvalReport {
  double accuracy = 0.0;
  double mean_loss = 0.0;
  // per-class accuracy; NaN marks a class absent from the evaluation set
  // ("undefined" rather than 0 or 1)
  std::vector<double> per_label_accuracy;
  // confusion[true_class][predicted_class], entries sum to `total`
  std::vector<std::vector<std::size_t>> confusion;
  std::size_t total = 0;
  std::optional<EpsilonGap> gap;
};

// Full pass over the dataset with the given parameters.
inline EvalReport evaluate(const ModelSpec& spec, const ParamVector& params,
                           const LabeledDataset& ds) {
  validate(spec);
  validate(ds);
  if (ds.num_classes != spec.num_classes) {
    throw ShapeError("evaluate: dataset and model class counts differ");
  }
  const Matrix logits = forward(spec, params, ds.features);
  const std::size_t k = static_cast<std::size_t>(spec.num_classes);
  EvalReport report;
  report.total = ds.size();
  report.confusion.assign(k, std::vector<std::size_t>(k, 0));
  double total_loss = 0.0;
  for (std::size_t r = 0; r < logits.rows; ++r) {
    const auto row = logits.row(r);
    const std::size_t truth = static_cast<std::size_t>(ds.labels[r]);
    total_loss += log_sum_exp(row) - row[truth];
    report.confusion[truth][static_cast<std::size_t>(predict(row))]++;
  }
  report.mean_loss = total_loss / static_cast<double>(report.total);
  std::size_t correct = 0;
  report.per_label_accuracy.resize(k);
  for (std::size_t c = 0; c < k; ++c) {
    std::size_t row_sum = 0;
    for (std::size_t p = 0; p < k; ++p) row_sum += report.confusion[c][p];
    correct += report.confusion[c][c];
    report.per_label_accuracy[c] =
        row_sum == 0 ? std::numeric_limits<double>::quiet_NaN()
                     : static_cast<double>(report.confusion[c][c]) /
                           static_cast<double>(row_sum);
  }
  report.accuracy = static_cast<double>(correct) / static_cast<double>(report.total);
  return report;
}

// |v_fed - v_sum| < epsilon, strict. A difference landing within 1e-12 of
// epsilon counts as equal (and fails), so decimal inputs whose floating
// renderings straddle the boundary resolve the way exact arithmetic would.
inline EpsilonGap epsilon_gap(double v_fed, double v_sum, double epsilon) {
  EpsilonGap result;
  result.v_fed = v_fed;
  result.v_sum = v_sum;
  result.epsilon = epsilon;
  result.gap = std::abs(v_fed - v_sum);
  result.pass = result.gap == 0.0 ? true : result.gap + 1e-12 < epsilon;
  return result;
}

}  // namespace fedsim
