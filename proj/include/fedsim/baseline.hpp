#pragma once

#include <cstdint>
#include <numeric>
#include <utility>
#include <vector>

#include "fedsim/data.hpp"
#include "fedsim/eval.hpp"
#include "fedsim/model.hpp"
#include "fedsim/optim.hpp"
#include "fedsim/protocol.hpp"
#include "fedsim/rng.hpp"
#include "fedsim/training.hpp"

namespace fedsim {

struct EpochRecord {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double eval_loss = 0.0;
  double accuracy = 0.0;
};

struct CentralizedRun {
  ParamVector params;
  std::vector<EpochRecord> history;
};

// Pooled-data trainer: same init, optimizer, and epoch loop as a federated
// client, minus the protocol.
inline CentralizedRun train_centralized(const LabeledDataset& train,
                                        const ModelSpec& spec,
                                        const OptimizerConfig& optimizer_config,
                                        int epochs, int batch_size,
                                        std::uint64_t seed,
                                        const LabeledDataset& eval_set) {
  validate(spec);
  validate(train);
  validate(eval_set);
  if (epochs < 0) throw ConfigError("train_centralized: epochs must be >= 0");
  if (batch_size < 1) throw ConfigError("train_centralized: batch size must be >= 1");
  CentralizedRun run;
  run.params = init_params(spec, seed);
  Optimizer optimizer(optimizer_config, run.params.size());
  Rng rng(derive_seed(seed, StreamTag::kCentralized));
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  run.history.reserve(static_cast<std::size_t>(epochs));
  for (int epoch = 0; epoch < epochs; ++epoch) {
    const double train_loss =
        run_epoch(spec, run.params, train, order, batch_size, optimizer, rng);
    const EvalReport eval = evaluate(spec, run.params, eval_set);
    run.history.push_back(
        {epoch + 1, train_loss, eval.mean_loss, eval.accuracy});
  }
  return run;
}

struct AlignedLossPoint {
  int round = 0;              // FL round r (1-based)
  double fl_loss = 0.0;       // FL eval loss at round r
  int centralized_epoch = 0;  // r * local_epochs
  double centralized_loss = 0.0;
};

struct ComparisonReport {
  EvalReport fl;
  EvalReport centralized;
  EpsilonGap gap;
  std::vector<AlignedLossPoint> curve;
};

// Evaluates both final models on the same held-out set and aligns the loss
// curves by FL round r <-> centralized epoch r * E.
inline ComparisonReport compare_runs(const ModelSpec& spec,
                                     const ParamVector& fl_params,
                                     const std::vector<RoundRecord>& fl_history,
                                     const ParamVector& centralized_params,
                                     const std::vector<EpochRecord>& centralized_history,
                                     const LabeledDataset& eval_set,
                                     double epsilon, int local_epochs) {
  validate(spec);
  const std::size_t expected = param_count(spec);
  if (fl_params.size() != expected || centralized_params.size() != expected) {
    throw ComparisonError("compare_runs: parameter vectors do not match the model spec");
  }
  if (local_epochs < 1) throw ConfigError("compare_runs: local_epochs must be >= 1");
  ComparisonReport report;
  report.fl = evaluate(spec, fl_params, eval_set);
  report.centralized = evaluate(spec, centralized_params, eval_set);
  report.gap = epsilon_gap(report.fl.accuracy, report.centralized.accuracy, epsilon);
  report.fl.gap = report.gap;
  for (const auto& record : fl_history) {
    const std::size_t epoch_index =
        static_cast<std::size_t>(record.round) *
        static_cast<std::size_t>(local_epochs);
    if (epoch_index == 0 || epoch_index > centralized_history.size()) continue;
    report.curve.push_back({record.round, record.eval_loss,
                            static_cast<int>(epoch_index),
                            centralized_history[epoch_index - 1].eval_loss});
  }
  return report;
}

}  // namespace fedsim
