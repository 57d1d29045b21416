#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <exception>
#include <mutex>
#include <numeric>
#include <thread>
#include <utility>
#include <vector>

#include "fedsim/data.hpp"
#include "fedsim/eval.hpp"
#include "fedsim/model.hpp"
#include "fedsim/optim.hpp"
#include "fedsim/rng.hpp"
#include "fedsim/training.hpp"

namespace fedsim {

enum class Weighting { kBySamples, kUniform };

struct FLConfig {
  int num_agents = 5;        // K
  double client_frac = 0.4;  // C
  int local_epochs = 3;      // E
  int local_batch = 10;      // B
  int rounds = 100;          // R
  OptimizerConfig optimizer{};
  std::uint64_t seed = 0;
  ModelSpec model{};
  Weighting weighting = Weighting::kBySamples;
};

inline void validate(const FLConfig& config) {
  if (config.num_agents < 1) throw ConfigError("federation: num_agents must be >= 1");
  if (!(config.client_frac > 0.0 && config.client_frac <= 1.0)) {
    throw ConfigError("federation: frac must be in (0, 1]");
  }
  if (config.local_epochs < 0) throw ConfigError("federation: local_epochs must be >= 0");
  if (config.local_batch < 1) throw ConfigError("federation: local_batch must be >= 1");
  if (config.rounds < 0) throw ConfigError("federation: rounds must be >= 0");
  validate(config.optimizer);
  validate(config.model);
}

struct ClientUpdate {
  int client_id = 0;
  ParamVector params;
  std::size_t num_samples = 0;  // the client's shard size
};

struct RoundRecord {
  int round = 0;  // 1-based
  std::vector<int> sampled_clients;
  double mean_local_loss = 0.0;
  double eval_loss = 0.0;
  double accuracy = 0.0;
  std::vector<double> per_label_accuracy;
  double wall_time_sec = 0.0;  // informational; never serialized
};

// Server + client state between rounds. `round` always equals history size.
struct Federation {
  FLConfig config;
  ParamVector global_params;
  int round = 0;
  std::vector<Shard> shards;
  std::vector<RoundRecord> history;
};

// m = max(1, ceil(C * K)). The 1e-9 nudge keeps exact rational products
// (e.g. 0.4 * 5) from ceiling one too high after floating-point rounding.
inline int participant_count(int num_agents, double frac) {
  const double raw = frac * static_cast<double>(num_agents);
  int m = static_cast<int>(std::ceil(raw - 1e-9));
  m = std::max(m, 1);
  m = std::min(m, num_agents);
  return m;
}

// Draws m distinct client ids uniformly without replacement; ascending order.
inline std::vector<int> sample_clients(int num_agents, double frac, Rng& rng) {
  const int m = participant_count(num_agents, frac);
  std::vector<int> pool(static_cast<std::size_t>(num_agents));
  std::iota(pool.begin(), pool.end(), 0);
  for (int i = 0; i < m; ++i) {
    const std::size_t j =
        static_cast<std::size_t>(i) +
        rng.next_below(static_cast<std::uint64_t>(num_agents - i));
    std::swap(pool[static_cast<std::size_t>(i)], pool[j]);
  }
  pool.resize(static_cast<std::size_t>(m));
  std::sort(pool.begin(), pool.end());
  return pool;
}

struct LocalResult {
  ClientUpdate update;
  double mean_step_loss = 0.0;
};

// E local epochs from the received global parameters. Optimizer state is
// created fresh here and discarded on return; clients carry no state across
// rounds. With E = 0 the reported loss is the shard loss of the unchanged
// parameters.
inline LocalResult local_update(const ParamVector& global_params,
                                const Shard& shard, const LabeledDataset& ds,
                                const FLConfig& config, Rng& client_rng) {
  if (shard.indices.empty()) {
    throw ProtocolError("local_update: client " + std::to_string(shard.owner_id) +
                        " has an empty shard");
  }
  ParamVector params = global_params;
  Optimizer optimizer(config.optimizer, params.size());
  std::vector<std::size_t> order = shard.indices;
  double loss_sum = 0.0;
  for (int e = 0; e < config.local_epochs; ++e) {
    loss_sum += run_epoch(config.model, params, ds, order, config.local_batch,
                          optimizer, client_rng);
  }
  LocalResult result;
  result.mean_step_loss =
      config.local_epochs > 0
          ? loss_sum / static_cast<double>(config.local_epochs)
          : loss(config.model, params, gather(ds, shard.indices));
  result.update.client_id = shard.owner_id;
  result.update.num_samples = shard.indices.size();
  result.update.params = std::move(params);
  return result;
}

// Weighted element-wise mean of the client parameters. Summation runs in
// ascending client_id order regardless of the sequence order passed in, which
// makes the result bit-exact under permutation of `updates`.
inline ParamVector aggregate(const std::vector<ClientUpdate>& updates,
                             Weighting weighting) {
  if (updates.empty()) throw ProtocolError("aggregate: empty update set");
  const std::size_t dim = updates.front().params.size();
  std::vector<const ClientUpdate*> order;
  order.reserve(updates.size());
  double total_samples = 0.0;
  for (const auto& update : updates) {
    if (update.params.size() != dim) {
      throw ProtocolError("aggregate: parameter length mismatch");
    }
    if (update.num_samples < 1) {
      throw ProtocolError("aggregate: client reported zero samples");
    }
    total_samples += static_cast<double>(update.num_samples);
    order.push_back(&update);
  }
  std::sort(order.begin(), order.end(),
            [](const ClientUpdate* a, const ClientUpdate* b) {
              return a->client_id < b->client_id;
            });
  ParamVector result(dim, 0.0);
  for (const ClientUpdate* update : order) {
    const double w =
        weighting == Weighting::kBySamples
            ? static_cast<double>(update->num_samples) / total_samples
            : 1.0 / static_cast<double>(updates.size());
    for (std::size_t i = 0; i < dim; ++i) result[i] += w * update->params[i];
  }
  ensure_finite(result, "aggregate");
  return result;
}

namespace detail {

// Runs the sampled clients, optionally across worker threads. Each client's
// rng stream is fixed by (seed, round, client_id), so the results are
// bit-identical to sequential execution in ascending client_id order.
inline std::vector<LocalResult> run_clients(const Federation& fed,
                                            const LabeledDataset& train,
                                            const std::vector<int>& sampled,
                                            int parallelism) {
  std::vector<LocalResult> results(sampled.size());
  const auto run_one = [&](std::size_t slot) {
    const int client_id = sampled[slot];
    Rng client_rng(derive_seed(fed.config.seed, StreamTag::kClient,
                               static_cast<std::uint64_t>(fed.round),
                               static_cast<std::uint64_t>(client_id)));
    results[slot] =
        local_update(fed.global_params,
                     fed.shards[static_cast<std::size_t>(client_id)], train,
                     fed.config, client_rng);
  };
  const int workers =
      std::min<int>(parallelism, static_cast<int>(sampled.size()));
  if (workers <= 1) {
    for (std::size_t slot = 0; slot < sampled.size(); ++slot) run_one(slot);
    return results;
  }
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr error;
  std::vector<std::thread> threads;
  threads.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    threads.emplace_back([&] {
      for (;;) {
        const std::size_t slot = next.fetch_add(1);
        if (slot >= results.size()) return;
        try {
          run_one(slot);
        } catch (...) {
          const std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& thread : threads) thread.join();
  if (error) std::rethrow_exception(error);
  return results;
}

}  // namespace detail

// One protocol round: sample clients, run local updates from the shared
// pre-round global parameters, aggregate, evaluate the new global model on
// the held-out set, append a RoundRecord.
inline void run_round(Federation& fed, const LabeledDataset& train,
                      const LabeledDataset& eval_set, int parallelism = 1) {
  const auto start = std::chrono::steady_clock::now();
  Rng sample_rng(derive_seed(fed.config.seed, StreamTag::kSampling,
                             static_cast<std::uint64_t>(fed.round)));
  const std::vector<int> sampled =
      sample_clients(fed.config.num_agents, fed.config.client_frac, sample_rng);
  const std::vector<LocalResult> results =
      detail::run_clients(fed, train, sampled, parallelism);

  std::vector<ClientUpdate> updates;
  updates.reserve(results.size());
  double loss_sum = 0.0;
  for (const auto& result : results) {
    loss_sum += result.mean_step_loss;
    updates.push_back(result.update);
  }
  fed.global_params = aggregate(updates, fed.config.weighting);

  const EvalReport eval = evaluate(fed.config.model, fed.global_params, eval_set);
  RoundRecord record;
  record.round = fed.round + 1;
  record.sampled_clients = sampled;
  record.mean_local_loss = loss_sum / static_cast<double>(results.size());
  record.eval_loss = eval.mean_loss;
  record.accuracy = eval.accuracy;
  record.per_label_accuracy = eval.per_label_accuracy;
  record.wall_time_sec =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  fed.history.push_back(std::move(record));
  fed.round += 1;
}

struct RunResult {
  ParamVector params;
  std::vector<RoundRecord> history;
};

// R rounds from a fresh init_params(model, seed). Fully deterministic in the
// config; `parallelism` only changes how client work is scheduled.
inline RunResult run_federation(const FLConfig& config,
                                const LabeledDataset& train,
                                const std::vector<Shard>& shards,
                                const LabeledDataset& eval_set,
                                int parallelism = 1) {
  validate(config);
  validate(train);
  validate(eval_set);
  if (shards.size() != static_cast<std::size_t>(config.num_agents)) {
    throw ProtocolError("run_federation: shard count does not match num_agents");
  }
  if (!is_disjoint_cover(shards, train.size())) {
    throw ProtocolError("run_federation: shards must partition the dataset");
  }
  Federation fed;
  fed.config = config;
  fed.shards = shards;
  fed.global_params = init_params(config.model, config.seed);
  for (int r = 0; r < config.rounds; ++r) {
    run_round(fed, train, eval_set, parallelism);
  }
  return {std::move(fed.global_params), std::move(fed.history)};
}

}  // namespace fedsim
