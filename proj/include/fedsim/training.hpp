#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <vector>

#include "fedsim/data.hpp"
#include "fedsim/model.hpp"
#include "fedsim/optim.hpp"
#include "fedsim/rng.hpp"

namespace fedsim {

// One pass over `order`: shuffle in place, then one optimizer step per batch
// (final short batch included). Returns the mean pre-step batch loss.
//
// Both the federated clients and the centralized baseline run epochs through
// this routine, so a single client fed the baseline's rng stream reproduces
// the baseline trajectory bit for bit.
inline double run_epoch(const ModelSpec& spec, ParamVector& params,
                        const LabeledDataset& ds,
                        std::vector<std::size_t>& order, int batch_size,
                        Optimizer& optimizer, Rng& rng) {
  if (batch_size < 1) throw ConfigError("run_epoch: batch size must be >= 1");
  if (order.empty()) throw ProtocolError("run_epoch: no rows to train on");
  rng.shuffle(order);
  const std::size_t stride = static_cast<std::size_t>(batch_size);
  double loss_sum = 0.0;
  std::size_t steps = 0;
  for (std::size_t start = 0; start < order.size(); start += stride) {
    const std::size_t count = std::min(stride, order.size() - start);
    const Batch batch =
        gather(ds, std::span<const std::size_t>(order).subspan(start, count));
    auto [batch_loss, grad] = loss_and_gradient(spec, params, batch);
    optimizer.step(params, grad);
    loss_sum += batch_loss;
    ++steps;
  }
  return loss_sum / static_cast<double>(steps);
}

}  // namespace fedsim
