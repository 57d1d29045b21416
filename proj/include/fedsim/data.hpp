#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "fedsim/error.hpp"
#include "fedsim/matrix.hpp"
#include "fedsim/model.hpp"
#include "fedsim/rng.hpp"

namespace fedsim {

struct LabeledDataset {
  Matrix features;          // n x input_dim
  std::vector<int> labels;  // n class indices
  int num_classes = 0;

  std::size_t size() const { return labels.size(); }
  int input_dim() const { return static_cast<int>(features.cols); }
};

// One client's private subset of a dataset, stored as row indices.
struct Shard {
  int owner_id = 0;
  std::vector<std::size_t> indices;
};

inline void validate(const LabeledDataset& ds) {
  if (ds.labels.empty() || ds.features.rows != ds.labels.size()) {
    throw ShapeError("dataset: feature rows and labels disagree");
  }
  if (ds.num_classes < 1) throw ConfigError("dataset: num_classes must be >= 1");
  for (int y : ds.labels) {
    if (y < 0 || y >= ds.num_classes) throw ShapeError("dataset: label out of range");
  }
}

// Class mean for the synthetic generator. Means sit on a circle in the first
// two feature dimensions with consecutive means exactly `separation` apart;
// with input_dim == 1 they sit at c * separation on the line.
inline std::vector<double> blob_mean(int cls, int num_classes, int input_dim,
                                     double separation) {
  std::vector<double> mean(static_cast<std::size_t>(input_dim), 0.0);
  if (num_classes == 1) return mean;
  if (input_dim == 1) {
    mean[0] = separation * static_cast<double>(cls);
    return mean;
  }
  const double radius =
      separation / (2.0 * std::sin(std::numbers::pi / num_classes));
  const double angle = 2.0 * std::numbers::pi * cls / num_classes;
  mean[0] = radius * std::cos(angle);
  mean[1] = radius * std::sin(angle);
  return mean;
}

// Gaussian clusters with unit covariance, one mean per class; labels drawn
// from class_weights. Deterministic in seed.
inline LabeledDataset make_blobs(std::size_t n, int num_classes, int input_dim,
                                 const std::vector<double>& class_weights,
                                 double separation, std::uint64_t seed) {
  if (n < 1) throw ConfigError("make_blobs: n must be >= 1");
  if (num_classes < 1) throw ConfigError("make_blobs: num_classes must be >= 1");
  if (input_dim < 1) throw ConfigError("make_blobs: input_dim must be >= 1");
  if (!(separation > 0.0)) throw ConfigError("make_blobs: separation must be positive");
  if (class_weights.size() != static_cast<std::size_t>(num_classes)) {
    throw ConfigError("make_blobs: class_weights size must equal num_classes");
  }
  double weight_sum = 0.0;
  for (double w : class_weights) {
    if (w < 0.0) throw ConfigError("make_blobs: class_weights must be non-negative");
    weight_sum += w;
  }
  if (std::abs(weight_sum - 1.0) > 1e-9) {
    throw ConfigError("make_blobs: class_weights must sum to 1");
  }

  std::vector<std::vector<double>> means;
  means.reserve(static_cast<std::size_t>(num_classes));
  for (int c = 0; c < num_classes; ++c) {
    means.push_back(blob_mean(c, num_classes, input_dim, separation));
  }

  LabeledDataset ds;
  ds.num_classes = num_classes;
  ds.features = Matrix(n, static_cast<std::size_t>(input_dim));
  ds.labels.resize(n);
  Rng rng(derive_seed(seed, StreamTag::kBlobs));
  for (std::size_t r = 0; r < n; ++r) {
    const double u = rng.next_unit();
    int label = num_classes - 1;
    double cum = 0.0;
    for (int c = 0; c < num_classes; ++c) {
      cum += class_weights[static_cast<std::size_t>(c)];
      if (u < cum) {
        label = c;
        break;
      }
    }
    ds.labels[r] = label;
    const auto& mean = means[static_cast<std::size_t>(label)];
    auto row = ds.features.row(r);
    for (std::size_t f = 0; f < row.size(); ++f) {
      row[f] = mean[f] + rng.next_normal();
    }
  }
  return ds;
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = line.find(',', start);
    if (pos == std::string::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

inline double parse_double_field(const std::string& field, std::size_t row) {
  double value = 0.0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last || field.empty()) {
    throw LoadError("csv row " + std::to_string(row) + ": invalid number '" +
                    field + "'");
  }
  return value;
}

inline int parse_label_field(const std::string& field, std::size_t row) {
  int value = 0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last || field.empty()) {
    throw LoadError("csv row " + std::to_string(row) + ": invalid label '" +
                    field + "'");
  }
  return value;
}

}  // namespace detail

// Loads `f1,...,fd,label` rows (no header, UTF-8, comma separated).
// input_dim is inferred from the first row.
inline LabeledDataset load_csv(const std::string& path, int num_classes) {
  if (num_classes < 1) throw ConfigError("load_csv: num_classes must be >= 1");
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open '" + path + "'");
  LabeledDataset ds;
  ds.num_classes = num_classes;
  std::vector<double> values;
  std::size_t dim = 0;
  std::size_t rows = 0;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      throw LoadError("csv row " + std::to_string(lineno) + ": empty row");
    }
    const auto fields = detail::split_csv_line(line);
    if (rows == 0) {
      if (fields.size() < 2) {
        throw LoadError("csv row 1: expected at least 2 comma-separated values");
      }
      dim = fields.size() - 1;
    } else if (fields.size() != dim + 1) {
      throw LoadError("csv row " + std::to_string(lineno) + ": expected " +
                      std::to_string(dim + 1) + " values, got " +
                      std::to_string(fields.size()));
    }
    for (std::size_t f = 0; f < dim; ++f) {
      values.push_back(detail::parse_double_field(fields[f], lineno));
    }
    const int label = detail::parse_label_field(fields[dim], lineno);
    if (label < 0 || label >= num_classes) {
      throw LoadError("csv row " + std::to_string(lineno) + ": label " +
                      std::to_string(label) + " out of range [0, " +
                      std::to_string(num_classes) + ")");
    }
    ds.labels.push_back(label);
    ++rows;
  }
  if (rows == 0) throw LoadError("no rows in '" + path + "'");
  ds.features.rows = rows;
  ds.features.cols = dim;
  ds.features.data = std::move(values);
  return ds;
}

inline std::vector<std::size_t> class_counts(std::span<const int> labels,
                                             int num_classes) {
  std::vector<std::size_t> counts(static_cast<std::size_t>(num_classes), 0);
  for (int y : labels) counts[static_cast<std::size_t>(y)]++;
  return counts;
}

inline std::vector<std::size_t> class_counts(const LabeledDataset& ds) {
  return class_counts(ds.labels, ds.num_classes);
}

inline std::vector<std::size_t> class_counts(const LabeledDataset& ds,
                                             const Shard& shard) {
  std::vector<std::size_t> counts(static_cast<std::size_t>(ds.num_classes), 0);
  for (std::size_t idx : shard.indices) {
    counts[static_cast<std::size_t>(ds.labels[idx])]++;
  }
  return counts;
}

// True when the shards are pairwise disjoint and cover {0..n-1}.
inline bool is_disjoint_cover(const std::vector<Shard>& shards, std::size_t n) {
  std::vector<char> seen(n, 0);
  std::size_t total = 0;
  for (const auto& shard : shards) {
    for (std::size_t idx : shard.indices) {
      if (idx >= n || seen[idx]) return false;
      seen[idx] = 1;
      ++total;
    }
  }
  return total == n;
}

// Seeded shuffle, then round-robin deal. Shard sizes differ by at most one.
inline std::vector<Shard> partition_iid(const LabeledDataset& ds, int num_clients,
                                        std::uint64_t seed) {
  validate(ds);
  if (num_clients < 1) throw ConfigError("partition_iid: K must be >= 1");
  const std::size_t n = ds.size();
  if (static_cast<std::size_t>(num_clients) > n) {
    throw ConfigError("partition_iid: K exceeds dataset size");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(seed, StreamTag::kPartition));
  rng.shuffle(order);
  std::vector<Shard> shards(static_cast<std::size_t>(num_clients));
  for (int k = 0; k < num_clients; ++k) {
    shards[static_cast<std::size_t>(k)].owner_id = k;
  }
  for (std::size_t p = 0; p < n; ++p) {
    shards[p % static_cast<std::size_t>(num_clients)].indices.push_back(order[p]);
  }
  for (auto& shard : shards) {
    std::sort(shard.indices.begin(), shard.indices.end());
  }
  return shards;
}

// Non-IID label skew: for each class, rows are split across clients by
// proportions drawn from Dirichlet(alpha). Empty shards are repaired by
// moving one row from the largest shard.
inline std::vector<Shard> partition_label_skew(const LabeledDataset& ds,
                                               int num_clients, double alpha,
                                               std::uint64_t seed) {
  validate(ds);
  if (num_clients < 1) throw ConfigError("partition_label_skew: K must be >= 1");
  if (!(alpha > 0.0)) throw ConfigError("partition_label_skew: alpha must be positive");
  const std::size_t n = ds.size();
  if (static_cast<std::size_t>(num_clients) > n) {
    throw ConfigError("partition_label_skew: K exceeds dataset size");
  }
  Rng rng(derive_seed(seed, StreamTag::kPartition));
  std::vector<Shard> shards(static_cast<std::size_t>(num_clients));
  for (int k = 0; k < num_clients; ++k) {
    shards[static_cast<std::size_t>(k)].owner_id = k;
  }
  for (int c = 0; c < ds.num_classes; ++c) {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < n; ++i) {
      if (ds.labels[i] == c) rows.push_back(i);
    }
    if (rows.empty()) continue;
    rng.shuffle(rows);
    const auto props =
        rng.next_dirichlet(alpha, static_cast<std::size_t>(num_clients));
    // cumulative proportions rounded to row-count boundaries
    std::size_t begin = 0;
    double cum = 0.0;
    for (int k = 0; k < num_clients; ++k) {
      cum += props[static_cast<std::size_t>(k)];
      std::size_t end =
          k + 1 == num_clients
              ? rows.size()
              : static_cast<std::size_t>(
                    std::llround(cum * static_cast<double>(rows.size())));
      end = std::clamp(end, begin, rows.size());
      auto& dst = shards[static_cast<std::size_t>(k)].indices;
      dst.insert(dst.end(), rows.begin() + static_cast<std::ptrdiff_t>(begin),
                 rows.begin() + static_cast<std::ptrdiff_t>(end));
      begin = end;
    }
  }
  // repair: every client must end up with at least one row
  for (;;) {
    auto empty_it = std::find_if(shards.begin(), shards.end(),
                                 [](const Shard& s) { return s.indices.empty(); });
    if (empty_it == shards.end()) break;
    auto largest_it = shards.begin();
    for (auto it = shards.begin(); it != shards.end(); ++it) {
      if (it->indices.size() > largest_it->indices.size()) largest_it = it;
    }
    empty_it->indices.push_back(largest_it->indices.back());
    largest_it->indices.pop_back();
  }
  for (auto& shard : shards) {
    std::sort(shard.indices.begin(), shard.indices.end());
  }
  return shards;
}

// Copies the given dataset rows into a training batch.
inline Batch gather(const LabeledDataset& ds, std::span<const std::size_t> rows) {
  if (rows.empty()) throw ShapeError("gather: no rows requested");
  Batch batch;
  batch.features = Matrix(rows.size(), ds.features.cols);
  batch.labels.resize(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto src = ds.features.row(rows[r]);
    auto dst = batch.features.row(r);
    std::copy(src.begin(), src.end(), dst.begin());
    batch.labels[r] = ds.labels[rows[r]];
  }
  return batch;
}

}  // namespace fedsim
