#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "meshlearn/errors.hpp"
#include "meshlearn/matrix.hpp"
#include "meshlearn/rng.hpp"

namespace meshlearn {

enum class Split { train, test };

struct Dataset {
  Matrix features;          // samples x dims
  std::vector<int> labels;  // in [0, n_classes)
  int n_classes = 0;
  Split split = Split::train;

  std::size_t size() const { return labels.size(); }
  std::size_t dims() const { return features.cols(); }
};

// Isotropic Gaussian clusters around per-class means drawn on the unit
// sphere. Per class, the last fifth of the samples form the test split.
inline std::pair<Dataset, Dataset> generate_blobs(int n_classes, int samples_per_class,
                                                  int dims, double spread,
                                                  std::uint64_t seed) {
  if (n_classes <= 0 || samples_per_class <= 0 || dims <= 0 || spread < 0.0)
    throw InputError("generate_blobs: all arguments must be positive");
  RngStream rng(seed);

  std::vector<std::vector<double>> means(static_cast<std::size_t>(n_classes));
  for (auto& mean : means) {
    mean.resize(static_cast<std::size_t>(dims));
    double norm_sq = 0.0;
    for (double& v : mean) {
      v = rng.normal();
      norm_sq += v * v;
    }
    const double norm = std::sqrt(norm_sq);
    for (double& v : mean) v /= norm > 0.0 ? norm : 1.0;
  }

  const int test_per_class = samples_per_class / 5;  // 80/20, stratified
  const int train_per_class = samples_per_class - test_per_class;

  Dataset train, test;
  train.n_classes = test.n_classes = n_classes;
  train.split = Split::train;
  test.split = Split::test;
  train.features = Matrix(static_cast<std::size_t>(n_classes) * train_per_class, dims);
  test.features = Matrix(static_cast<std::size_t>(n_classes) * test_per_class, dims);

  std::size_t ti = 0, si = 0;
  for (int cls = 0; cls < n_classes; ++cls) {
    for (int s = 0; s < samples_per_class; ++s) {
      const bool to_train = s < train_per_class;
      double* row = to_train ? train.features.row_ptr(ti) : test.features.row_ptr(si);
      for (int d = 0; d < dims; ++d)
        row[d] = means[static_cast<std::size_t>(cls)][static_cast<std::size_t>(d)] +
                 spread * rng.normal();
      if (to_train) {
        train.labels.push_back(cls);
        ++ti;
      } else {
        test.labels.push_back(cls);
        ++si;
      }
    }
  }
  return {std::move(train), std::move(test)};
}

// Class-disjoint assignment; the first listed agent is the local one and the
// only one that receives the random mix-in.
struct PartitionSpec {
  std::vector<std::pair<int, std::set<int>>> class_assignment;  // (agent_id, classes)
  double mixin_fraction = 0.0;                                  // in [0, 1)
};

struct DatasetPartition {
  int owner = -1;
  std::vector<int> indices;  // unique indices into the parent train set
};

inline std::map<int, DatasetPartition> partition_noniid(const Dataset& train,
                                                        const PartitionSpec& spec,
                                                        std::uint64_t seed) {
  if (spec.mixin_fraction < 0.0 || spec.mixin_fraction >= 1.0)
    throw ConfigError("partition_noniid: mixin_fraction must lie in [0, 1)");
  std::set<int> seen;
  for (const auto& [agent_id, classes] : spec.class_assignment) {
    for (int cls : classes) {
      if (cls < 0 || cls >= train.n_classes)
        throw ConfigError("partition_noniid: class " + std::to_string(cls) + " out of range");
      if (!seen.insert(cls).second)
        throw ConfigError("partition_noniid: class " + std::to_string(cls) +
                          " assigned to more than one agent");
    }
  }

  std::map<int, DatasetPartition> parts;
  for (const auto& [agent_id, classes] : spec.class_assignment) {
    DatasetPartition p;
    p.owner = agent_id;
    for (std::size_t i = 0; i < train.size(); ++i)
      if (classes.count(train.labels[i])) p.indices.push_back(static_cast<int>(i));
    parts.emplace(agent_id, std::move(p));
  }

  if (spec.mixin_fraction > 0.0 && !spec.class_assignment.empty()) {
    const int local_id = spec.class_assignment.front().first;
    DatasetPartition& local = parts.at(local_id);
    const auto want =
        static_cast<std::size_t>(spec.mixin_fraction * static_cast<double>(local.indices.size()));
    std::set<int> owned(local.indices.begin(), local.indices.end());
    std::vector<int> pool;
    for (std::size_t i = 0; i < train.size(); ++i)
      if (!owned.count(static_cast<int>(i))) pool.push_back(static_cast<int>(i));
    RngStream rng(seed);
    rng.shuffle(pool);
    const std::size_t take = std::min(want, pool.size());
    local.indices.insert(local.indices.end(), pool.begin(), pool.begin() + take);
  }
  return parts;
}

struct Batch {
  Matrix x;
  std::vector<int> labels;
};

// Shuffled mini-batches over a partition; the final short batch is kept.
inline std::vector<Batch> batches(const Dataset& data, const DatasetPartition& part,
                                  int batch_size, std::uint64_t epoch_seed) {
  if (batch_size < 1) throw InputError("batches: batch_size must be >= 1");
  if (part.indices.empty()) throw InputError("batches: empty partition");
  std::vector<int> order = part.indices;
  RngStream rng(epoch_seed);
  rng.shuffle(order);

  std::vector<Batch> out;
  const std::size_t dims = data.dims();
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t count = std::min<std::size_t>(batch_size, order.size() - start);
    Batch b;
    b.x = Matrix(count, dims);
    b.labels.resize(count);
    for (std::size_t r = 0; r < count; ++r) {
      const auto src = static_cast<std::size_t>(order[start + r]);
      const double* src_row = data.features.row_ptr(src);
      std::copy(src_row, src_row + dims, b.x.row_ptr(r));
      b.labels[r] = data.labels[src];
    }
    out.push_back(std::move(b));
  }
  return out;
}

// First n samples of each class, in dataset order. Used for the desk-scale
// image-data mode.
inline Dataset subsample_per_class(const Dataset& data, int per_class) {
  if (per_class < 1) throw InputError("subsample_per_class: need per_class >= 1");
  std::map<int, int> taken;
  std::vector<int> keep;
  for (std::size_t i = 0; i < data.size(); ++i)
    if (taken[data.labels[i]]++ < per_class) keep.push_back(static_cast<int>(i));
  Dataset out;
  out.n_classes = data.n_classes;
  out.split = data.split;
  out.features = Matrix(keep.size(), data.dims());
  out.labels.resize(keep.size());
  for (std::size_t r = 0; r < keep.size(); ++r) {
    const auto src = static_cast<std::size_t>(keep[r]);
    const double* src_row = data.features.row_ptr(src);
    std::copy(src_row, src_row + data.dims(), out.features.row_ptr(r));
    out.labels[r] = data.labels[src];
  }
  return out;
}

}  // namespace meshlearn
