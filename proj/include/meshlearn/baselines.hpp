#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "meshlearn/agent.hpp"
#include "meshlearn/dataset.hpp"
#include "meshlearn/dense_net.hpp"
#include "meshlearn/errors.hpp"
#include "meshlearn/losses.hpp"
#include "meshlearn/rng.hpp"
#include "meshlearn/simulation.hpp"
#include "meshlearn/topology.hpp"

namespace meshlearn {

// Real-time distillation: the local objective plus a penalty on the distance
// between target and source logits on the target's own batch.
struct KdConfig {
  double lambda = 1.0;
  bool l1_distance = false;  // default is mean-squared distance
};

struct KdLossParts {
  double ce_loss = 0.0;
  double dist_loss = 0.0;  // pre-lambda, averaged over sources
  double total = 0.0;
};

struct KdGradsResult {
  KdLossParts losses;
  std::vector<LayerGrads> grads;
};

// Loss and full-parameter gradients without applying an update; split out so
// the gradient can be checked against finite differences directly.
inline KdGradsResult kd_loss_and_grads(const DenseNet& net,
                                       const std::vector<SourceSnapshot>& sources,
                                       const Batch& batch, const KdConfig& cfg) {
  if (sources.empty()) throw ConfigError("kd: at least one source required");
  if (!std::isfinite(cfg.lambda) || cfg.lambda < 0.0)
    throw ConfigError("kd: lambda must be finite and non-negative");

  ForwardCache cache;
  const Matrix logits = forward(net, batch.x, &cache);
  const CrossEntropyResult ce = cross_entropy(logits, batch.labels);

  KdGradsResult out;
  out.losses.ce_loss = ce.loss;
  Matrix grad_logits = ce.grad_logits;

  if (cfg.lambda > 0.0) {
    const double denom = static_cast<double>(logits.rows() * logits.cols());
    Matrix dist_grad(logits.rows(), logits.cols());
    for (const SourceSnapshot& src : sources) {
      const Matrix src_logits = forward(src.model, batch.x);
      for (std::size_t i = 0; i < logits.values().size(); ++i) {
        const double diff = logits.values()[i] - src_logits.values()[i];
        if (cfg.l1_distance) {
          out.losses.dist_loss += std::abs(diff) / denom;
          dist_grad.values()[i] += (diff > 0.0 ? 1.0 : diff < 0.0 ? -1.0 : 0.0) / denom;
        } else {
          out.losses.dist_loss += diff * diff / denom;
          dist_grad.values()[i] += 2.0 * diff / denom;
        }
      }
    }
    const double inv_sources = 1.0 / static_cast<double>(sources.size());
    out.losses.dist_loss *= inv_sources;
    for (std::size_t i = 0; i < grad_logits.values().size(); ++i)
      grad_logits.values()[i] += cfg.lambda * inv_sources * dist_grad.values()[i];
  }
  out.losses.total = out.losses.ce_loss + cfg.lambda * out.losses.dist_loss;
  out.grads = backward(net, cache, grad_logits);
  return out;
}

inline KdLossParts kd_step(Agent& agent, const std::vector<SourceSnapshot>& sources,
                           const Batch& batch, const KdConfig& cfg) {
  KdGradsResult r = kd_loss_and_grads(agent.model, sources, batch, cfg);
  sgd_step(agent.model, r.grads, agent.local_optimizer);
  return r.losses;
}

// Decentralized federated averaging: every agent trains locally, then all
// parameters are replaced by the element-wise mean.
struct FedConfig {
  int rounds = 1;
  int local_epochs_per_round = 1;
  bool sample_weighted = false;  // default unweighted, per the 3-agent setup
};

namespace detail {

// Mean written as p0 + sum(pi - p0)/n so that identical inputs reproduce p0
// bit-exactly (every difference is exactly zero).
inline double shifted_mean(const std::vector<double>& xs) {
  double acc = 0.0;
  for (double x : xs) acc += x - xs.front();
  return xs.front() + acc / static_cast<double>(xs.size());
}

}  // namespace detail

inline void fedavg_average(std::vector<Agent>& agents, const FedConfig& cfg) {
  if (agents.empty()) throw ConfigError("fedavg: no agents");
  const DenseNet& ref = agents.front().model;
  for (const Agent& a : agents) {
    if (a.model.layers.size() != ref.layers.size())
      throw ConfigError("fedavg: agents disagree on layer count");
    for (std::size_t li = 0; li < ref.layers.size(); ++li)
      if (!a.model.layers[li].weights.same_shape(ref.layers[li].weights))
        throw ConfigError("fedavg: layer " + std::to_string(li) + " shape mismatch");
  }

  std::vector<double> share(agents.size(), 1.0 / static_cast<double>(agents.size()));
  if (cfg.sample_weighted) {
    double total = 0.0;
    for (const Agent& a : agents) total += static_cast<double>(a.partition.indices.size());
    if (total <= 0.0) throw ConfigError("fedavg: weighted averaging over empty partitions");
    for (std::size_t i = 0; i < agents.size(); ++i)
      share[i] = static_cast<double>(agents[i].partition.indices.size()) / total;
  }

  std::vector<double> column(agents.size());
  auto average_buffer = [&](auto member_of) {
    const std::size_t count = member_of(agents.front()).size();
    for (std::size_t j = 0; j < count; ++j) {
      for (std::size_t i = 0; i < agents.size(); ++i) column[i] = member_of(agents[i])[j];
      double avg;
      if (cfg.sample_weighted) {
        avg = 0.0;
        for (std::size_t i = 0; i < agents.size(); ++i) avg += share[i] * column[i];
      } else {
        avg = detail::shifted_mean(column);
      }
      for (Agent& a : agents) member_of(a)[j] = avg;
    }
  };
  for (std::size_t li = 0; li < ref.layers.size(); ++li) {
    average_buffer([li](Agent& a) -> std::vector<double>& {
      return a.model.layers[li].weights.values();
    });
    average_buffer(
        [li](Agent& a) -> std::vector<double>& { return a.model.layers[li].bias; });
  }
}

// One federated round: local training then consolidation. `round_index` is
// 0-based; local shuffle seeds continue the same global epoch numbering the
// other methods use.
inline std::vector<double> fedavg_round(std::vector<Agent>& agents, const Dataset& train,
                                        int batch_size, std::uint64_t run_seed,
                                        int round_index, const FedConfig& cfg) {
  if (cfg.local_epochs_per_round < 1)
    throw ConfigError("fedavg: local_epochs_per_round must be >= 1");
  std::vector<double> mean_loss1(agents.size(), 0.0);
  for (int e = 0; e < cfg.local_epochs_per_round; ++e) {
    const int global_epoch = round_index * cfg.local_epochs_per_round + e + 1;
    const std::uint64_t seed = derive_seed(run_seed, kShuffleLocal, global_epoch);
    for (std::size_t i = 0; i < agents.size(); ++i) {
      double sum = 0.0;
      std::size_t n = 0;
      for (const Batch& b : batches(train, agents[i].partition, batch_size, seed)) {
        sum += local_train_step(agents[i], b);
        ++n;
      }
      mean_loss1[i] = n ? sum / static_cast<double>(n) : 0.0;
    }
  }
  fedavg_average(agents, cfg);
  return mean_loss1;
}

// Randomized pairwise convex mixing over the topology's undirected neighbor
// pairs. This is not full ADMM (no dual variables); outputs label the method
// "gossip-avg" accordingly.
struct GossipConfig {
  int rounds = 1;
  double mixing_weight = 1.0;  // mu in (0,1]; 1 = plain pairwise averaging
};

inline std::vector<std::pair<int, int>> undirected_pairs(const MeshTopology& topo) {
  std::set<std::pair<int, int>> pairs;
  for (const auto& [s, t] : topo.edges) pairs.emplace(std::min(s, t), std::max(s, t));
  return {pairs.begin(), pairs.end()};
}

inline void gossip_mix(DenseNet& u, DenseNet& v, double mu) {
  const double keep = 1.0 - mu / 2.0, take = mu / 2.0;
  auto mix = [&](std::vector<double>& a, std::vector<double>& b) {
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double ai = a[i], bi = b[i];
      a[i] = keep * ai + take * bi;
      b[i] = keep * bi + take * ai;
    }
  };
  if (u.layers.size() != v.layers.size())
    throw ConfigError("gossip: agents disagree on layer count");
  for (std::size_t li = 0; li < u.layers.size(); ++li) {
    if (!u.layers[li].weights.same_shape(v.layers[li].weights))
      throw ConfigError("gossip: layer " + std::to_string(li) + " shape mismatch");
    mix(u.layers[li].weights.values(), v.layers[li].weights.values());
    mix(u.layers[li].bias, v.layers[li].bias);
  }
}

// One gossip round: a local epoch for everyone, then a single random edge
// exchange. `rng` persists across rounds so edge draws do not repeat.
inline std::pair<int, int> gossip_round(std::vector<Agent>& agents,
                                        const MeshTopology& topo, const Dataset& train,
                                        int batch_size, std::uint64_t run_seed,
                                        int round_index, RngStream& rng,
                                        const GossipConfig& cfg) {
  if (cfg.mixing_weight <= 0.0 || cfg.mixing_weight > 1.0)
    throw ConfigError("gossip: mixing_weight must lie in (0, 1]");
  const auto pairs = undirected_pairs(topo);
  if (pairs.empty()) throw ConfigError("gossip: topology has no edges");

  const std::uint64_t seed = derive_seed(run_seed, kShuffleLocal, round_index + 1);
  for (Agent& a : agents)
    for (const Batch& b : batches(train, a.partition, batch_size, seed))
      local_train_step(a, b);

  const auto [u_id, v_id] = pairs[rng.below(pairs.size())];
  auto find = [&agents](int id) -> Agent& {
    for (Agent& a : agents)
      if (a.id == id) return a;
    throw ConfigError("gossip: edge endpoint " + std::to_string(id) + " is not an agent");
  };
  gossip_mix(find(u_id).model, find(v_id).model, cfg.mixing_weight);
  return {u_id, v_id};
}

}  // namespace meshlearn
