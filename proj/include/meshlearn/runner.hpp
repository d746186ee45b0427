#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "meshlearn/agent.hpp"
#include "meshlearn/baselines.hpp"
#include "meshlearn/dataset.hpp"
#include "meshlearn/dense_net.hpp"
#include "meshlearn/errors.hpp"
#include "meshlearn/idx.hpp"
#include "meshlearn/metrics.hpp"
#include "meshlearn/rng.hpp"
#include "meshlearn/run_config.hpp"
#include "meshlearn/simulation.hpp"
#include "meshlearn/topology.hpp"
#include "meshlearn/transfer.hpp"

namespace meshlearn {

// Pseudo-agent id for the federated aggregation point in message logs.
constexpr int kAggregatorId = -1;

struct World {
  Dataset train;
  Dataset test;
  std::vector<Agent> agents;  // ids 0..n-1, ascending
  MeshTopology topology;
  std::map<int, std::set<int>> local_classes;
};

inline std::vector<std::string> class_names_for(const RunConfig& c) {
  if (c.dataset_kind == "fmnist" && c.n_classes == 10)
    return {"tshirt", "trouser", "pullover", "dress", "coat",
            "sandal", "shirt",   "sneaker",  "bag",   "boot"};
  std::vector<std::string> names;
  for (int k = 0; k < c.n_classes; ++k) names.push_back("class" + std::to_string(k));
  return names;
}

inline std::pair<Dataset, Dataset> build_datasets(const RunConfig& c, std::uint64_t seed) {
  if (c.dataset_kind == "synthetic")
    return generate_blobs(c.n_classes, c.samples_per_class, c.dims, c.spread,
                          derive_seed(seed, kData));
  const std::filesystem::path dir(c.fmnist_dir);
  Dataset train = load_idx((dir / "train-images-idx3-ubyte").string(),
                           (dir / "train-labels-idx1-ubyte").string(), c.n_classes);
  Dataset test = load_idx((dir / "t10k-images-idx3-ubyte").string(),
                          (dir / "t10k-labels-idx1-ubyte").string(), c.n_classes);
  train.split = Split::train;
  test.split = Split::test;
  if (c.fmnist_train_per_class > 0) train = subsample_per_class(train, c.fmnist_train_per_class);
  if (c.fmnist_test_per_class > 0) test = subsample_per_class(test, c.fmnist_test_per_class);
  return {std::move(train), std::move(test)};
}

// Everything a single-seed run needs: data, partitions, initialized agents,
// and the communication graph. The "none" method always gets an empty graph.
inline World build_world(const RunConfig& c, std::uint64_t seed) {
  World w;
  std::tie(w.train, w.test) = build_datasets(c, seed);

  PartitionSpec spec;
  spec.mixin_fraction = c.mixin_fraction;
  std::vector<int> agent_ids;
  for (int i = 0; i < c.n_agents(); ++i) {
    const auto& classes = c.class_assignment[static_cast<std::size_t>(i)];
    spec.class_assignment.emplace_back(i, std::set<int>(classes.begin(), classes.end()));
    w.local_classes[i] = {classes.begin(), classes.end()};
    agent_ids.push_back(i);
  }
  auto parts = partition_noniid(w.train, spec, derive_seed(seed, kPartition));

  const std::vector<std::size_t> dims = {w.train.dims(),
                                         static_cast<std::size_t>(c.hidden_width),
                                         static_cast<std::size_t>(c.hidden_width),
                                         static_cast<std::size_t>(c.n_classes)};
  for (int id : agent_ids) {
    Agent a;
    a.id = id;
    a.model = DenseNet::make(dims);
    RngStream init_rng(derive_seed(seed, kInit, static_cast<std::uint64_t>(id)));
    init_weights(a.model, init_rng);
    a.local_optimizer.learning_rate = c.lr_local;
    a.local_optimizer.momentum = c.momentum;
    a.partition = std::move(parts.at(id));
    w.agents.push_back(std::move(a));
  }

  const std::string topo_name = c.method == "none" ? "none" : c.topology;
  w.topology = build_preset(topo_name, agent_ids);
  return w;
}

inline std::string method_label(const RunConfig& c) {
  return c.method == "gossip" ? "gossip-avg" : c.method;
}

struct SeedRunResult {
  std::vector<MetricsRecord> records;
  std::map<int, ConfusionMatrix> final_confusion;
  std::vector<DenseNet> final_models;  // by agent index, ascending id
  long long messages_total = 0;
  double wall_seconds = 0.0;  // reported in a sidecar, never in the CSVs
};

namespace detail {

inline void evaluate_all(const World& w, int epoch, const std::string& label,
                         const std::map<int, double>& loss1,
                         const std::map<int, double>& loss2, long long messages,
                         std::vector<MetricsRecord>& out) {
  for (const Agent& a : w.agents) {
    const EvalResult ev = evaluate(a.model, w.test, w.local_classes.at(a.id));
    MetricsRecord rec;
    rec.epoch = epoch;
    rec.agent_id = a.id;
    rec.method = label;
    rec.local_acc = ev.local_acc;
    rec.remote_acc = ev.remote_acc;
    rec.combined_acc = ev.combined_acc;
    rec.loss1 = loss1.count(a.id) ? loss1.at(a.id) : 0.0;
    rec.loss2 = loss2.count(a.id) ? loss2.at(a.id) : 0.0;
    rec.messages_total = messages;
    out.push_back(std::move(rec));
  }
}

// Distillation run: agents with in-edges add the logit-distance term against
// epoch-start snapshots; pure sources train plainly.
inline SeedRunResult run_kd(World& w, const RunConfig& c, std::uint64_t seed) {
  SeedRunResult result;
  KdConfig kd{c.kd_lambda, c.kd_l1};
  MessageLog log;
  for (int epoch = 1; epoch <= c.epochs; ++epoch) {
    const auto snaps = snapshot_all(w.agents);
    const std::uint64_t shuffle = derive_seed(seed, kShuffleLocal, epoch);
    std::map<int, double> loss1, loss2;
    for (Agent& a : w.agents) {
      const std::vector<int> source_ids = w.topology.sources_of(a.id);
      std::vector<SourceSnapshot> sources;
      for (int sid : source_ids) {
        sources.push_back(snapshot_of(snaps, sid));
        log.record(sid, a.id, epoch);
      }
      double ce_sum = 0.0, dist_sum = 0.0;
      std::size_t n = 0;
      for (const Batch& b : batches(w.train, a.partition, c.batch_size, shuffle)) {
        if (sources.empty()) {
          ce_sum += local_train_step(a, b);
        } else {
          const KdLossParts parts = kd_step(a, sources, b, kd);
          ce_sum += parts.ce_loss;
          dist_sum += parts.dist_loss;
        }
        ++n;
      }
      loss1[a.id] = n ? ce_sum / static_cast<double>(n) : 0.0;
      loss2[a.id] = n ? dist_sum / static_cast<double>(n) : 0.0;
    }
    evaluate_all(w, epoch, method_label(c), loss1, loss2, log.total, result.records);
  }
  result.messages_total = log.total;
  return result;
}

inline SeedRunResult run_fedavg(World& w, const RunConfig& c, std::uint64_t seed) {
  SeedRunResult result;
  FedConfig fed;
  fed.local_epochs_per_round = c.fed_local_epochs;
  fed.sample_weighted = c.fed_sample_weighted;
  MessageLog log;
  for (int round = 0; round < c.epochs; ++round) {
    const std::vector<double> losses =
        fedavg_round(w.agents, w.train, c.batch_size, seed, round, fed);
    std::map<int, double> loss1, loss2;
    for (std::size_t i = 0; i < w.agents.size(); ++i) {
      loss1[w.agents[i].id] = losses[i];
      log.record(w.agents[i].id, kAggregatorId, round + 1);  // upload
      log.record(kAggregatorId, w.agents[i].id, round + 1);  // broadcast back
    }
    evaluate_all(w, round + 1, method_label(c), loss1, loss2, log.total, result.records);
  }
  result.messages_total = log.total;
  return result;
}

inline SeedRunResult run_gossip(World& w, const RunConfig& c, std::uint64_t seed) {
  SeedRunResult result;
  GossipConfig gossip;
  gossip.mixing_weight = c.gossip_mu;
  RngStream edge_rng(derive_seed(seed, kGossip));
  MessageLog log;
  for (int round = 0; round < c.epochs; ++round) {
    const auto [u, v] = gossip_round(w.agents, w.topology, w.train, c.batch_size, seed,
                                     round, edge_rng, gossip);
    log.record(u, v, round + 1);
    log.record(v, u, round + 1);
    evaluate_all(w, round + 1, method_label(c), {}, {}, log.total, result.records);
  }
  result.messages_total = log.total;
  return result;
}

}  // namespace detail

inline SeedRunResult run_one_seed(const RunConfig& c, std::uint64_t seed) {
  const auto t0 = std::chrono::steady_clock::now();
  World w = build_world(c, seed);
  SeedRunResult result;

  if (c.method == "ours" || c.method == "none") {
    attach_pipelines(w.agents, w.topology, c.lr_transfer, c.momentum);
    Schedule schedule;
    schedule.mode = c.schedule == "batch_interleaved" ? ScheduleMode::batch_interleaved
                                                      : ScheduleMode::epoch_interleaved;
    schedule.total_epochs = c.epochs;
    SimOptions opts;
    opts.weights = LossWeights::from_alpha(c.alpha);
    opts.batch_size = c.batch_size;
    opts.objective = c.objective == "kl_only" ? PipelineObjective::kl_only
                                              : PipelineObjective::combined;
    opts.freeze_sources = c.freeze_sources;
    opts.install_feedback = c.install_feedback;
    SimResult sim = run_simulation(w.agents, w.topology, schedule, opts, w.train, w.test,
                                   w.local_classes, seed, method_label(c));
    result.records = std::move(sim.records);
    result.messages_total = sim.messages.total;
  } else if (c.method == "kd") {
    result = detail::run_kd(w, c, seed);
  } else if (c.method == "fedavg") {
    result = detail::run_fedavg(w, c, seed);
  } else if (c.method == "gossip") {
    result = detail::run_gossip(w, c, seed);
  } else {
    throw ConfigError("run_one_seed: unknown method '" + c.method + "'");
  }

  for (const Agent& a : w.agents) {
    result.final_confusion.emplace(
        a.id, evaluate(a.model, w.test, w.local_classes.at(a.id)).confusion);
    result.final_models.push_back(a.model);
  }
  result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

// metrics_<seed>.csv, confusion_<agent>_<seed>.csv, timing_<seed>.txt.
inline void write_seed_artifacts(const SeedRunResult& r, const RunConfig& c,
                                 std::uint64_t seed, const std::string& out_dir) {
  const std::filesystem::path dir(out_dir);
  std::filesystem::create_directories(dir);
  write_metrics_csv(r.records, (dir / ("metrics_" + std::to_string(seed) + ".csv")).string());
  const auto names = class_names_for(c);
  for (const auto& [agent_id, cm] : r.final_confusion)
    write_confusion_csv(cm, names,
                        (dir / ("confusion_" + std::to_string(agent_id) + "_" +
                                std::to_string(seed) + ".csv"))
                            .string());
  std::ofstream timing(dir / ("timing_" + std::to_string(seed) + ".txt"));
  if (timing) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.3f", r.wall_seconds);
    timing << "wall_clock_seconds=" << buf << '\n';
  }
}

// Full sweep: every configured seed plus the shared manifest. Returns the
// per-seed results so callers can aggregate without re-reading files.
inline std::vector<SeedRunResult> run_all_seeds(const RunConfig& c) {
  std::filesystem::create_directories(c.out_dir);
  write_manifest(c, (std::filesystem::path(c.out_dir) / "manifest.json").string());
  std::vector<SeedRunResult> results;
  for (int seed : c.seeds) {
    SeedRunResult r = run_one_seed(c, static_cast<std::uint64_t>(seed));
    write_seed_artifacts(r, c, static_cast<std::uint64_t>(seed), c.out_dir);
    results.push_back(std::move(r));
  }
  return results;
}

}  // namespace meshlearn
