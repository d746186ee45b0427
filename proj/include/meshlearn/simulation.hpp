#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "meshlearn/agent.hpp"
#include "meshlearn/dataset.hpp"
#include "meshlearn/dense_net.hpp"
#include "meshlearn/errors.hpp"
#include "meshlearn/losses.hpp"
#include "meshlearn/metrics.hpp"
#include "meshlearn/rng.hpp"
#include "meshlearn/topology.hpp"
#include "meshlearn/transfer.hpp"

namespace meshlearn {

enum class ScheduleMode {
  epoch_interleaved,  // one local epoch, then one transfer epoch
  batch_interleaved,  // local step + transfer steps on every batch
};

struct Schedule {
  ScheduleMode mode = ScheduleMode::epoch_interleaved;
  int total_epochs = 1;
};

// One message = one weight-snapshot fetch, charged per (source, target) per
// transfer epoch regardless of how many batches consume it.
struct MessageLog {
  std::map<std::tuple<int, int, int>, long long> counts;  // (source, target, epoch)
  long long total = 0;

  void record(int source, int target, int epoch) {
    ++counts[{source, target, epoch}];
    ++total;
  }
};

// Frozen copy of a source model. Deliberately holds no sample data: weight
// snapshots and output distributions are the only things that cross agents.
struct SourceSnapshot {
  int agent_id = -1;
  DenseNet model;
};

struct SimOptions {
  LossWeights weights = LossWeights::from_alpha(0.5);
  int batch_size = 32;
  PipelineObjective objective = PipelineObjective::combined;
  bool freeze_sources = false;  // ablation: pure sources skip local training
  // When false (default), each local phase resumes the agent's own locally
  // trained layer and the fused install only ever serves inference and the
  // next fusion; local training never runs on top of an install. When true,
  // local phases train the installed weights directly — the literal
  // recurrence, which compounds install upon install and diverges on deep
  // runs; kept as an opt-in for studying that behavior.
  bool install_feedback = false;
};

inline double local_train_step(Agent& agent, const Batch& batch) {
  if (batch.labels.empty()) throw InputError("local_train_step: empty batch");
  ForwardCache cache;
  const Matrix logits = forward(agent.model, batch.x, &cache);
  const CrossEntropyResult ce = cross_entropy(logits, batch.labels);
  const std::vector<LayerGrads> grads = backward(agent.model, cache, ce.grad_logits);
  sgd_step(agent.model, grads, agent.local_optimizer);
  return ce.loss;
}

// One Pipeline per in-edge, hosted on the penultimate layer, created once
// per run so the transfer models keep learning across epochs.
inline void attach_pipelines(std::vector<Agent>& agents, const MeshTopology& topo,
                             double lr_transfer, double momentum = 0.0) {
  for (Agent& agent : agents) {
    agent.pipelines.clear();
    const std::size_t li = agent.model.penultimate_index();
    const Matrix& host = agent.model.layers[li].weights;
    if (host.rows() != host.cols())
      throw ConfigError("attach_pipelines: transfer layer must be square, got " +
                        host.shape_str());
    for (int source : topo.sources_of(agent.id)) {
      Pipeline p;
      p.source_agent_id = source;
      p.target_layer_index = li;
      p.model = TransferModel::selector_init(host.rows(), lr_transfer, momentum);
      agent.pipelines.push_back(std::move(p));
    }
  }
}

struct TransferEpochSummary {
  double mean_loss1 = 0.0;
  double mean_loss2 = 0.0;  // averaged over sources, then over batches
  double mean_combined = 0.0;
  std::size_t steps = 0;
};

// One pass over the target's batches applying every source pipeline in
// ascending source-id order. The local optimizer is not touched; only the
// transfer models (and through them the hosted layer) move.
//
// The locally-trained layer is frozen once at phase entry and every batch
// restarts the fusion chain from that copy; within a batch each subsequent
// source fuses against the state the previous one installed. Rebuilding the
// concat from the live layer instead would feed each install back into its
// own input and compound the mixing matrix once per batch.
inline TransferEpochSummary transfer_epoch(Agent& target,
                                           const std::vector<SourceSnapshot>& sources,
                                           const std::vector<Batch>& batch_list,
                                           const LossWeights& weights, MessageLog& log,
                                           int epoch, PipelineObjective objective) {
  TransferEpochSummary summary;
  if (sources.empty()) return summary;
  for (const SourceSnapshot& src : sources) log.record(src.agent_id, target.id, epoch);

  const std::size_t host_index = target.pipeline_for(sources.front().agent_id).target_layer_index;
  const Matrix frozen_block = target.model.layers[host_index].weights;

  double loss1_sum = 0.0, loss2_sum = 0.0, combined_sum = 0.0;
  for (const Batch& batch : batch_list) {
    double batch_loss2 = 0.0;
    Matrix chain_block = frozen_block;
    for (const SourceSnapshot& src : sources) {
      Pipeline& pipe = target.pipeline_for(src.agent_id);
      const Matrix& src_weights = src.model.layers[pipe.target_layer_index].weights;
      const Matrix source_probs = softmax(forward(src.model, batch.x));
      const PipelineStepResult step = pipeline_step(
          target.model, pipe, src_weights, chain_block, source_probs, batch.x, batch.labels,
          weights, objective);
      chain_block = target.model.layers[pipe.target_layer_index].weights;
      loss1_sum += step.loss1;
      batch_loss2 += step.loss2;
      combined_sum += step.combined;
      ++summary.steps;
    }
    loss2_sum += batch_loss2 / static_cast<double>(sources.size());
  }
  if (summary.steps > 0) {
    summary.mean_loss1 = loss1_sum / static_cast<double>(summary.steps);
    summary.mean_loss2 = loss2_sum / static_cast<double>(batch_list.size());
    summary.mean_combined = combined_sum / static_cast<double>(summary.steps);
  }
  return summary;
}

struct SimResult {
  std::vector<MetricsRecord> records;  // one per (epoch, agent), epoch-major
  MessageLog messages;
};

namespace detail {

inline std::vector<SourceSnapshot> snapshot_all(const std::vector<Agent>& agents) {
  std::vector<SourceSnapshot> snaps;
  snaps.reserve(agents.size());
  for (const Agent& a : agents) snaps.push_back({a.id, a.model});
  return snaps;
}

inline const SourceSnapshot& snapshot_of(const std::vector<SourceSnapshot>& snaps, int id) {
  for (const SourceSnapshot& s : snaps)
    if (s.agent_id == id) return s;
  throw ConfigError("run_simulation: no snapshot for agent " + std::to_string(id));
}

inline bool is_pure_source(const MeshTopology& topo, int id) {
  bool out_edge = false;
  for (const auto& [s, t] : topo.edges) {
    if (t == id) return false;
    if (s == id) out_edge = true;
  }
  return out_edge;
}

}  // namespace detail

// Deterministic multi-agent loop. Batch order depends on (seed, epoch,
// phase) but never on agent id, so a lone agent replays exactly the same
// batches it would see inside a larger mesh.
inline SimResult run_simulation(std::vector<Agent>& agents, const MeshTopology& topology,
                                const Schedule& schedule, const SimOptions& opts,
                                const Dataset& train, const Dataset& test,
                                const std::map<int, std::set<int>>& local_classes,
                                std::uint64_t run_seed, const std::string& method_tag) {
  if (schedule.total_epochs < 1)
    throw ConfigError("run_simulation: total_epochs must be >= 1");
  std::sort(agents.begin(), agents.end(),
            [](const Agent& a, const Agent& b) { return a.id < b.id; });
  for (const auto& [s, t] : topology.edges) {
    if (s == t) throw ConfigError("run_simulation: self-edge on agent " + std::to_string(s));
    for (int end : {s, t})
      if (std::none_of(agents.begin(), agents.end(),
                       [end](const Agent& a) { return a.id == end; }))
        throw ConfigError("run_simulation: edge endpoint " + std::to_string(end) +
                          " is not an agent");
  }

  // Receiving agents carry two versions of the hosted layer. local_layer is
  // the locally-trained lineage each local phase resumes; served_layer is the
  // last fused install — the model the agent actually serves, evaluates with,
  // and advertises to peers. Keeping the lineages apart means an install can
  // never erode locally-learned parameters, while advertising the served
  // layer still lets absorbed knowledge propagate across mesh hops.
  std::map<int, Matrix> local_layer;
  std::map<int, Matrix> served_layer;

  SimResult result;
  for (int epoch = 1; epoch <= schedule.total_epochs; ++epoch) {
    std::map<int, double> epoch_loss1, epoch_loss2;

    if (schedule.mode == ScheduleMode::epoch_interleaved) {
      const std::uint64_t local_seed = derive_seed(run_seed, kShuffleLocal, epoch);
      for (Agent& agent : agents) {
        if (opts.freeze_sources && detail::is_pure_source(topology, agent.id)) continue;
        if (!opts.install_feedback)
          if (const auto it = local_layer.find(agent.id); it != local_layer.end())
            agent.model.layers[agent.model.penultimate_index()].weights = it->second;
        double sum = 0.0;
        std::size_t n = 0;
        for (const Batch& b : batches(train, agent.partition, opts.batch_size, local_seed)) {
          sum += local_train_step(agent, b);
          ++n;
        }
        epoch_loss1[agent.id] = n ? sum / static_cast<double>(n) : 0.0;
      }

      auto snaps = detail::snapshot_all(agents);
      for (SourceSnapshot& s : snaps)
        if (const auto it = served_layer.find(s.agent_id); it != served_layer.end())
          s.model.layers[s.model.penultimate_index()].weights = it->second;
      const std::uint64_t transfer_seed = derive_seed(run_seed, kShuffleTransfer, epoch);
      for (Agent& agent : agents) {
        const std::vector<int> source_ids = topology.sources_of(agent.id);
        if (source_ids.empty()) continue;
        std::vector<SourceSnapshot> sources;
        for (int sid : source_ids) sources.push_back(detail::snapshot_of(snaps, sid));
        if (!opts.install_feedback)
          local_layer[agent.id] = agent.model.layers[agent.model.penultimate_index()].weights;
        const auto batch_list = batches(train, agent.partition, opts.batch_size, transfer_seed);
        const TransferEpochSummary s = transfer_epoch(
            agent, sources, batch_list, opts.weights, result.messages, epoch, opts.objective);
        if (!opts.install_feedback)
          served_layer[agent.id] = agent.model.layers[agent.model.penultimate_index()].weights;
        epoch_loss2[agent.id] = s.mean_loss2;
      }
    } else {  // batch_interleaved: local step plus transfer steps on each batch
      auto snaps = detail::snapshot_all(agents);
      for (SourceSnapshot& s : snaps)
        if (const auto it = served_layer.find(s.agent_id); it != served_layer.end())
          s.model.layers[s.model.penultimate_index()].weights = it->second;
      const std::uint64_t local_seed = derive_seed(run_seed, kShuffleLocal, epoch);
      for (Agent& agent : agents) {
        const std::vector<int> source_ids = topology.sources_of(agent.id);
        std::vector<SourceSnapshot> sources;
        for (int sid : source_ids) sources.push_back(detail::snapshot_of(snaps, sid));
        for (const SourceSnapshot& src : sources)
          result.messages.record(src.agent_id, agent.id, epoch);

        const std::size_t host = agent.model.penultimate_index();
        double sum1 = 0.0, sum2 = 0.0;
        std::size_t n = 0;
        for (const Batch& b : batches(train, agent.partition, opts.batch_size, local_seed)) {
          if (!opts.install_feedback)
            if (const auto it = local_layer.find(agent.id); it != local_layer.end())
              agent.model.layers[host].weights = it->second;
          sum1 += local_train_step(agent, b);
          ++n;
          if (sources.empty()) continue;
          if (!opts.install_feedback) local_layer[agent.id] = agent.model.layers[host].weights;

          double batch_loss2 = 0.0;
          Matrix chain_block = agent.model.layers[host].weights;
          for (const SourceSnapshot& src : sources) {
            Pipeline& pipe = agent.pipeline_for(src.agent_id);
            const Matrix& src_weights = src.model.layers[pipe.target_layer_index].weights;
            const Matrix source_probs = softmax(forward(src.model, b.x));
            batch_loss2 += pipeline_step(agent.model, pipe, src_weights, chain_block,
                                         source_probs, b.x, b.labels, opts.weights,
                                         opts.objective)
                               .loss2;
            chain_block = agent.model.layers[pipe.target_layer_index].weights;
          }
          if (!opts.install_feedback)
            served_layer[agent.id] = agent.model.layers[host].weights;
          sum2 += batch_loss2 / static_cast<double>(sources.size());
        }
        epoch_loss1[agent.id] = n ? sum1 / static_cast<double>(n) : 0.0;
        epoch_loss2[agent.id] = n ? sum2 / static_cast<double>(n) : 0.0;
      }
    }

    for (const Agent& agent : agents) {
      const auto it = local_classes.find(agent.id);
      if (it == local_classes.end())
        throw ConfigError("run_simulation: no class set for agent " +
                          std::to_string(agent.id));
      const EvalResult ev = evaluate(agent.model, test, it->second);
      MetricsRecord rec;
      rec.epoch = epoch;
      rec.agent_id = agent.id;
      rec.method = method_tag;
      rec.local_acc = ev.local_acc;
      rec.remote_acc = ev.remote_acc;
      rec.combined_acc = ev.combined_acc;
      rec.loss1 = epoch_loss1.count(agent.id) ? epoch_loss1[agent.id] : 0.0;
      rec.loss2 = epoch_loss2.count(agent.id) ? epoch_loss2[agent.id] : 0.0;
      rec.messages_total = result.messages.total;
      result.records.push_back(std::move(rec));
    }
  }
  return result;
}

}  // namespace meshlearn
