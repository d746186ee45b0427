#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "meshlearn/dataset.hpp"
#include "meshlearn/dense_net.hpp"
#include "meshlearn/errors.hpp"
#include "meshlearn/optimizer.hpp"
#include "meshlearn/transfer.hpp"

namespace meshlearn {

struct Agent {
  int id = -1;
  DenseNet model;
  SgdState local_optimizer;
  DatasetPartition partition;
  std::vector<Pipeline> pipelines;  // ascending source id, one per in-edge

  Pipeline& pipeline_for(int source_id) {
    for (Pipeline& p : pipelines)
      if (p.source_agent_id == source_id) return p;
    throw ConfigError("agent " + std::to_string(id) + ": no pipeline for source " +
                      std::to_string(source_id));
  }
};

// What an agent publishes about itself so peers can judge whether it is a
// useful source: observed classes, sample counts, and the shape of the layer
// it offers for transfer.
struct SourceAdvertisement {
  int agent_id = -1;
  std::set<int> classes;
  std::map<int, int> class_counts;
  std::size_t layer_rows = 0;
  std::size_t layer_cols = 0;
};

inline SourceAdvertisement make_advertisement(const Agent& agent, const Dataset& train) {
  SourceAdvertisement ad;
  ad.agent_id = agent.id;
  for (int idx : agent.partition.indices) {
    const int cls = train.labels[static_cast<std::size_t>(idx)];
    ad.classes.insert(cls);
    ++ad.class_counts[cls];
  }
  const Matrix& host = agent.model.layers[agent.model.penultimate_index()].weights;
  ad.layer_rows = host.rows();
  ad.layer_cols = host.cols();
  return ad;
}

// Advisory comparison of a candidate source against the target's own data
// view: how much is new, how much overlaps, and whether a transfer layer
// could host the candidate's weights at all.
struct SourceScore {
  int candidate_id = -1;
  std::size_t intersection_size = 0;  // classes both already observe
  std::size_t difference_size = 0;    // classes only the candidate observes
  bool layer_compatible = false;
  std::map<int, int> candidate_counts;
};

inline SourceScore score_source(const SourceAdvertisement& target,
                                const SourceAdvertisement& candidate) {
  SourceScore score;
  score.candidate_id = candidate.agent_id;
  for (int cls : candidate.classes) {
    if (target.classes.count(cls))
      ++score.intersection_size;
    else
      ++score.difference_size;
  }
  score.layer_compatible = target.layer_rows == candidate.layer_rows &&
                           target.layer_cols == candidate.layer_cols;
  score.candidate_counts = candidate.class_counts;
  return score;
}

}  // namespace meshlearn
