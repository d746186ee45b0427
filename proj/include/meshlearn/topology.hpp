#pragma once

#include <algorithm>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "meshlearn/errors.hpp"

namespace meshlearn {

// Directed communication graph. An edge (source, target) means `target` may
// pull weights from `source` during a transfer epoch.
struct MeshTopology {
  std::string name;
  std::vector<std::pair<int, int>> edges;  // (source, target)
  bool federated_star = false;  // central-averaging layout, used by baselines

  std::vector<int> sources_of(int target) const {
    std::vector<int> out;
    for (const auto& [s, t] : edges)
      if (t == target) out.push_back(s);
    std::sort(out.begin(), out.end());
    return out;
  }

  bool has_edge(int source, int target) const {
    return std::find(edges.begin(), edges.end(), std::make_pair(source, target)) !=
           edges.end();
  }
};

// Presets over a fixed agent list; agent_ids.front() is the local agent whose
// metrics the experiments report.
inline MeshTopology build_preset(const std::string& name, const std::vector<int>& agent_ids) {
  std::set<int> unique(agent_ids.begin(), agent_ids.end());
  if (unique.size() != agent_ids.size())
    throw ConfigError("build_preset: duplicate agent ids");

  MeshTopology topo;
  topo.name = name;
  if (name == "none") {
    return topo;
  }
  if (name == "federated_star") {
    topo.federated_star = true;
    return topo;
  }
  if (agent_ids.size() < 2)
    throw ConfigError("build_preset: topology '" + name + "' needs at least 2 agents");

  if (name == "half_mesh") {
    // Every remote agent feeds the local one; nothing flows back.
    for (std::size_t i = 1; i < agent_ids.size(); ++i)
      topo.edges.emplace_back(agent_ids[i], agent_ids.front());
    return topo;
  }
  if (name == "full_mesh") {
    for (int s : agent_ids)
      for (int t : agent_ids)
        if (s != t) topo.edges.emplace_back(s, t);
    return topo;
  }
  if (name == "transitive") {
    // Remote agents chain in listed order and only the last one feeds the
    // local agent: ids[1] -> ids[2] -> ... -> ids[n-1] -> ids[0].
    for (std::size_t i = 1; i + 1 < agent_ids.size(); ++i)
      topo.edges.emplace_back(agent_ids[i], agent_ids[i + 1]);
    topo.edges.emplace_back(agent_ids.back(), agent_ids.front());
    return topo;
  }
  throw ConfigError("build_preset: unknown topology '" + name + "'");
}

}  // namespace meshlearn
