#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "meshlearn/errors.hpp"
#include "meshlearn/metrics.hpp"

namespace meshlearn {

struct CompareRow {
  std::string run_dir;
  std::string method;
  std::size_t n_seeds = 0;
  CellStats local_acc, remote_acc, combined_acc;
};

// Final-epoch statistics for the designated local agent (id 0) of one run
// directory, aggregated across its metrics_<seed>.csv files.
inline CompareRow summarize_run_dir(const std::string& dir) {
  std::vector<std::vector<MetricsRecord>> runs;
  std::vector<std::filesystem::path> files;
  if (!std::filesystem::is_directory(dir))
    throw IoError("compare: not a directory: " + dir);
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (name.rfind("metrics_", 0) == 0 && entry.path().extension() == ".csv")
      files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw IoError("compare: no metrics_<seed>.csv files in " + dir);
  for (const auto& f : files) runs.push_back(read_metrics_csv(f.string()));

  CompareRow row;
  row.run_dir = dir;
  row.n_seeds = runs.size();
  int final_epoch = 0;
  for (const MetricsRecord& r : runs.front()) final_epoch = std::max(final_epoch, r.epoch);

  std::vector<double> local, remote, combined;
  for (const auto& run : runs) {
    bool found = false;
    for (const MetricsRecord& r : run) {
      if (r.epoch == final_epoch && r.agent_id == 0) {
        local.push_back(r.local_acc);
        remote.push_back(r.remote_acc);
        combined.push_back(r.combined_acc);
        row.method = r.method;
        found = true;
      }
    }
    if (!found)
      throw FormatError("compare: run in " + dir + " lacks agent 0 at epoch " +
                        std::to_string(final_epoch));
  }
  row.local_acc = detail::cell_stats(local);
  row.remote_acc = detail::cell_stats(remote);
  row.combined_acc = detail::cell_stats(combined);
  return row;
}

// Tab-separated so the output both lines up in a terminal and parses
// mechanically. Accuracies at the final recorded epoch, agent 0.
inline std::string format_compare_table(const std::vector<CompareRow>& rows) {
  std::string out = "method\tseeds\tlocal_acc\tremote_acc\tcombined_acc\trun_dir\n";
  char buf[128];
  for (const CompareRow& r : rows) {
    auto cell = [&buf](const CellStats& s) {
      std::snprintf(buf, sizeof(buf), "%.4f±%.4f", s.mean, s.stddev);
      return std::string(buf);
    };
    out += r.method + "\t" + std::to_string(r.n_seeds) + "\t" + cell(r.local_acc) + "\t" +
           cell(r.remote_acc) + "\t" + cell(r.combined_acc) + "\t" + r.run_dir + "\n";
  }
  return out;
}

}  // namespace meshlearn
