#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "meshlearn/dataset.hpp"
#include "meshlearn/dense_net.hpp"
#include "meshlearn/errors.hpp"

namespace meshlearn {

// Row = true label, column = predicted label.
struct ConfusionMatrix {
  int n_classes = 0;
  std::vector<long long> counts;  // row-major K x K

  explicit ConfusionMatrix(int k = 0)
      : n_classes(k), counts(static_cast<std::size_t>(k) * k, 0) {}

  long long& at(int true_cls, int pred_cls) {
    return counts[static_cast<std::size_t>(true_cls) * n_classes + pred_cls];
  }
  long long at(int true_cls, int pred_cls) const {
    return counts[static_cast<std::size_t>(true_cls) * n_classes + pred_cls];
  }
  long long row_sum(int true_cls) const {
    long long s = 0;
    for (int c = 0; c < n_classes; ++c) s += at(true_cls, c);
    return s;
  }
  long long total() const {
    long long s = 0;
    for (long long v : counts) s += v;
    return s;
  }
  long long diagonal_sum() const {
    long long s = 0;
    for (int c = 0; c < n_classes; ++c) s += at(c, c);
    return s;
  }
};

struct EvalResult {
  double local_acc = 0.0;
  double remote_acc = 0.0;
  double combined_acc = 0.0;
  ConfusionMatrix confusion;
};

// Accuracy split by class ownership, recoverable from counts alone. Classes
// without any test samples contribute an accuracy of 0 over an empty set,
// reported as 0.
inline EvalResult accuracies_from_confusion(const ConfusionMatrix& cm,
                                            const std::set<int>& local_classes) {
  for (int cls : local_classes)
    if (cls < 0 || cls >= cm.n_classes)
      throw ConfigError("accuracies_from_confusion: local class " + std::to_string(cls) +
                        " out of range");
  EvalResult res;
  res.confusion = cm;
  long long local_correct = 0, local_total = 0, remote_correct = 0, remote_total = 0;
  for (int cls = 0; cls < cm.n_classes; ++cls) {
    const long long row = cm.row_sum(cls);
    const long long hit = cm.at(cls, cls);
    if (local_classes.count(cls)) {
      local_correct += hit;
      local_total += row;
    } else {
      remote_correct += hit;
      remote_total += row;
    }
  }
  res.local_acc = local_total > 0 ? static_cast<double>(local_correct) / local_total : 0.0;
  res.remote_acc = remote_total > 0 ? static_cast<double>(remote_correct) / remote_total : 0.0;
  const long long total = local_total + remote_total;
  res.combined_acc =
      total > 0 ? static_cast<double>(local_correct + remote_correct) / total : 0.0;
  return res;
}

inline int argmax_row(const Matrix& logits, std::size_t row) {
  const double* p = logits.row_ptr(row);
  int best = 0;
  for (std::size_t c = 1; c < logits.cols(); ++c)
    if (p[c] > p[best]) best = static_cast<int>(c);  // ties keep the lowest index
  return best;
}

inline EvalResult evaluate(const DenseNet& net, const Dataset& test,
                           const std::set<int>& local_classes) {
  if (test.size() == 0) throw InputError("evaluate: empty test set");
  const Matrix logits = forward(net, test.features);
  if (logits.cols() != static_cast<std::size_t>(test.n_classes))
    throw ConfigError("evaluate: model emits " + std::to_string(logits.cols()) +
                      " logits for " + std::to_string(test.n_classes) + " classes");
  ConfusionMatrix cm(test.n_classes);
  for (std::size_t i = 0; i < test.size(); ++i)
    ++cm.at(test.labels[i], argmax_row(logits, i));
  return accuracies_from_confusion(cm, local_classes);
}

constexpr const char* kMetricsCsvHeader =
    "epoch,agent,method,local_acc,remote_acc,combined_acc,loss1,loss2,messages,seconds";

struct MetricsRecord {
  int epoch = 0;
  int agent_id = 0;
  std::string method;
  double local_acc = 0.0;
  double remote_acc = 0.0;
  double combined_acc = 0.0;
  double loss1 = 0.0;
  double loss2 = 0.0;
  long long messages_total = 0;
  double wall_clock_seconds = 0.0;
};

namespace detail {

inline std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  fields.push_back(cur);
  return fields;
}

}  // namespace detail

inline void write_metrics_csv(const std::vector<MetricsRecord>& records,
                              const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("write_metrics_csv: cannot open " + path);
  out << kMetricsCsvHeader << '\n';
  for (const MetricsRecord& r : records) {
    out << r.epoch << ',' << r.agent_id << ',' << r.method << ','
        << detail::format_real(r.local_acc) << ',' << detail::format_real(r.remote_acc)
        << ',' << detail::format_real(r.combined_acc) << ','
        << detail::format_real(r.loss1) << ',' << detail::format_real(r.loss2) << ','
        << r.messages_total << ',' << detail::format_real(r.wall_clock_seconds) << '\n';
  }
  if (!out) throw IoError("write_metrics_csv: write failed for " + path);
}

inline std::vector<MetricsRecord> read_metrics_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("read_metrics_csv: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw FormatError("read_metrics_csv: empty file " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kMetricsCsvHeader)
    throw FormatError("read_metrics_csv: unexpected header in " + path + ": " + line);
  std::vector<MetricsRecord> records;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = detail::split_csv_line(line);
    if (fields.size() != 10)
      throw FormatError("read_metrics_csv: " + path + ":" + std::to_string(line_no) +
                        ": expected 10 fields, got " + std::to_string(fields.size()));
    try {
      MetricsRecord r;
      r.epoch = std::stoi(fields[0]);
      r.agent_id = std::stoi(fields[1]);
      r.method = fields[2];
      r.local_acc = std::stod(fields[3]);
      r.remote_acc = std::stod(fields[4]);
      r.combined_acc = std::stod(fields[5]);
      r.loss1 = std::stod(fields[6]);
      r.loss2 = std::stod(fields[7]);
      r.messages_total = std::stoll(fields[8]);
      r.wall_clock_seconds = std::stod(fields[9]);
      records.push_back(std::move(r));
    } catch (const std::exception&) {
      throw FormatError("read_metrics_csv: " + path + ":" + std::to_string(line_no) +
                        ": unparsable numeric field");
    }
  }
  return records;
}

// K integer rows under a one-line class-name header.
inline void write_confusion_csv(const ConfusionMatrix& cm,
                                const std::vector<std::string>& class_names,
                                const std::string& path) {
  if (class_names.size() != static_cast<std::size_t>(cm.n_classes))
    throw InputError("write_confusion_csv: " + std::to_string(class_names.size()) +
                     " names for " + std::to_string(cm.n_classes) + " classes");
  std::ofstream out(path);
  if (!out) throw IoError("write_confusion_csv: cannot open " + path);
  for (std::size_t c = 0; c < class_names.size(); ++c)
    out << (c ? "," : "") << class_names[c];
  out << '\n';
  for (int r = 0; r < cm.n_classes; ++r) {
    for (int c = 0; c < cm.n_classes; ++c) out << (c ? "," : "") << cm.at(r, c);
    out << '\n';
  }
  if (!out) throw IoError("write_confusion_csv: write failed for " + path);
}

struct CellStats {
  double mean = 0.0;
  double stddev = 0.0;  // population form; a single run reports 0
};

struct SummaryRow {
  int epoch = 0;
  int agent_id = 0;
  std::string method;
  CellStats local_acc, remote_acc, combined_acc, loss1, loss2;
  std::size_t n_runs = 0;
};

namespace detail {

inline CellStats cell_stats(const std::vector<double>& xs) {
  CellStats s;
  if (xs.empty()) return s;
  for (double x : xs) s.mean += x;
  s.mean /= static_cast<double>(xs.size());
  double var = 0.0;
  for (double x : xs) var += (x - s.mean) * (x - s.mean);
  s.stddev = std::sqrt(var / static_cast<double>(xs.size()));
  return s;
}

}  // namespace detail

// Per-(epoch, agent) mean and spread across seed runs. All runs must cover
// the same (epoch, agent, method) cells.
inline std::vector<SummaryRow> summarize_runs(
    const std::vector<std::vector<MetricsRecord>>& runs) {
  if (runs.empty()) throw InputError("summarize_runs: no runs");
  using Key = std::tuple<int, int, std::string>;
  std::map<Key, std::vector<const MetricsRecord*>> cells;
  for (const auto& run : runs) {
    if (run.size() != runs.front().size())
      throw InputError("summarize_runs: runs have different record counts");
    for (const MetricsRecord& r : run)
      cells[{r.epoch, r.agent_id, r.method}].push_back(&r);
  }
  std::vector<SummaryRow> rows;
  for (const auto& [key, recs] : cells) {
    if (recs.size() != runs.size())
      throw InputError("summarize_runs: cell coverage differs across runs");
    SummaryRow row;
    std::tie(row.epoch, row.agent_id, row.method) = key;
    row.n_runs = recs.size();
    auto collect = [&recs](double MetricsRecord::*member) {
      std::vector<double> xs;
      xs.reserve(recs.size());
      for (const MetricsRecord* r : recs) xs.push_back(r->*member);
      return detail::cell_stats(xs);
    };
    row.local_acc = collect(&MetricsRecord::local_acc);
    row.remote_acc = collect(&MetricsRecord::remote_acc);
    row.combined_acc = collect(&MetricsRecord::combined_acc);
    row.loss1 = collect(&MetricsRecord::loss1);
    row.loss2 = collect(&MetricsRecord::loss2);
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace meshlearn
