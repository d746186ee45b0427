#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "meshlearn/errors.hpp"

namespace meshlearn {

// Fully-resolved experiment description. Serializes to the run manifest;
// the manifest parses back into an identical config.
struct RunConfig {
  // method and protocol
  std::string method = "ours";    // ours | kd | fedavg | gossip | none
  std::string topology = "none";  // none | half_mesh | full_mesh | transitive | federated_star
  std::string schedule = "epoch_interleaved";  // or batch_interleaved
  std::string objective = "combined";          // or kl_only
  int epochs = 25;
  int batch_size = 32;
  double lr_local = 0.01;
  double lr_transfer = 0.05;
  double alpha = 0.88;  // beta is 1 - alpha
  double momentum = 0.0;
  int hidden_width = 32;
  bool freeze_sources = false;
  bool install_feedback = false;  // literal install recurrence (diverges on long runs)
  std::vector<int> seeds = {1, 2, 3, 4, 5};
  std::string out_dir = "runs/out";

  // dataset
  std::string dataset_kind = "synthetic";  // synthetic | fmnist
  int n_classes = 10;
  int samples_per_class = 1250;
  int dims = 16;
  double spread = 0.25;
  std::string fmnist_dir = "data/fmnist";
  int fmnist_train_per_class = 500;
  int fmnist_test_per_class = 100;

  // partitioning
  double mixin_fraction = 0.05;
  std::vector<std::vector<int>> class_assignment = {{0, 1, 2, 3}, {4, 5, 6}, {7, 8, 9}};

  // baselines
  double kd_lambda = 1.0;
  bool kd_l1 = false;
  int fed_local_epochs = 1;
  bool fed_sample_weighted = false;
  double gossip_mu = 1.0;

  int n_agents() const { return static_cast<int>(class_assignment.size()); }
};

inline void validate(const RunConfig& c) {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError("config: " + what);
  };
  const std::set<std::string> methods = {"ours", "kd", "fedavg", "gossip", "none"};
  const std::set<std::string> topologies = {"none", "half_mesh", "full_mesh", "transitive",
                                            "federated_star"};
  require(methods.count(c.method), "unknown method '" + c.method + "'");
  require(topologies.count(c.topology), "unknown topology '" + c.topology + "'");
  require(c.schedule == "epoch_interleaved" || c.schedule == "batch_interleaved",
          "unknown schedule '" + c.schedule + "'");
  require(c.objective == "combined" || c.objective == "kl_only",
          "unknown objective '" + c.objective + "'");
  require(c.epochs >= 1, "epochs must be >= 1");
  require(c.batch_size >= 1, "batch_size must be >= 1");
  require(c.lr_local >= 0.0 && c.lr_transfer >= 0.0, "learning rates must be >= 0");
  require(c.alpha >= 0.0 && c.alpha <= 1.0, "alpha must lie in [0, 1]");
  require(c.momentum >= 0.0 && c.momentum < 1.0, "momentum must lie in [0, 1)");
  require(c.hidden_width >= 1, "hidden_width must be >= 1");
  require(!c.seeds.empty(), "seeds must be non-empty");
  require(c.dataset_kind == "synthetic" || c.dataset_kind == "fmnist",
          "unknown dataset '" + c.dataset_kind + "'");
  require(c.n_classes >= 2, "dataset classes must be >= 2");
  require(c.samples_per_class >= 5, "samples_per_class must be >= 5");
  require(c.dims >= 1, "dims must be >= 1");
  require(c.spread >= 0.0, "spread must be >= 0");
  require(c.mixin_fraction >= 0.0 && c.mixin_fraction < 1.0,
          "mixin_fraction must lie in [0, 1)");
  require(!c.class_assignment.empty(), "at least one agent required");
  std::set<int> seen;
  for (const auto& classes : c.class_assignment)
    for (int cls : classes) {
      require(cls >= 0 && cls < c.n_classes,
              "class " + std::to_string(cls) + " out of range");
      require(seen.insert(cls).second,
              "class " + std::to_string(cls) + " assigned twice");
    }
  require(c.kd_lambda >= 0.0, "kd lambda must be >= 0");
  require(c.fed_local_epochs >= 1, "fedavg local_epochs must be >= 1");
  require(c.gossip_mu > 0.0 && c.gossip_mu <= 1.0, "gossip mu must lie in (0, 1]");
  if (c.method == "gossip")
    require(c.topology != "none" && c.topology != "federated_star",
            "gossip needs a topology with edges");
}

namespace detail {

struct ConfigValue {
  std::string raw;
  int line = 0;
  bool used = false;
};

using FlatConfig = std::map<std::string, ConfigValue>;

inline std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

// Strips a trailing comment that is not inside a quoted string.
inline std::string strip_comment(const std::string& s) {
  bool quoted = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"') quoted = !quoted;
    if (s[i] == '#' && !quoted) return s.substr(0, i);
  }
  return s;
}

// Minimal TOML-like reader: [section] headers, key = value lines, values of
// kind string/number/bool/flat array. Reports the offending line on error.
inline FlatConfig parse_flat_config(std::istream& in, const std::string& path) {
  FlatConfig flat;
  std::string section, line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(strip_comment(line));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError(path + ":" + std::to_string(line_no) + ": unterminated section");
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty())
        throw ConfigError(path + ":" + std::to_string(line_no) + ": empty section name");
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path + ":" + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty())
      throw ConfigError(path + ":" + std::to_string(line_no) + ": empty key or value");
    const std::string full_key = section.empty() ? key : section + "." + key;
    if (flat.count(full_key))
      throw ConfigError(path + ":" + std::to_string(line_no) + ": duplicate key '" +
                        full_key + "'");
    flat[full_key] = {value, line_no, false};
  }
  return flat;
}

struct FlatReader {
  FlatConfig& flat;
  const std::string& path;

  ConfigValue* find(const std::string& key) {
    auto it = flat.find(key);
    if (it == flat.end()) return nullptr;
    it->second.used = true;
    return &it->second;
  }

  [[noreturn]] void fail(const ConfigValue& v, const std::string& msg) {
    throw ConfigError(path + ":" + std::to_string(v.line) + ": " + msg);
  }

  void read(const std::string& key, std::string& out) {
    if (ConfigValue* v = find(key)) {
      if (v->raw.size() < 2 || v->raw.front() != '"' || v->raw.back() != '"')
        fail(*v, "expected a quoted string for '" + key + "'");
      out = v->raw.substr(1, v->raw.size() - 2);
    }
  }
  void read(const std::string& key, bool& out) {
    if (ConfigValue* v = find(key)) {
      if (v->raw == "true")
        out = true;
      else if (v->raw == "false")
        out = false;
      else
        fail(*v, "expected true/false for '" + key + "'");
    }
  }
  void read(const std::string& key, int& out) {
    if (ConfigValue* v = find(key)) {
      try {
        std::size_t used = 0;
        out = std::stoi(v->raw, &used);
        if (used != v->raw.size()) throw std::invalid_argument("");
      } catch (const std::exception&) {
        fail(*v, "expected an integer for '" + key + "'");
      }
    }
  }
  void read(const std::string& key, double& out) {
    if (ConfigValue* v = find(key)) {
      try {
        std::size_t used = 0;
        out = std::stod(v->raw, &used);
        if (used != v->raw.size()) throw std::invalid_argument("");
      } catch (const std::exception&) {
        fail(*v, "expected a number for '" + key + "'");
      }
    }
  }
  void read(const std::string& key, std::vector<int>& out) {
    if (ConfigValue* v = find(key)) {
      if (v->raw.size() < 2 || v->raw.front() != '[' || v->raw.back() != ']')
        fail(*v, "expected an array like [1, 2, 3] for '" + key + "'");
      out.clear();
      std::stringstream ss(v->raw.substr(1, v->raw.size() - 2));
      std::string item;
      while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) fail(*v, "empty array element in '" + key + "'");
        try {
          std::size_t used = 0;
          out.push_back(std::stoi(item, &used));
          if (used != item.size()) throw std::invalid_argument("");
        } catch (const std::exception&) {
          fail(*v, "expected integer array elements in '" + key + "'");
        }
      }
    }
  }
};

inline RunConfig config_from_flat(FlatConfig& flat, const std::string& path) {
  RunConfig c;
  FlatReader r{flat, path};
  r.read("method", c.method);
  r.read("topology", c.topology);
  r.read("schedule", c.schedule);
  r.read("objective", c.objective);
  r.read("epochs", c.epochs);
  r.read("batch_size", c.batch_size);
  r.read("lr_local", c.lr_local);
  r.read("lr_transfer", c.lr_transfer);
  r.read("alpha", c.alpha);
  r.read("momentum", c.momentum);
  r.read("hidden_width", c.hidden_width);
  r.read("freeze_sources", c.freeze_sources);
  r.read("install_feedback", c.install_feedback);
  r.read("seeds", c.seeds);
  r.read("out", c.out_dir);
  r.read("dataset.kind", c.dataset_kind);
  r.read("dataset.classes", c.n_classes);
  r.read("dataset.samples_per_class", c.samples_per_class);
  r.read("dataset.dims", c.dims);
  r.read("dataset.spread", c.spread);
  r.read("dataset.dir", c.fmnist_dir);
  r.read("dataset.train_per_class", c.fmnist_train_per_class);
  r.read("dataset.test_per_class", c.fmnist_test_per_class);
  r.read("partition.mixin_fraction", c.mixin_fraction);
  // Agent class lists: partition.agent0, partition.agent1, ... contiguous
  // from zero; providing any replaces the default three-agent split.
  {
    bool any = false;
    for (int i = 0;; ++i) {
      const std::string key = "partition.agent" + std::to_string(i);
      if (!flat.count(key)) break;
      if (!any) {
        c.class_assignment.clear();
        any = true;
      }
      std::vector<int> classes;
      r.read(key, classes);
      c.class_assignment.push_back(std::move(classes));
    }
  }
  r.read("kd.lambda", c.kd_lambda);
  r.read("kd.l1", c.kd_l1);
  r.read("fedavg.local_epochs", c.fed_local_epochs);
  r.read("fedavg.sample_weighted", c.fed_sample_weighted);
  r.read("gossip.mu", c.gossip_mu);

  for (const auto& [key, value] : flat)
    if (!value.used)
      throw ConfigError(path + ":" + std::to_string(value.line) + ": unknown key '" + key +
                        "'");
  return c;
}

}  // namespace detail

inline nlohmann::json config_to_json(const RunConfig& c) {
  nlohmann::json j;
  j["method"] = c.method;
  j["topology"] = c.topology;
  j["schedule"] = c.schedule;
  j["objective"] = c.objective;
  j["epochs"] = c.epochs;
  j["batch_size"] = c.batch_size;
  j["lr_local"] = c.lr_local;
  j["lr_transfer"] = c.lr_transfer;
  j["alpha"] = c.alpha;
  j["momentum"] = c.momentum;
  j["hidden_width"] = c.hidden_width;
  j["freeze_sources"] = c.freeze_sources;
  j["install_feedback"] = c.install_feedback;
  j["seeds"] = c.seeds;
  j["out"] = c.out_dir;
  j["dataset"] = {{"kind", c.dataset_kind},
                  {"classes", c.n_classes},
                  {"samples_per_class", c.samples_per_class},
                  {"dims", c.dims},
                  {"spread", c.spread},
                  {"dir", c.fmnist_dir},
                  {"train_per_class", c.fmnist_train_per_class},
                  {"test_per_class", c.fmnist_test_per_class}};
  j["partition"] = {{"mixin_fraction", c.mixin_fraction}};
  for (std::size_t i = 0; i < c.class_assignment.size(); ++i)
    j["partition"]["agent" + std::to_string(i)] = c.class_assignment[i];
  j["kd"] = {{"lambda", c.kd_lambda}, {"l1", c.kd_l1}};
  j["fedavg"] = {{"local_epochs", c.fed_local_epochs},
                 {"sample_weighted", c.fed_sample_weighted}};
  j["gossip"] = {{"mu", c.gossip_mu}};
  return j;
}

inline RunConfig config_from_json(const nlohmann::json& j, const std::string& path) {
  RunConfig c;
  std::set<std::string> known = {"method",        "topology",  "schedule", "objective",
                                 "epochs",        "batch_size", "lr_local", "lr_transfer",
                                 "alpha",         "momentum",  "hidden_width",
                                 "freeze_sources", "install_feedback", "seeds", "out", "dataset",
                                 "partition",     "kd",        "fedavg",   "gossip"};
  try {
    for (const auto& [key, _] : j.items())
      if (!known.count(key))
        throw ConfigError(path + ": unknown key '" + key + "'");
    auto get = [&j](const char* key, auto& out) {
      if (j.contains(key)) j.at(key).get_to(out);
    };
    get("method", c.method);
    get("topology", c.topology);
    get("schedule", c.schedule);
    get("objective", c.objective);
    get("epochs", c.epochs);
    get("batch_size", c.batch_size);
    get("lr_local", c.lr_local);
    get("lr_transfer", c.lr_transfer);
    get("alpha", c.alpha);
    get("momentum", c.momentum);
    get("hidden_width", c.hidden_width);
    get("freeze_sources", c.freeze_sources);
    get("install_feedback", c.install_feedback);
    get("seeds", c.seeds);
    get("out", c.out_dir);
    if (j.contains("dataset")) {
      const auto& d = j.at("dataset");
      std::set<std::string> dk = {"kind", "classes", "samples_per_class", "dims",
                                  "spread", "dir", "train_per_class", "test_per_class"};
      for (const auto& [key, _] : d.items())
        if (!dk.count(key)) throw ConfigError(path + ": unknown key 'dataset." + key + "'");
      if (d.contains("kind")) d.at("kind").get_to(c.dataset_kind);
      if (d.contains("classes")) d.at("classes").get_to(c.n_classes);
      if (d.contains("samples_per_class")) d.at("samples_per_class").get_to(c.samples_per_class);
      if (d.contains("dims")) d.at("dims").get_to(c.dims);
      if (d.contains("spread")) d.at("spread").get_to(c.spread);
      if (d.contains("dir")) d.at("dir").get_to(c.fmnist_dir);
      if (d.contains("train_per_class")) d.at("train_per_class").get_to(c.fmnist_train_per_class);
      if (d.contains("test_per_class")) d.at("test_per_class").get_to(c.fmnist_test_per_class);
    }
    if (j.contains("partition")) {
      const auto& p = j.at("partition");
      std::set<std::string> consumed = {"mixin_fraction"};
      if (p.contains("mixin_fraction")) p.at("mixin_fraction").get_to(c.mixin_fraction);
      bool any = false;
      for (int i = 0;; ++i) {
        const std::string key = "agent" + std::to_string(i);
        if (!p.contains(key)) break;
        if (!any) {
          c.class_assignment.clear();
          any = true;
        }
        std::vector<int> classes;
        p.at(key).get_to(classes);
        c.class_assignment.push_back(std::move(classes));
        consumed.insert(key);
      }
      // Only contiguously numbered agent keys are ever read, so anything the
      // loop above did not consume would otherwise be ignored silently.
      for (const auto& [key, _] : p.items())
        if (!consumed.count(key))
          throw ConfigError(path + ": unknown key 'partition." + key + "'");
    }
    if (j.contains("kd")) {
      const auto& k = j.at("kd");
      for (const auto& [key, _] : k.items())
        if (key != "lambda" && key != "l1")
          throw ConfigError(path + ": unknown key 'kd." + key + "'");
      if (k.contains("lambda")) k.at("lambda").get_to(c.kd_lambda);
      if (k.contains("l1")) k.at("l1").get_to(c.kd_l1);
    }
    if (j.contains("fedavg")) {
      const auto& f = j.at("fedavg");
      for (const auto& [key, _] : f.items())
        if (key != "local_epochs" && key != "sample_weighted")
          throw ConfigError(path + ": unknown key 'fedavg." + key + "'");
      if (f.contains("local_epochs")) f.at("local_epochs").get_to(c.fed_local_epochs);
      if (f.contains("sample_weighted")) f.at("sample_weighted").get_to(c.fed_sample_weighted);
    }
    if (j.contains("gossip")) {
      const auto& g = j.at("gossip");
      for (const auto& [key, _] : g.items())
        if (key != "mu") throw ConfigError(path + ": unknown key 'gossip." + key + "'");
      if (g.contains("mu")) g.at("mu").get_to(c.gossip_mu);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return c;
}

// Accepts either the text config dialect or a previously written JSON
// manifest, keyed off the first meaningful character.
inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("config: cannot open " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string text = buffer.str();
  const std::size_t first = text.find_first_not_of(" \t\r\n");
  RunConfig c;
  if (first != std::string::npos && text[first] == '{') {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(path + ": " + e.what());
    }
    if (j.contains("config")) j = j.at("config");  // accept a full manifest
    c = config_from_json(j, path);
  } else {
    std::istringstream is(text);
    auto flat = detail::parse_flat_config(is, path);
    c = detail::config_from_flat(flat, path);
  }
  validate(c);
  return c;
}

inline void write_manifest(const RunConfig& c, const std::string& path) {
  nlohmann::json manifest;
  manifest["config"] = config_to_json(c);
  std::ofstream out(path);
  if (!out) throw IoError("manifest: cannot open " + path);
  out << manifest.dump(2) << '\n';
  if (!out) throw IoError("manifest: write failed for " + path);
}

}  // namespace meshlearn
