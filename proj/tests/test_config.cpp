// Run configuration: the text dialect, JSON manifests, autodetection, and
// validation rules.

#include <gtest/gtest.h>

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "meshlearn/run_config.hpp"

using namespace meshlearn;

namespace {

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("config_test_" + std::to_string(::getpid()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

// Loads `text` as a config file and returns the error message, or "" if it
// unexpectedly parsed.
std::string load_error(TempDir& tmp, const std::string& text) {
  const std::string path = tmp.file("probe.cfg");
  write_file(path, text);
  try {
    load_config(path);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

void expect_config_eq(const RunConfig& a, const RunConfig& b) {
  EXPECT_EQ(a.method, b.method);
  EXPECT_EQ(a.topology, b.topology);
  EXPECT_EQ(a.schedule, b.schedule);
  EXPECT_EQ(a.objective, b.objective);
  EXPECT_EQ(a.epochs, b.epochs);
  EXPECT_EQ(a.batch_size, b.batch_size);
  EXPECT_DOUBLE_EQ(a.lr_local, b.lr_local);
  EXPECT_DOUBLE_EQ(a.lr_transfer, b.lr_transfer);
  EXPECT_DOUBLE_EQ(a.alpha, b.alpha);
  EXPECT_DOUBLE_EQ(a.momentum, b.momentum);
  EXPECT_EQ(a.hidden_width, b.hidden_width);
  EXPECT_EQ(a.freeze_sources, b.freeze_sources);
  EXPECT_EQ(a.install_feedback, b.install_feedback);
  EXPECT_EQ(a.seeds, b.seeds);
  EXPECT_EQ(a.out_dir, b.out_dir);
  EXPECT_EQ(a.dataset_kind, b.dataset_kind);
  EXPECT_EQ(a.n_classes, b.n_classes);
  EXPECT_EQ(a.samples_per_class, b.samples_per_class);
  EXPECT_EQ(a.dims, b.dims);
  EXPECT_DOUBLE_EQ(a.spread, b.spread);
  EXPECT_EQ(a.fmnist_dir, b.fmnist_dir);
  EXPECT_EQ(a.fmnist_train_per_class, b.fmnist_train_per_class);
  EXPECT_EQ(a.fmnist_test_per_class, b.fmnist_test_per_class);
  EXPECT_DOUBLE_EQ(a.mixin_fraction, b.mixin_fraction);
  EXPECT_EQ(a.class_assignment, b.class_assignment);
  EXPECT_DOUBLE_EQ(a.kd_lambda, b.kd_lambda);
  EXPECT_EQ(a.kd_l1, b.kd_l1);
  EXPECT_EQ(a.fed_local_epochs, b.fed_local_epochs);
  EXPECT_EQ(a.fed_sample_weighted, b.fed_sample_weighted);
  EXPECT_DOUBLE_EQ(a.gossip_mu, b.gossip_mu);
}

// Every field different from its default, and still valid.
RunConfig exotic_config() {
  RunConfig c;
  c.method = "gossip";
  c.topology = "transitive";
  c.schedule = "batch_interleaved";
  c.objective = "kl_only";
  c.epochs = 9;
  c.batch_size = 8;
  c.lr_local = 0.2;
  c.lr_transfer = 0.3;
  c.alpha = 0.4;
  c.momentum = 0.6;
  c.hidden_width = 12;
  c.freeze_sources = true;
  c.install_feedback = true;
  c.seeds = {7, 8, 9};
  c.out_dir = "runs/elsewhere";
  c.dataset_kind = "fmnist";
  c.n_classes = 6;
  c.samples_per_class = 60;
  c.dims = 5;
  c.spread = 0.75;
  c.fmnist_dir = "data/other";
  c.fmnist_train_per_class = 40;
  c.fmnist_test_per_class = 20;
  c.mixin_fraction = 0.2;
  c.class_assignment = {{0, 1, 2}, {3, 4, 5}};
  c.kd_lambda = 2.0;
  c.kd_l1 = true;
  c.fed_local_epochs = 3;
  c.fed_sample_weighted = true;
  c.gossip_mu = 0.25;
  return c;
}

}  // namespace

TEST(Config, DefaultsAreValid) {
  RunConfig c;
  EXPECT_NO_THROW(validate(c));
  EXPECT_EQ(c.n_agents(), 3);
  EXPECT_EQ(c.method, "ours");
  EXPECT_DOUBLE_EQ(c.alpha, 0.88);
  EXPECT_DOUBLE_EQ(c.lr_transfer, 0.05);
  EXPECT_DOUBLE_EQ(c.lr_local, 0.01);
  EXPECT_EQ(c.seeds, (std::vector<int>{1, 2, 3, 4, 5}));
}

TEST(Config, TextDialectCoversEveryKey) {
  TempDir tmp;
  const std::string path = tmp.file("full.cfg");
  write_file(path, R"(# full coverage of the flat dialect
method = "kd"              # trailing comment
topology = "full_mesh"
schedule = "batch_interleaved"
objective = "kl_only"
epochs = 7
batch_size = 16
lr_local = 0.02
lr_transfer = 0.03
alpha = 0.6
momentum = 0.5
hidden_width = 24
freeze_sources = true
install_feedback = true
seeds = [3, 4]
out = "runs/a#b"

[dataset]
kind = "fmnist"
classes = 10
samples_per_class = 600
dims = 20
spread = 0.5
dir = "data/somewhere"
train_per_class = 200
test_per_class = 50

[partition]
mixin_fraction = 0.1
agent0 = [0, 1, 2, 3, 4]
agent1 = [5, 6, 7, 8, 9]

[kd]
lambda = 0.5
l1 = true

[fedavg]
local_epochs = 2
sample_weighted = true

[gossip]
mu = 0.5
)");

  const RunConfig c = load_config(path);
  EXPECT_EQ(c.method, "kd");
  EXPECT_EQ(c.topology, "full_mesh");
  EXPECT_EQ(c.schedule, "batch_interleaved");
  EXPECT_EQ(c.objective, "kl_only");
  EXPECT_EQ(c.epochs, 7);
  EXPECT_EQ(c.batch_size, 16);
  EXPECT_DOUBLE_EQ(c.lr_local, 0.02);
  EXPECT_DOUBLE_EQ(c.lr_transfer, 0.03);
  EXPECT_DOUBLE_EQ(c.alpha, 0.6);
  EXPECT_DOUBLE_EQ(c.momentum, 0.5);
  EXPECT_EQ(c.hidden_width, 24);
  EXPECT_TRUE(c.freeze_sources);
  EXPECT_TRUE(c.install_feedback);
  EXPECT_EQ(c.seeds, (std::vector<int>{3, 4}));
  EXPECT_EQ(c.out_dir, "runs/a#b");  // '#' inside quotes is not a comment
  EXPECT_EQ(c.dataset_kind, "fmnist");
  EXPECT_EQ(c.n_classes, 10);
  EXPECT_EQ(c.samples_per_class, 600);
  EXPECT_EQ(c.dims, 20);
  EXPECT_DOUBLE_EQ(c.spread, 0.5);
  EXPECT_EQ(c.fmnist_dir, "data/somewhere");
  EXPECT_EQ(c.fmnist_train_per_class, 200);
  EXPECT_EQ(c.fmnist_test_per_class, 50);
  EXPECT_DOUBLE_EQ(c.mixin_fraction, 0.1);
  EXPECT_EQ(c.class_assignment,
            (std::vector<std::vector<int>>{{0, 1, 2, 3, 4}, {5, 6, 7, 8, 9}}));
  EXPECT_DOUBLE_EQ(c.kd_lambda, 0.5);
  EXPECT_TRUE(c.kd_l1);
  EXPECT_EQ(c.fed_local_epochs, 2);
  EXPECT_TRUE(c.fed_sample_weighted);
  EXPECT_DOUBLE_EQ(c.gossip_mu, 0.5);
}

TEST(Config, PartitionKeysReplaceTheDefaultSplit) {
  TempDir tmp;
  const std::string path = tmp.file("two_agents.cfg");
  write_file(path, "[partition]\nagent0 = [0, 1, 2, 3, 4]\nagent1 = [5, 6, 7, 8, 9]\n");
  const RunConfig c = load_config(path);
  EXPECT_EQ(c.n_agents(), 2);
}

TEST(Config, ParserReportsPathAndLine) {
  TempDir tmp;
  std::string msg = load_error(tmp, "epochs = 5\nlr_locl = 0.1\n");
  EXPECT_NE(msg.find(":2:"), std::string::npos) << msg;
  EXPECT_NE(msg.find("unknown key 'lr_locl'"), std::string::npos) << msg;

  msg = load_error(tmp, "epochs = 5\nepochs = 6\n");
  EXPECT_NE(msg.find(":2: duplicate key"), std::string::npos) << msg;

  msg = load_error(tmp, "epochs = seven\n");
  EXPECT_NE(msg.find("expected an integer"), std::string::npos) << msg;

  msg = load_error(tmp, "freeze_sources = yes\n");
  EXPECT_NE(msg.find("expected true/false"), std::string::npos) << msg;

  msg = load_error(tmp, "method = ours\n");
  EXPECT_NE(msg.find("expected a quoted string"), std::string::npos) << msg;

  msg = load_error(tmp, "[dataset\nkind = \"synthetic\"\n");
  EXPECT_NE(msg.find(":1: unterminated section"), std::string::npos) << msg;

  msg = load_error(tmp, "epochs =\n");
  EXPECT_NE(msg.find(":1: empty key or value"), std::string::npos) << msg;

  msg = load_error(tmp, "just some words\n");
  EXPECT_NE(msg.find("expected key = value"), std::string::npos) << msg;

  msg = load_error(tmp, "seeds = [1, , 2]\n");
  EXPECT_NE(msg.find("empty array element"), std::string::npos) << msg;

  msg = load_error(tmp, "seeds = 1, 2\n");
  EXPECT_NE(msg.find("expected an array"), std::string::npos) << msg;
}

TEST(Config, JsonRoundTripPreservesEveryField) {
  const RunConfig original = exotic_config();
  const nlohmann::json j = config_to_json(original);
  const RunConfig back = config_from_json(j, "roundtrip");
  expect_config_eq(back, original);
}

TEST(Config, ManifestRoundTripThroughDisk) {
  TempDir tmp;
  const RunConfig original = exotic_config();
  const std::string path = tmp.file("manifest.json");
  write_manifest(original, path);
  const RunConfig back = load_config(path);  // autodetects JSON, unwraps "config"
  expect_config_eq(back, original);
}

TEST(Config, AutodetectionKeysOffTheFirstCharacter) {
  TempDir tmp;
  const std::string text_path = tmp.file("plain.cfg");
  write_file(text_path, "epochs = 3\n");
  EXPECT_EQ(load_config(text_path).epochs, 3);

  const std::string json_path = tmp.file("plain.json");
  write_file(json_path, "\n  {\"epochs\": 4}\n");
  EXPECT_EQ(load_config(json_path).epochs, 4);

  EXPECT_THROW(load_config(tmp.file("nowhere.cfg")), IoError);
}

TEST(Config, JsonRejectsUnknownOrMistypedKeys) {
  EXPECT_THROW(config_from_json(nlohmann::json{{"methd", "ours"}}, "t"), ConfigError);
  EXPECT_THROW(config_from_json(nlohmann::json{{"dataset", {{"knd", "synthetic"}}}}, "t"),
               ConfigError);
  EXPECT_THROW(config_from_json(nlohmann::json{{"kd", {{"mu", 1.0}}}}, "t"), ConfigError);
  EXPECT_THROW(config_from_json(nlohmann::json{{"gossip", {{"rounds", 3}}}}, "t"),
               ConfigError);
  EXPECT_THROW(config_from_json(nlohmann::json{{"partition", {{"agents", 3}}}}, "t"),
               ConfigError);
  // Wrong value type surfaces as a config error, not a raw JSON exception.
  EXPECT_THROW(config_from_json(nlohmann::json{{"epochs", "seven"}}, "t"), ConfigError);

  TempDir tmp;
  const std::string path = tmp.file("broken.json");
  write_file(path, "{not json");
  EXPECT_THROW(load_config(path), ConfigError);
}

TEST(Config, ValidationRules) {
  auto expect_invalid = [](auto&& mutate) {
    RunConfig c;
    mutate(c);
    EXPECT_THROW(validate(c), ConfigError);
  };
  expect_invalid([](RunConfig& c) { c.method = "magic"; });
  expect_invalid([](RunConfig& c) { c.topology = "ring"; });
  expect_invalid([](RunConfig& c) { c.schedule = "sometimes"; });
  expect_invalid([](RunConfig& c) { c.objective = "vibes"; });
  expect_invalid([](RunConfig& c) { c.epochs = 0; });
  expect_invalid([](RunConfig& c) { c.batch_size = 0; });
  expect_invalid([](RunConfig& c) { c.lr_local = -0.1; });
  expect_invalid([](RunConfig& c) { c.alpha = 1.5; });
  expect_invalid([](RunConfig& c) { c.momentum = 1.0; });
  expect_invalid([](RunConfig& c) { c.hidden_width = 0; });
  expect_invalid([](RunConfig& c) { c.seeds.clear(); });
  expect_invalid([](RunConfig& c) { c.dataset_kind = "cifar"; });
  expect_invalid([](RunConfig& c) { c.n_classes = 1; });
  expect_invalid([](RunConfig& c) { c.samples_per_class = 4; });
  expect_invalid([](RunConfig& c) { c.dims = 0; });
  expect_invalid([](RunConfig& c) { c.spread = -1.0; });
  expect_invalid([](RunConfig& c) { c.mixin_fraction = 1.0; });
  expect_invalid([](RunConfig& c) { c.class_assignment.clear(); });
  expect_invalid([](RunConfig& c) { c.class_assignment = {{0, 1}, {1, 2}}; });
  expect_invalid([](RunConfig& c) { c.class_assignment = {{0, 10}}; });
  expect_invalid([](RunConfig& c) { c.kd_lambda = -1.0; });
  expect_invalid([](RunConfig& c) { c.fed_local_epochs = 0; });
  expect_invalid([](RunConfig& c) { c.gossip_mu = 0.0; });
  expect_invalid([](RunConfig& c) { c.gossip_mu = 1.5; });
  expect_invalid([](RunConfig& c) {
    c.method = "gossip";
    c.topology = "none";
  });
  expect_invalid([](RunConfig& c) {
    c.method = "gossip";
    c.topology = "federated_star";
  });

  RunConfig gossip_ok;
  gossip_ok.method = "gossip";
  gossip_ok.topology = "full_mesh";
  EXPECT_NO_THROW(validate(gossip_ok));
}
