// Command-line experiment runner: executes one configured run (or a seed
// sweep) and writes CSV/JSON artifacts, or compares finished run
// directories.

#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "meshlearn/meshlearn.hpp"

namespace {

int do_run(const std::string& config_path, int seed_override,
           const std::string& out_override, const std::string& method_override,
           const std::string& topology_override) {
  meshlearn::RunConfig config;
  try {
    config = meshlearn::load_config(config_path);
    if (seed_override >= 0) config.seeds = {seed_override};
    if (!out_override.empty()) config.out_dir = out_override;
    if (!method_override.empty()) config.method = method_override;
    if (!topology_override.empty()) config.topology = topology_override;
    meshlearn::validate(config);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }

  try {
    const auto results = meshlearn::run_all_seeds(config);
    for (std::size_t i = 0; i < results.size(); ++i) {
      const auto& r = results[i];
      const meshlearn::MetricsRecord* last = nullptr;
      for (const auto& rec : r.records)
        if (rec.agent_id == 0) last = &rec;
      std::printf("seed %d: %.2fs", config.seeds[i], r.wall_seconds);
      if (last)
        std::printf("  agent0 local=%.4f remote=%.4f combined=%.4f messages=%lld",
                    last->local_acc, last->remote_acc, last->combined_acc,
                    static_cast<long long>(last->messages_total));
      std::printf("\n");
    }
    std::printf("artifacts written to %s\n", config.out_dir.c_str());
    return 0;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}

int do_compare(const std::vector<std::string>& dirs) {
  try {
    std::vector<meshlearn::CompareRow> rows;
    for (const std::string& dir : dirs) rows.push_back(meshlearn::summarize_run_dir(dir));
    std::fputs(meshlearn::format_compare_table(rows).c_str(), stdout);
    return 0;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-agent knowledge-transfer experiment runner"};
  app.require_subcommand(1);

  std::string config_path, out_override, method_override, topology_override;
  int seed_override = -1;
  CLI::App* run = app.add_subcommand("run", "Execute a configured experiment");
  run->add_option("--config", config_path, "Config file (text dialect or manifest JSON)")
      ->required();
  run->add_option("--seed", seed_override, "Run a single seed instead of the configured sweep");
  run->add_option("--out", out_override, "Override the output directory");
  run->add_option("--method", method_override, "Override the method");
  run->add_option("--topology", topology_override, "Override the topology preset");

  std::vector<std::string> compare_dirs;
  CLI::App* compare = app.add_subcommand("compare", "Tabulate finished run directories");
  compare->add_option("dirs", compare_dirs, "Run directories")->expected(-1)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;  // bad usage is a config error
  }

  if (run->parsed())
    return do_run(config_path, seed_override, out_override, method_override,
                  topology_override);
  return do_compare(compare_dirs);
}
