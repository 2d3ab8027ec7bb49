#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "cvar_mlmc/config.hpp"
#include "cvar_mlmc/errors.hpp"
#include "cvar_mlmc/experiment.hpp"
#include "cvar_mlmc/parallel.hpp"

namespace {

using nlohmann::json;

void report(const json& record, const std::optional<std::filesystem::path>& dir) {
  std::cerr << record.dump() << '\n';
  if (!dir) return;
  std::error_code ec;
  std::filesystem::create_directories(*dir, ec);
  std::ofstream f(*dir / "error.json");
  if (f) f << record.dump(2) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CVaR minimisation with multilevel Monte Carlo parametric expectations"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  unsigned threads = 1;
  for (const char* kind : {"estimate", "reliability", "complexity", "optimize", "reference"}) {
    CLI::App* sub = app.add_subcommand(kind);
    sub->add_option("--config", config_path, "JSON config file")->required();
    sub->add_option("--out", out_dir, "output directory (overrides experiment.out_dir)");
    sub->add_option("--seed", seed, "master seed (overrides seed)");
    sub->add_option("--threads", threads, "worker threads; results do not depend on it")
        ->check(CLI::Range(1u, 1024u));
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }
  const std::string kind = app.get_subcommands().front()->get_name();

  cvar_mlmc::ExperimentConfig cfg;
  try {
    cfg = cvar_mlmc::load_config(config_path);
  } catch (const cvar_mlmc::ConfigError& e) {
    report({{"error", "config"}, {"path", e.path()}, {"message", e.what()}}, std::nullopt);
    return 2;
  }
  cfg.kind = kind;
  if (!out_dir.empty()) cfg.out_dir = out_dir;
  if (seed) cfg.seed = *seed;
  cvar_mlmc::set_thread_count(threads);

  try {
    cvar_mlmc::run_experiment(cfg);
  } catch (const cvar_mlmc::ConfigError& e) {
    report({{"error", "config"}, {"path", e.path()}, {"message", e.what()}}, std::nullopt);
    return 2;
  } catch (const cvar_mlmc::SampleError& e) {
    report({{"error", "sample"},
            {"message", e.what()},
            {"level", e.level()},
            {"master_seed", e.master_seed()},
            {"sample_index", e.sample_index()},
            {"replica_tag", e.replica_tag()}},
           cfg.out_dir);
    return 1;
  } catch (const std::exception& e) {
    report({{"error", "runtime"}, {"message", e.what()}}, cfg.out_dir);
    return 1;
  }
  return 0;
}
