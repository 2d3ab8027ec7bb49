#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include <json.hpp>

#include "doctest.h"

#include "cvar_mlmc/config.hpp"
#include "cvar_mlmc/errors.hpp"

using namespace cvar_mlmc;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string path_of_error(const json& doc) {
  try {
    parse_config(doc);
  } catch (const ConfigError& e) {
    return e.path();
  }
  return "<no error>";
}

json lg_doc() {
  return json::parse(R"({
    "seed": 3,
    "model": "linear_gaussian",
    "linear_gaussian": {"sigma": 0.1},
    "statistic": {"tau": 0.7},
    "optimiser": {"z0": [0.0]},
    "experiment": {"kind": "estimate", "tolerances": [0.05]}
  })");
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("cvar_mlmc_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

fs::path write_config(const fs::path& dir, const json& doc) {
  const fs::path p = dir / "config.json";
  std::ofstream(p) << doc.dump(2);
  return p;
}

int run_cli(const std::string& args, const fs::path& err_file) {
  const std::string cmd = std::string(CVAR_MLMC_CLI) + " " + args + " > /dev/null 2> " + err_file.string();
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream s;
  s << f.rdbuf();
  return s.str();
}

}  // namespace

TEST_SUITE("config") {

TEST_CASE("defaults and overrides") {
  const auto cfg = parse_config(lg_doc());
  CHECK(cfg.seed == 3);
  CHECK(cfg.model.kind == "linear_gaussian");
  CHECK(cfg.tau == 0.7);
  CHECK(cfg.mlmc.tau == 0.7);
  CHECK(cfg.tolerances == std::vector<double>{0.05});
  CHECK(cfg.mlmc.screen.samples == std::vector<std::int64_t>{64, 32, 16});
  CHECK(cfg.mlmc.errors.bootstrap_replicas == 50);
  CHECK(make_model(cfg.model)->name() == "linear_gaussian");
}

TEST_CASE("every shipped config parses") {
  for (const auto& e : fs::directory_iterator(CVAR_MLMC_CONFIGS)) {
    CAPTURE(e.path().string());
    const auto cfg = load_config(e.path());
    CHECK(make_model(cfg.model)->dimension() == cfg.z0.size());
  }
}

TEST_CASE("schema violations name the offending path") {
  auto doc = lg_doc();
  doc["experiment"]["colour"] = "blue";
  CHECK(path_of_error(doc) == "experiment.colour");

  doc = lg_doc();
  doc["mlmc"] = {{"screen", {{"L", 2}, {"N", {64, 32, 1}}}}};
  CHECK(path_of_error(doc) == "mlmc.screen.N[2]");

  doc = lg_doc();
  doc["statistic"]["tau"] = "high";
  CHECK(path_of_error(doc) == "statistic.tau");

  doc = lg_doc();
  doc["mlmc"] = {{"n_init", 20}};
  CHECK(path_of_error(doc) == "mlmc.n_init");

  doc = lg_doc();
  doc["surprise"] = 1;
  CHECK(path_of_error(doc) == "surprise");

  CHECK_THROWS_AS(load_config("/nonexistent/config.json"), ConfigError);
}

}

TEST_SUITE("cli") {

TEST_CASE("estimate writes its artifacts and matches the closed form") {
  const auto dir = scratch("estimate");
  const auto cfg = write_config(dir, lg_doc());
  REQUIRE(run_cli("estimate --config " + cfg.string() + " --out " + (dir / "out").string(), dir / "err.txt") == 0);
  const json errors = json::parse(slurp(dir / "out" / "errors.json"));
  const double rmse = errors["errors"]["rmse"];
  CHECK(rmse <= 0.05);

  std::ifstream csv(dir / "out" / "estimates.csv");
  std::string line;
  std::getline(csv, line);
  CHECK(line == "theta,phi,phi_prime,psi_prime_1");
  double best = 1e300;
  while (std::getline(csv, line)) {
    std::stringstream ss(line);
    std::string theta, phi;
    std::getline(ss, theta, ',');
    std::getline(ss, phi, ',');
    best = std::min(best, std::stod(phi));
  }
  const double exact = 0.1 * 1.1590;  // z = 0, σ = 0.1
  CHECK(std::abs(best - exact) <= rmse);
  CHECK(fs::exists(dir / "out" / "hierarchy_log.json"));
}

TEST_CASE("config errors exit with 2 and name the path") {
  const auto dir = scratch("bad_config");
  auto doc = lg_doc();
  doc["mlmc"] = {{"bogus", 1}};
  const auto cfg = write_config(dir, doc);
  CHECK(run_cli("estimate --config " + cfg.string(), dir / "err.txt") == 2);
  const json rec = json::parse(slurp(dir / "err.txt"));
  CHECK(rec["error"] == "config");
  CHECK(rec["path"] == "mlmc.bogus");
  CHECK(run_cli("estimate", dir / "err2.txt") == 2);
  CHECK(run_cli("frobnicate --config " + cfg.string(), dir / "err3.txt") == 2);
}

TEST_CASE("runtime failures exit with 1 and leave a JSON record") {
  const auto dir = scratch("runtime");
  auto doc = lg_doc();
  doc["model"] = "fhn";
  doc.erase("linear_gaussian");
  doc["optimiser"]["z0"] = {0.7, 0.8, 0.08, 1.0};
  doc["experiment"]["tolerances"] = {1e-4};
  doc["mlmc"] = {{"max_rounds", 1}};
  const auto cfg = write_config(dir, doc);
  CHECK(run_cli("estimate --config " + cfg.string() + " --out " + (dir / "out").string(), dir / "err.txt") == 1);
  const json rec = json::parse(slurp(dir / "out" / "error.json"));
  CHECK(rec["error"] == "runtime");
}

TEST_CASE("reliability writes one row per run") {
  const auto dir = scratch("reliability");
  auto doc = lg_doc();
  doc["experiment"]["kind"] = "reliability";
  doc["experiment"]["repeats"] = 20;
  doc["experiment"]["reference"] = {{"samples", 20000}, {"level", 0}};
  const auto cfg = write_config(dir, doc);
  REQUIRE(run_cli("reliability --config " + cfg.string() + " --out " + (dir / "out").string(), dir / "err.txt") == 0);
  std::ifstream csv(dir / "out" / "reliability.csv");
  std::string line;
  int rows = -1;
  while (std::getline(csv, line)) ++rows;
  CHECK(rows == 20);
}

TEST_CASE("thread count leaves outputs byte-identical") {
  const auto dir = scratch("threads");
  auto doc = lg_doc();
  doc["model"] = "fhn";
  doc.erase("linear_gaussian");
  doc["optimiser"]["z0"] = {0.7, 0.8, 0.08, 1.0};
  doc["experiment"]["tolerances"] = {2.0};
  const auto cfg = write_config(dir, doc);
  for (const char* t : {"1", "8"})
    REQUIRE(run_cli("estimate --config " + cfg.string() + " --threads " + t + " --out " +
                        (dir / t).string(),
                    dir / "err.txt") == 0);
  for (const char* f : {"estimates.csv", "errors.json", "hierarchy_log.json"}) {
    CAPTURE(f);
    CHECK(slurp(dir / "1" / f) == slurp(dir / "8" / f));
  }
}

TEST_CASE("seed flag overrides the config") {
  const auto dir = scratch("seed");
  const auto cfg = write_config(dir, lg_doc());
  REQUIRE(run_cli("estimate --config " + cfg.string() + " --out " + (dir / "a").string(), dir / "e1") == 0);
  REQUIRE(run_cli("estimate --config " + cfg.string() + " --seed 3 --out " + (dir / "b").string(), dir / "e2") == 0);
  REQUIRE(run_cli("estimate --config " + cfg.string() + " --seed 4 --out " + (dir / "c").string(), dir / "e3") == 0);
  CHECK(slurp(dir / "a" / "estimates.csv") == slurp(dir / "b" / "estimates.csv"));
  CHECK(slurp(dir / "a" / "estimates.csv") != slurp(dir / "c" / "estimates.csv"));
}

}
