#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cvar_mlmc/cmlmc.hpp"
#include "cvar_mlmc/fhn.hpp"
#include "cvar_mlmc/model.hpp"
#include "cvar_mlmc/pollutant.hpp"

namespace cvar_mlmc {

struct ModelConfig {
  std::string kind = "linear_gaussian";  // linear_gaussian | fhn | pollutant
  double lg_sigma = 0.1;
  int lg_max_level = 10;
  fhn::Params fhn;
  pollutant::Params pollutant;
};

struct ReferenceConfig {
  /// Existing reference.json; computed in-process when absent.
  std::optional<std::filesystem::path> file;
  std::int64_t samples = 20000;
  /// Defaults to the deepest level the model offers, capped at 6.
  std::optional<int> level;
  int grid_points = 2001;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  ModelConfig model;

  double tau = 0.7;
  double kappa = 1.0;
  std::vector<double> z_ref;

  std::vector<double> z0;
  double alpha = 0.1;
  double eta = 0.2;
  double eps = 0.01;
  int max_iters = 200;

  CmlmcSettings mlmc;

  std::string kind = "estimate";
  std::vector<double> tolerances{0.05};
  int repeats = 1;
  std::filesystem::path out_dir = "out";
  std::optional<Interval> theta_interval;
  ReferenceConfig reference;
};

/// Parses and validates a config document. Unknown keys and bad values
/// throw ConfigError naming the JSON path (e.g. "mlmc.screen.N[2]").
ExperimentConfig parse_config(const nlohmann::json& doc);
ExperimentConfig load_config(const std::filesystem::path& path);

std::unique_ptr<Model> make_model(const ModelConfig& cfg);

}  // namespace cvar_mlmc
