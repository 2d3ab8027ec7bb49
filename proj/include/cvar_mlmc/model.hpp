#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cvar_mlmc/rng.hpp"

namespace cvar_mlmc {

/// Design vector z ∈ R^d.
class Design {
 public:
  Design() = default;
  explicit Design(std::vector<double> z);

  std::size_t dim() const { return z_.size(); }
  double operator[](std::size_t k) const { return z_[k]; }
  const std::vector<double>& values() const { return z_; }

 private:
  std::vector<double> z_;
};

/// One coupled draw at a level: fine and (for level > 0) coarse QoI and
/// design sensitivities, driven by the same randomness.
struct CorrelatedSample {
  double q_fine = 0.0;
  std::optional<double> q_coarse;
  std::vector<double> grad_fine;
  std::optional<std::vector<double>> grad_coarse;
  double cost = 0.0;
};

struct LevelBatch {
  int level = 0;
  std::vector<CorrelatedSample> samples;
  double total_cost = 0.0;

  std::size_t size() const { return samples.size(); }
};

/// Contract for every stochastic model. Implementations are immutable after
/// construction; sample_pair is a pure function of (z, level, stream).
class Model {
 public:
  virtual ~Model() = default;

  virtual std::string name() const = 0;
  virtual std::size_t dimension() const = 0;
  virtual int max_level() const = 0;
  /// Work units of one fine solve at `level` (time steps, mesh cells, ...).
  virtual double level_cost(int level) const = 0;

  /// Throws ParameterError for a bad level or design, SolverError if the
  /// solve breaks down.
  virtual CorrelatedSample sample_pair(const Design& z, int level, SeedStream& stream) const = 0;

 protected:
  void check_request(const Design& z, int level) const;
};

/// Q(z, ω) = z + σ ξ with ξ standard normal; identical at every level.
class LinearGaussianModel final : public Model {
 public:
  explicit LinearGaussianModel(double sigma = 0.1, int max_level = 10);

  std::string name() const override { return "linear_gaussian"; }
  std::size_t dimension() const override { return 1; }
  int max_level() const override { return max_level_; }
  double level_cost(int) const override { return 1.0; }
  CorrelatedSample sample_pair(const Design& z, int level, SeedStream& stream) const override;

  double sigma() const { return sigma_; }
  double exact_var(double z, double tau) const;
  double exact_cvar(double z, double tau) const;
  /// Minimiser of c_τ(z) + κ (z - z_ref)².
  static double penalised_optimum(double z_ref, double kappa);

 private:
  double sigma_;
  int max_level_;
};

struct CouplingRow {
  int level = 0;
  double mean_diff = 0.0;
  double var_diff = 0.0;
  double mean_cost = 0.0;
};

/// Per-level mean and variance of Q_l - Q_{l-1} and mean pair cost for
/// levels 1..levels.
std::vector<CouplingRow> coupling_report(const Model& model, const Design& z, int levels,
                                         int samples_per_level, std::uint64_t seed);

}  // namespace cvar_mlmc
