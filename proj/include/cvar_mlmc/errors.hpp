#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace cvar_mlmc {

/// Invalid argument passed to a library routine.
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Evaluation outside the domain of a function (e.g. spline extrapolation).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Not enough samples to form the requested statistic.
class InsufficientSamplesError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A single model solve failed. Carries the stream tuple so the failing
/// sample can be reproduced in isolation.
class SampleError : public std::runtime_error {
 public:
  SampleError(const std::string& what, int level, std::uint64_t master_seed,
              std::uint64_t sample_index, std::uint64_t replica_tag)
      : std::runtime_error(what + " (level " + std::to_string(level) + ", seed " +
                           std::to_string(master_seed) + ", index " +
                           std::to_string(sample_index) + ", tag " +
                           std::to_string(replica_tag) + ")"),
        level_(level),
        master_seed_(master_seed),
        sample_index_(sample_index),
        replica_tag_(replica_tag) {}

  int level() const { return level_; }
  std::uint64_t master_seed() const { return master_seed_; }
  std::uint64_t sample_index() const { return sample_index_; }
  std::uint64_t replica_tag() const { return replica_tag_; }

 private:
  int level_;
  std::uint64_t master_seed_;
  std::uint64_t sample_index_;
  std::uint64_t replica_tag_;
};

/// Raised by model internals before the stream tuple is known; the sampling
/// loop rethrows it as a SampleError.
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Configuration file problem; `path()` names the offending field.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string path, const std::string& what)
      : std::runtime_error(path + ": " + what), path_(std::move(path)) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

}  // namespace cvar_mlmc
