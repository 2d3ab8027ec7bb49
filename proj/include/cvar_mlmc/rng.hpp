#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace cvar_mlmc {

/// Counter-based random stream (Philox4x32-10).
///
/// The key is a hash of (master_seed, level, replica_tag); the sample index
/// occupies the upper half of the 128-bit counter and the block number the
/// lower half. Streams are therefore random-access: any (level, index, tag)
/// can be generated on any thread without touching any other stream, and two
/// streams that differ in sample_index can never share a counter block.
class SeedStream {
 public:
  SeedStream(std::uint64_t master_seed, std::uint64_t level, std::uint64_t sample_index,
             std::uint64_t replica_tag);

  std::uint64_t master_seed() const { return master_seed_; }
  std::uint64_t level() const { return level_; }
  std::uint64_t sample_index() const { return sample_index_; }
  std::uint64_t replica_tag() const { return replica_tag_; }

  /// Next raw 64-bit word.
  std::uint64_t next_u64();
  /// Uniform on the open interval (0, 1).
  double next_open01();
  double next_uniform(double lo, double hi);
  double next_normal();
  /// Uniform integer in [0, bound).
  std::uint64_t next_below(std::uint64_t bound);

 private:
  void refill();

  std::uint64_t master_seed_;
  std::uint64_t level_;
  std::uint64_t sample_index_;
  std::uint64_t replica_tag_;
  std::array<std::uint32_t, 2> key_{};
  std::uint64_t block_ = 0;
  std::array<std::uint32_t, 4> buffer_{};
  int buffer_pos_ = 4;
  bool has_spare_normal_ = false;
  double spare_normal_ = 0.0;
};

SeedStream derive_stream(std::uint64_t master_seed, std::uint64_t level,
                         std::uint64_t sample_index, std::uint64_t replica_tag);

enum class DrawKind { standard_normal, uniform };

struct DrawSpec {
  DrawKind kind = DrawKind::standard_normal;
  double lo = 0.0;
  double hi = 1.0;

  static DrawSpec normal() { return {}; }
  static DrawSpec uniform(double lo, double hi) { return {DrawKind::uniform, lo, hi}; }
};

/// Next `count` variates of the given law; consumption is sequential.
std::vector<double> draw(SeedStream& stream, const DrawSpec& spec, std::size_t count);

/// Replica tags. Tag 0 is the primary run; optimisation iterations and
/// bootstrap replicas get their own disjoint ranges.
std::uint64_t iteration_tag(std::uint64_t iteration);
std::uint64_t bootstrap_tag(std::uint64_t iteration, std::uint64_t round, std::uint64_t replica);
std::uint64_t reference_tag(std::uint64_t index);

}  // namespace cvar_mlmc
