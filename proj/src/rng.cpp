#include "cvar_mlmc/rng.hpp"

#include <cmath>
#include <numbers>

#include "cvar_mlmc/errors.hpp"

namespace cvar_mlmc {
namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> ctr,
                                           std::array<std::uint32_t, 2> key) {
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = std::uint64_t{kPhiloxM0} * ctr[0];
    const std::uint64_t p1 = std::uint64_t{kPhiloxM1} * ctr[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const auto lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const auto lo1 = static_cast<std::uint32_t>(p1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kPhiloxW0;
    key[1] += kPhiloxW1;
  }
  return ctr;
}

constexpr std::uint64_t kTagIterationBase = 1ull << 56;
constexpr std::uint64_t kTagBootstrapBase = 2ull << 56;
constexpr std::uint64_t kTagReferenceBase = 3ull << 56;

}  // namespace

SeedStream::SeedStream(std::uint64_t master_seed, std::uint64_t level,
                       std::uint64_t sample_index, std::uint64_t replica_tag)
    : master_seed_(master_seed),
      level_(level),
      sample_index_(sample_index),
      replica_tag_(replica_tag) {
  std::uint64_t h = splitmix64(master_seed);
  h = splitmix64(h ^ level);
  h = splitmix64(h ^ replica_tag);
  key_ = {static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32)};
}

void SeedStream::refill() {
  const std::array<std::uint32_t, 4> ctr = {
      static_cast<std::uint32_t>(block_), static_cast<std::uint32_t>(block_ >> 32),
      static_cast<std::uint32_t>(sample_index_),
      static_cast<std::uint32_t>(sample_index_ >> 32)};
  buffer_ = philox4x32_10(ctr, key_);
  ++block_;
  buffer_pos_ = 0;
}

std::uint64_t SeedStream::next_u64() {
  if (buffer_pos_ > 2) refill();
  const std::uint64_t lo = buffer_[buffer_pos_];
  const std::uint64_t hi = buffer_[buffer_pos_ + 1];
  buffer_pos_ += 2;
  return (hi << 32) | lo;
}

double SeedStream::next_open01() {
  // 53 random bits, shifted by half an ulp so that 0 is excluded.
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double SeedStream::next_uniform(double lo, double hi) {
  return lo + (hi - lo) * next_open01();
}

double SeedStream::next_normal() {
  if (has_spare_normal_) {
    has_spare_normal_ = false;
    return spare_normal_;
  }
  const double u1 = next_open01();
  const double u2 = next_open01();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double phase = 2.0 * std::numbers::pi * u2;
  spare_normal_ = r * std::sin(phase);
  has_spare_normal_ = true;
  return r * std::cos(phase);
}

std::uint64_t SeedStream::next_below(std::uint64_t bound) {
  if (bound == 0) throw ParameterError("next_below: bound must be positive");
  // Lemire's multiply-shift with rejection.
  while (true) {
    const std::uint64_t x = next_u64();
    const unsigned __int128 m = static_cast<unsigned __int128>(x) * bound;
    const auto low = static_cast<std::uint64_t>(m);
    if (low >= bound || low >= (-bound) % bound) return static_cast<std::uint64_t>(m >> 64);
  }
}

SeedStream derive_stream(std::uint64_t master_seed, std::uint64_t level,
                         std::uint64_t sample_index, std::uint64_t replica_tag) {
  return SeedStream(master_seed, level, sample_index, replica_tag);
}

std::vector<double> draw(SeedStream& stream, const DrawSpec& spec, std::size_t count) {
  if (spec.kind == DrawKind::uniform && !(spec.lo < spec.hi))
    throw ParameterError("draw: uniform bounds require lo < hi");
  std::vector<double> out(count);
  for (auto& x : out)
    x = spec.kind == DrawKind::uniform ? stream.next_uniform(spec.lo, spec.hi)
                                       : stream.next_normal();
  return out;
}

std::uint64_t iteration_tag(std::uint64_t iteration) { return kTagIterationBase + iteration; }

std::uint64_t bootstrap_tag(std::uint64_t iteration, std::uint64_t round,
                            std::uint64_t replica) {
  return kTagBootstrapBase + (iteration << 32) + (round << 20) + replica;
}

std::uint64_t reference_tag(std::uint64_t index) { return kTagReferenceBase + index; }

}  // namespace cvar_mlmc
