#include "hflow/rng.hpp"

#include <cmath>
#include <numbers>

#include "hflow/errors.hpp"

namespace hflow {

namespace {
constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
constexpr std::uint64_t kStreamSalt = 0xD1B54A32D192ED03ULL;
constexpr double kTwoPow53Inv = 1.0 / 9007199254740992.0;
}  // namespace

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

Rng::Rng(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed),
      stream_id_(stream_id),
      key_(mix64(seed ^ mix64(stream_id + kStreamSalt))) {}

std::uint64_t Rng::next_u64() {
  ++counter_;
  return mix64(key_ + counter_ * kGolden);
}

double Rng::uniform() {
  return static_cast<double>(next_u64() >> 11) * kTwoPow53Inv;
}

double Rng::uniform_open_zero() {
  return static_cast<double>((next_u64() >> 11) + 1) * kTwoPow53Inv;
}

std::uint64_t Rng::uniform_below(std::uint64_t bound) {
  if (bound == 0) throw ArgumentError("uniform_below: bound must be positive");
  // Largest multiple of bound representable in 64 bits; draws above it are rejected.
  const std::uint64_t excess = (UINT64_MAX % bound + 1) % bound;
  const std::uint64_t limit = UINT64_MAX - excess;
  std::uint64_t draw = next_u64();
  while (draw > limit) draw = next_u64();
  return draw % bound;
}

double Rng::normal() {
  if (cached_normal_) {
    const double z = *cached_normal_;
    cached_normal_.reset();
    return z;
  }
  const double u1 = uniform_open_zero();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  cached_normal_ = r * std::sin(theta);
  return r * std::cos(theta);
}

Rng Rng::split(std::uint64_t child_id) const {
  return Rng(mix64(key_ ^ kStreamSalt), mix64(child_id + kGolden));
}

}  // namespace hflow
