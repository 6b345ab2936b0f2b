#pragma once

#include <cstdint>
#include <optional>

namespace hflow {

// Counter-based splittable generator.
//
// Draw i of stream (seed, stream_id) is
//   mix(key + (i + 1) * 0x9E3779B97F4A7C15),  key = mix(seed ^ mix(stream_id + C))
// where mix is the SplitMix64 finalizer. Nothing depends on global state or
// on the order in which other streams are consumed, so a trial's draws are
// fixed by (seed, stream_id) alone.
//
// Uniform doubles take the top 53 bits. Normals use the Box-Muller transform
// on two consecutive uniforms u1 in (0, 1], u2 in [0, 1):
//   r = sqrt(-2 log u1), z0 = r cos(2 pi u2), z1 = r sin(2 pi u2)
// and are emitted in the order z0, z1.
class Rng {
 public:
  Rng(std::uint64_t seed, std::uint64_t stream_id);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

  std::uint64_t next_u64();
  // Uniform on [0, 1).
  double uniform();
  // Uniform on (0, 1].
  double uniform_open_zero();
  // Uniform integer in [0, bound), bound > 0. Modulo with rejection of the
  // incomplete top block, so the result is exactly uniform.
  std::uint64_t uniform_below(std::uint64_t bound);
  double normal();

  // Child stream derived from this one's identity; does not advance *this.
  Rng split(std::uint64_t child_id) const;

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  std::optional<double> cached_normal_;
};

std::uint64_t mix64(std::uint64_t z);

}  // namespace hflow
