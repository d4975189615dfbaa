#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>

namespace kbsa {

// Counter-based random stream (Philox4x32-10).
//
// A stream is a value: copying it forks an identical sequence. Streams are
// addressed by (seed, id); `child(...)` derives independent sub-streams from
// an id path, so every Monte Carlo task can own its randomness regardless of
// which thread executes it.
class RandomStream {
 public:
  RandomStream() : RandomStream(0, 0) {}
  RandomStream(std::uint64_t seed, std::uint64_t id);

  // Uniform double strictly inside (0, 1), 53-bit resolution.
  double uniform();

  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  std::uint32_t next_u32();

  RandomStream child(std::uint64_t id) const;
  RandomStream child(std::initializer_list<std::uint64_t> path) const;

  std::uint64_t seed() const { return seed_; }
  std::uint64_t id() const { return id_; }

 private:
  void refill();

  std::uint64_t seed_;
  std::uint64_t id_;
  std::uint64_t counter_ = 0;
  std::array<std::uint32_t, 4> block_{};
  int used_ = 4;
};

// 64-bit mixing function (splitmix64 finalizer).
std::uint64_t mix64(std::uint64_t x);

}  // namespace kbsa
