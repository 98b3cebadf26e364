#pragma once
// Deterministic random streams for trajectory simulation.
//
// One independent stream per trajectory. The generator is splitmix64
// (Steele, Lea & Flood; Vigna's fixed-increment variant) and Gaussian
// variates come from inverse-CDF sampling with Wichura's AS 241 (PPND16)
// normal quantile, so a fixed seed reproduces the same increments bit for
// bit on any IEEE-754 platform.

#include <cstdint>

namespace qwfb {

// splitmix64 output finalizer, also used as a 64-bit mixing hash.
std::uint64_t mix64(std::uint64_t z);

// Seed of the stream for trajectory `index` under `master`. Documented rule:
//   stream_seed = mix64(master ^ mix64(index + 0x632BE59BD9B4E019))
std::uint64_t stream_seed(std::uint64_t master, std::uint64_t index);

// Inverse standard-normal CDF (AS 241, PPND16), |error| < 1e-15 for
// p in (0, 1).
double normal_quantile(double p);

class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64();
  double uniform01();  // open interval (0, 1)
  double normal();     // standard normal via normal_quantile(uniform01())

 private:
  std::uint64_t state_;
};

}  // namespace qwfb
