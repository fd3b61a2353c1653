#pragma once
#include <cmath>
#include <cstdint>
#include <numbers>

namespace bethe {

// Counter-mode generator built on the splitmix64 finalizer.  Draw i of stream
// (seed, stream) is a pure function of (seed, stream, i): any worker can open
// any stream at any position, which is what makes campaign output independent
// of the worker count.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0)
      : base_(mix(mix(seed) ^ mix(~stream))) {}

  std::uint64_t next_u64() { return mix(base_ + golden * ++ctr_); }

  // uniform on (0,1), endpoints excluded
  double next_double() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  double uniform(double a, double b) { return a + (b - a) * next_double(); }

  // Box-Muller; two uniforms per call, no cached spare
  double normal() {
    const double u = next_double();
    const double v = next_double();
    return std::sqrt(-2.0 * std::log(u)) *
           std::cos(2.0 * std::numbers::pi_v<double> * v);
  }

 private:
  static constexpr std::uint64_t golden = 0x9e3779b97f4a7c15ull;

  static std::uint64_t mix(std::uint64_t z) {
    z += golden;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  std::uint64_t base_;
  std::uint64_t ctr_ = 0;
};

}  // namespace bethe
