#include "vpi/rng.hpp"

#include <cmath>
#include <numbers>

namespace vpi {

double Rng::normal() {
  // 1 - u keeps the log argument in (0, 1].
  double u1 = 1.0 - uniform01();
  double u2 = uniform01();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t Rng::below(std::uint64_t n) {
  // Lemire-style rejection to avoid modulo bias.
  std::uint64_t threshold = (0 - n) % n;
  for (;;) {
    std::uint64_t r = engine_();
    if (r >= threshold) return r % n;
  }
}

}  // namespace vpi
