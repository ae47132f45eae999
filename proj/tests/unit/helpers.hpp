#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "vpi/dist.hpp"
#include "vpi/rng.hpp"
#include "vpi/trace.hpp"

namespace vpi::testing {

inline const double kDiceEvidence = 15.0 / 216.0;
inline const double kDiceFe = std::log(216.0 / 15.0);

/// Random finite model: a chain of choices whose priors depend on the values
/// drawn so far, soft evidence after some choices, and a hypothesis.
struct RandomModel {
  std::uint64_t seed;
  int max_choices = 5;

  void operator()(Context& ctx) const {
    Rng shape(seed);
    const int n = 1 + static_cast<int>(shape.below(static_cast<std::uint64_t>(max_choices)));
    std::int64_t acc = 0;
    for (int i = 0; i < n; ++i) {
      const int k = 2 + static_cast<int>(shape.below(3));
      std::vector<std::pair<Value, double>> w;
      for (int j = 0; j < k; ++j) {
        w.emplace_back(Value(j), 0.1 + shape.uniform01() + 0.3 * static_cast<double>((acc + j) % 3));
      }
      acc += ctx.choose(Dist::from_weights(w)).as_int();
      if (shape.uniform01() < 0.5) ctx.evidence(0.05 + 0.9 * static_cast<double>((acc * 7) % 10) / 10.0);
    }
    ctx.set_hypothesis(static_cast<double>(acc % 2));
  }
};

/// Guide that reweights every prior atom by a seed-dependent positive factor.
inline GuideProgram random_guide(std::uint64_t seed, std::optional<double> ceiling = std::nullopt) {
  GuideProgram g;
  g.ceiling = ceiling;
  g.propose = [seed](const ChoiceSite& site, GuideContext&) -> std::optional<Dist> {
    Rng r(derive_seed(seed, site.index * 131 + site.history.size()));
    std::vector<std::pair<Value, double>> w;
    for (const auto& a : site.prior.atoms()) w.emplace_back(a.value, a.mass * (0.2 + r.uniform01()));
    return Dist::from_weights(w);
  };
  return g;
}

}  // namespace vpi::testing
