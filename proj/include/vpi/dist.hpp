#pragma once

#include <cstdint>
#include <initializer_list>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "vpi/rng.hpp"
#include "vpi/value.hpp"

namespace vpi {

/// Natural-log probability; -infinity encodes zero.
using LogProb = double;

inline constexpr LogProb kLogZero = -std::numeric_limits<double>::infinity();
inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct Atom {
  Value value;
  double mass;
};

/// Finite categorical distribution. Immutable; atoms keep the order they were
/// given in, which fixes the inverse-CDF sampling order.
class Dist {
 public:
  /// Normalizes `pairs`, dropping zero weights.
  /// Throws ZeroMassError, DuplicateValueError or InvalidWeightError.
  static Dist from_weights(std::span<const std::pair<Value, double>> pairs);
  static Dist from_weights(std::initializer_list<std::pair<Value, double>> pairs);
  static Dist point(Value v);

  /// Empty placeholder; not a valid distribution until assigned.
  Dist() = default;

  std::span<const Atom> atoms() const {
    return atoms_ ? std::span<const Atom>(*atoms_) : std::span<const Atom>();
  }
  std::size_t size() const { return atoms_ ? atoms_->size() : 0; }

  double prob(const Value& v) const;
  LogProb log_prob(const Value& v) const;
  bool contains(const Value& v) const { return find(v) != npos; }

  /// Position of `v` in atoms(), or npos.
  std::size_t find(const Value& v) const;
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  /// Inverse-CDF draw; consumes exactly one uniform from `rng`.
  Value sample(Rng& rng) const;

  std::string to_string() const;

  bool operator==(const Dist& other) const;

 private:
  explicit Dist(std::vector<Atom> atoms)
      : atoms_(std::make_shared<const std::vector<Atom>>(std::move(atoms))) {}
  friend Dist uniform_range(std::int64_t lo, std::int64_t hi);

  // Shared because distributions are immutable and copied into every record.
  std::shared_ptr<const std::vector<Atom>> atoms_;
};

/// Uniform mass on every integer in [lo, hi]. Throws EmptyRangeError if lo > hi.
Dist uniform_range(std::int64_t lo, std::int64_t hi);

/// w*a + (1-w)*b over the union of supports, in a's order followed by b's extras.
Dist mix(const Dist& a, const Dist& b, double w);

inline LogProb dist_log_prob(const Dist& d, const Value& v) { return d.log_prob(v); }

}  // namespace vpi
