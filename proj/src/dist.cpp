#include "vpi/dist.hpp"

#include <cmath>
#include <sstream>
#include <unordered_set>

#include "vpi/error.hpp"

namespace vpi {

namespace {

bool has_duplicate(std::span<const std::pair<Value, double>> pairs) {
  if (pairs.size() <= 16) {
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      for (std::size_t j = 0; j < i; ++j) {
        if (pairs[i].first == pairs[j].first) return true;
      }
    }
    return false;
  }
  std::unordered_set<Value> seen;
  for (const auto& [v, w] : pairs) {
    if (!seen.insert(v).second) return true;
  }
  return false;
}

}  // namespace

Dist Dist::from_weights(std::span<const std::pair<Value, double>> pairs) {
  double total = 0.0;
  for (const auto& [v, w] : pairs) {
    if (!std::isfinite(w) || w < 0.0) {
      throw InvalidWeightError("weight for " + v.to_string() + " must be finite and >= 0");
    }
    total += w;
  }
  if (has_duplicate(pairs)) {
    std::unordered_set<Value> seen;
    for (const auto& [v, w] : pairs) {
      if (!seen.insert(v).second) {
        throw DuplicateValueError("duplicate value " + v.to_string() + " in distribution");
      }
    }
  }
  if (!(total > 0.0)) throw ZeroMassError("distribution has no positive weight");

  std::vector<Atom> atoms;
  atoms.reserve(pairs.size());
  for (const auto& [v, w] : pairs) {
    if (w > 0.0) atoms.push_back({v, w / total});
  }
  return Dist(std::move(atoms));
}

Dist Dist::from_weights(std::initializer_list<std::pair<Value, double>> pairs) {
  return from_weights(std::span<const std::pair<Value, double>>(pairs.begin(), pairs.size()));
}

Dist Dist::point(Value v) { return Dist(std::vector<Atom>{{std::move(v), 1.0}}); }

std::size_t Dist::find(const Value& v) const {
  const auto a = atoms();
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].value == v) return i;
  }
  return npos;
}

double Dist::prob(const Value& v) const {
  auto i = find(v);
  return i == npos ? 0.0 : (*atoms_)[i].mass;
}

LogProb Dist::log_prob(const Value& v) const {
  auto i = find(v);
  return i == npos ? kLogZero : std::log((*atoms_)[i].mass);
}

Value Dist::sample(Rng& rng) const {
  double u = rng.uniform01();
  double cum = 0.0;
  const auto atoms = this->atoms();
  for (const auto& a : atoms) {
    cum += a.mass;
    if (u < cum) return a.value;
  }
  // Rounding left cum slightly below 1.
  return atoms.back().value;
}

std::string Dist::to_string() const {
  std::ostringstream os;
  os.precision(17);
  os << '{';
  const auto atoms = this->atoms();
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    if (i) os << ", ";
    os << atoms[i].value.to_string() << ": " << atoms[i].mass;
  }
  os << '}';
  return os.str();
}

bool Dist::operator==(const Dist& other) const {
  const auto a = atoms();
  const auto b = other.atoms();
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!(a[i].value == b[i].value) || a[i].mass != b[i].mass) return false;
  }
  return true;
}

Dist uniform_range(std::int64_t lo, std::int64_t hi) {
  if (lo > hi) {
    throw EmptyRangeError("empty range [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
  }
  const double mass = 1.0 / static_cast<double>(hi - lo + 1);
  std::vector<Atom> atoms;
  atoms.reserve(static_cast<std::size_t>(hi - lo + 1));
  for (std::int64_t i = lo; i <= hi; ++i) atoms.push_back({Value(i), mass});
  return Dist(std::move(atoms));
}

Dist mix(const Dist& a, const Dist& b, double w) {
  if (!(w >= 0.0 && w <= 1.0)) throw InvalidWeightError("mixing weight must lie in [0, 1]");
  std::vector<std::pair<Value, double>> pairs;
  pairs.reserve(a.size() + b.size());
  for (const auto& atom : a.atoms()) pairs.emplace_back(atom.value, w * atom.mass + (1.0 - w) * b.prob(atom.value));
  for (const auto& atom : b.atoms()) {
    if (!a.contains(atom.value)) pairs.emplace_back(atom.value, (1.0 - w) * atom.mass);
  }
  return Dist::from_weights(pairs);
}

}  // namespace vpi
