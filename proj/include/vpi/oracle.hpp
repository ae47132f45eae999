#pragma once

#include <cstddef>
#include <vector>

#include "vpi/estimators.hpp"
#include "vpi/trace.hpp"

namespace vpi {

/// Exact treatment of finite discrete models by replay enumeration.

struct PathEntry {
  std::vector<Value> choices;
  LogProb log_prior = 0.0;
  LogProb log_evidence = 0.0;
  double hypothesis = 1.0;
  std::size_t events = 0;
};

struct PathEnumeration {
  ModelProgram model;
  /// Sorted lexicographically by choice sequence.
  std::vector<PathEntry> entries;
  std::size_t max_paths = 0;
  std::size_t max_events = 0;
};

/// Depth-first replay enumeration of every execution path. Throws
/// EnumerationCapError when more than max_paths paths exist or a single run
/// executes more than max_events events, ModelCrashError if the model fails
/// on some path.
PathEnumeration enumerate_paths(const ModelProgram& model, std::size_t max_paths,
                                std::size_t max_events);

/// sum_x P(x) P(e|x).
double exact_evidence(const PathEnumeration& pe);

/// sum_x P(x) P(e|x) h(x) / sum_x P(x) P(e|x). Throws ConditioningOnNullError.
double exact_conditional_expectation(const PathEnumeration& pe);

/// Exact free energy of a guide. With a ceiling on the guide, the quantities
/// describe the rejection-conditioned guide G': free_energy is
/// sum over accepted x of G(x)/A * fe(x) - ln A, which is what
/// estimate_free_energy converges to.
struct ExactFreeEnergy {
  double free_energy = 0.0;
  double kl = 0.0;
  double evidence = 0.0;
  /// A(G): guide mass on accepted paths (1 without a ceiling).
  double acceptance_rate = 1.0;
  /// E_G[events per run], rejected runs counted up to their rejection.
  double expected_events = 0.0;
};

/// Replays the guide along every enumerated path to obtain G(x). Guide mass on
/// prior-impossible values makes free_energy +inf (or, with a ceiling, counts
/// as rejected). Throws UnsupportedGuideError for guides with extra choices,
/// GuideCrashError if the guide fails on a guide-reachable path, and
/// NoAcceptedRunsError if the ceiling rejects all guide mass.
ExactFreeEnergy exact_free_energy(const PathEnumeration& pe, const GuideProgram& guide);

/// Exact E_G[f(x) P(x) / G(x)] over guide-reachable paths. Equals
/// sum_x P(x) f(x) when G covers every x with f(x) P(x) > 0, and is smaller
/// otherwise. Rejected paths contribute zero.
double exact_expected_weight(const PathEnumeration& pe, const GuideProgram& guide,
                             const TraceFunction& f);

}  // namespace vpi
