#include "vpi/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "vpi/error.hpp"

namespace vpi {

PathEnumeration enumerate_paths(const ModelProgram& model, std::size_t max_paths,
                                std::size_t max_events) {
  PathEnumeration pe;
  pe.model = model;
  pe.max_paths = max_paths;
  pe.max_events = max_events;

  RunOptions opts;
  opts.max_events = max_events;

  std::vector<Value> prefix;
  for (;;) {
    Trace t = run_forced_prefix(model, prefix, opts);
    if (t.status == RunStatus::RejectedCrash) {
      if (t.crash_cause == CrashCause::EventCap) {
        throw EnumerationCapError("a path exceeds " + std::to_string(max_events) + " events");
      }
      throw ModelCrashError("model failed during enumeration: " + t.failure);
    }
    if (pe.entries.size() >= max_paths) {
      throw EnumerationCapError("more than " + std::to_string(max_paths) + " paths");
    }

    PathEntry entry;
    entry.choices = t.chosen_values();
    entry.log_prior = t.log_prior();
    entry.log_evidence = t.log_evidence;
    entry.hypothesis = t.hypothesis;
    entry.events = t.events;
    pe.entries.push_back(std::move(entry));

    // Backtrack to the deepest choice with an untried alternative.
    std::size_t depth = t.choices.size();
    bool advanced = false;
    while (depth > 0) {
      --depth;
      const auto& rec = t.choices[depth];
      const std::size_t pos = rec.prior.find(rec.chosen);
      if (pos + 1 < rec.prior.size()) {
        prefix.assign(pe.entries.back().choices.begin(),
                      pe.entries.back().choices.begin() + static_cast<std::ptrdiff_t>(depth));
        prefix.push_back(rec.prior.atoms()[pos + 1].value);
        advanced = true;
        break;
      }
    }
    if (!advanced) break;
  }

  std::sort(pe.entries.begin(), pe.entries.end(),
            [](const PathEntry& a, const PathEntry& b) { return a.choices < b.choices; });
  return pe;
}

double exact_evidence(const PathEnumeration& pe) {
  double total = 0.0;
  for (const auto& e : pe.entries) total += std::exp(e.log_prior + e.log_evidence);
  return total;
}

double exact_conditional_expectation(const PathEnumeration& pe) {
  double num = 0.0;
  double den = 0.0;
  for (const auto& e : pe.entries) {
    const double w = std::exp(e.log_prior + e.log_evidence);
    num += w * e.hypothesis;
    den += w;
  }
  if (!(den > 0.0)) throw ConditioningOnNullError("evidence has probability zero");
  return num / den;
}

namespace {

// Events executed up to and including choice `index`.
std::size_t events_through_choice(const Trace& t, std::size_t index) {
  for (std::size_t i = 0; i < t.per_event_fe.size(); ++i) {
    const auto& ev = t.per_event_fe[i];
    if (ev.kind == EventKind::Choose && ev.ordinal == index) return i + 1;
  }
  return t.events;
}

Replay replay_entry(const PathEnumeration& pe, const PathEntry& entry, const GuideProgram& guide) {
  RunOptions opts;
  opts.max_events = pe.max_events;
  Replay r = replay_trace(pe.model, guide, entry.choices, {}, opts);
  if (r.reachable && r.trace.status == RunStatus::RejectedCrash) {
    if (r.trace.crash_cause == CrashCause::GuideError) {
      throw GuideCrashError("guide failed on a reachable path: " + r.trace.failure);
    }
    throw ModelCrashError("model failed during replay: " + r.trace.failure);
  }
  return r;
}

}  // namespace

ExactFreeEnergy exact_free_energy(const PathEnumeration& pe, const GuideProgram& guide) {
  ExactFreeEnergy out;
  out.evidence = exact_evidence(pe);

  double accepted = 0.0;
  double weighted_fe = 0.0;
  bool infinite = false;
  double events = 0.0;
  std::set<std::vector<Value>> rejected_prefixes;
  std::set<std::vector<Value>> leak_sites;

  for (const auto& entry : pe.entries) {
    Replay r = replay_entry(pe, entry, guide);

    for (const auto& [index, log_mass] : r.leaks) {
      std::vector<Value> site(entry.choices.begin(),
                              entry.choices.begin() + static_cast<std::ptrdiff_t>(index));
      if (!leak_sites.insert(site).second) continue;
      if (!guide.ceiling) {
        infinite = true;
      } else {
        // The leaked value's +inf contribution trips the ceiling at that choice.
        events += std::exp(log_mass) * static_cast<double>(events_through_choice(r.trace, index));
      }
    }

    if (!r.reachable) continue;
    const Trace& t = r.trace;
    const double g = std::exp(t.log_guide());
    if (t.status == RunStatus::RejectedThreshold) {
      if (rejected_prefixes.insert(t.chosen_values()).second) {
        events += g * static_cast<double>(t.events);
      }
      continue;
    }
    accepted += g;
    events += g * static_cast<double>(t.events);
    if (g > 0.0) {
      if (std::isinf(t.running_fe)) {
        infinite = true;
      } else {
        weighted_fe += g * t.running_fe;
      }
    }
  }

  if (!(accepted > 0.0)) throw NoAcceptedRunsError(pe.entries.size());
  out.acceptance_rate = accepted;
  out.expected_events = events;
  out.free_energy = infinite ? kInf : weighted_fe / accepted - std::log(accepted);
  out.kl = (infinite || !(out.evidence > 0.0)) ? kInf : out.free_energy + std::log(out.evidence);
  return out;
}

double exact_expected_weight(const PathEnumeration& pe, const GuideProgram& guide,
                             const TraceFunction& f) {
  double total = 0.0;
  for (const auto& entry : pe.entries) {
    Replay r = replay_entry(pe, entry, guide);
    if (!r.reachable || !r.trace.completed()) continue;
    // G(x) * f(x) P(x) / G(x)
    const double fx = f(r.trace);
    total += fx * std::exp(r.trace.log_prior());
  }
  return total;
}

}  // namespace vpi
