#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vpi/dist.hpp"

namespace vpi {

enum class RunStatus { Completed, RejectedThreshold, RejectedCrash };

std::string_view to_string(RunStatus s);

/// Why a run ended up RejectedCrash.
enum class CrashCause { None, ModelError, GuideError, InvalidArgument, EventCap, ExtraConditional };

std::string_view to_string(CrashCause c);

struct ChoiceRecord {
  std::size_t index = 0;
  std::optional<Symbol> label;
  Dist prior;
  Dist guide;
  Value chosen;
  LogProb log_prior = 0.0;
  LogProb log_guide = 0.0;
};

class Trace;

/// Model extension for an extra guide choice: maps the completed trace and
/// the earlier extra values y_1..y_{i-1} to the conditional P_G(y_i | x, ...).
using ExtraConditional =
    std::function<Dist(const Trace& trace, std::span<const Value> earlier_extras)>;

struct ExtraChoiceRecord {
  std::size_t index = 0;
  /// Number of model choices made before this extra choice was inserted.
  std::size_t after_choice = 0;
  Dist guide_dist;
  Value chosen;
  LogProb log_guide = 0.0;
  ExtraConditional conditional;
  /// Set once, when the run completes.
  std::optional<LogProb> log_model_conditional;
};

enum class EventKind { Choose, Evidence };

/// One free-energy contribution. `ordinal` is the choice index for Choose
/// events and the evidence-call index for Evidence events.
struct FeEvent {
  EventKind kind;
  std::size_t ordinal;
  double contribution;

  bool operator==(const FeEvent&) const = default;
};

/// One execution path together with its probability bookkeeping.
class Trace {
 public:
  std::vector<ChoiceRecord> choices;
  std::vector<ExtraChoiceRecord> extras;
  LogProb log_evidence = 0.0;
  double hypothesis = 1.0;
  RunStatus status = RunStatus::Completed;
  CrashCause crash_cause = CrashCause::None;
  std::string failure;
  std::uint64_t seed = 0;
  std::vector<FeEvent> per_event_fe;
  /// Running one-run free energy, accumulated over per_event_fe in event order.
  double running_fe = 0.0;
  /// Runtime events executed (choices + evidence calls), including the one
  /// that triggered a rejection.
  std::size_t events = 0;
  std::size_t evidence_calls = 0;
  /// Values passed to Context::print, in order.
  std::vector<Value> outputs;

  bool completed() const { return status == RunStatus::Completed; }

  /// log P(x): sum of log_prior over choices.
  LogProb log_prior() const;
  /// log G(x): sum of log_guide over choices.
  LogProb log_guide() const;
  /// log G(y): sum of extras' log_guide.
  LogProb extra_log_guide() const;
  /// log P_G(y | x): sum of extras' log_model_conditional (unset counts as -inf).
  LogProb extra_log_conditional() const;

  std::vector<Value> chosen_values() const;
  std::vector<Value> extra_values() const;
};

namespace detail {
class Execution;

/// Unwinds model code when a run ends early. Deliberately not a
/// std::exception so that model code catching std::exception does not
/// swallow it. Language bindings must let it through untouched.
struct RunStop {
  RunStatus status;
  CrashCause cause;
  std::string message;
};
}  // namespace detail

/// Handle through which a model program talks to the runtime.
class Context {
 public:
  Value choose(const Dist& prior, std::optional<Symbol> label = std::nullopt);
  Value choose(const Dist& prior, std::string_view label) { return choose(prior, Symbol(label)); }

  /// Multiplies P(e|x) by p. Densities above 1 are allowed.
  void evidence(double p);
  void evidence(bool holds) { evidence(holds ? 1.0 : 0.0); }

  /// Sets *h*; the last write wins.
  void set_hypothesis(double v);
  void set_hypothesis(bool v) { set_hypothesis(v ? 1.0 : 0.0); }

  /// Records an output value on the trace; has no probabilistic effect.
  void print(Value v);

 private:
  friend class detail::Execution;
  explicit Context(detail::Execution& exec) : exec_(&exec) {}
  detail::Execution* exec_;
};

/// Must be deterministic given the values returned by its choose calls.
using ModelProgram = std::function<void(Context&)>;

/// What the guide sees at a choice site. It cannot reach model state.
struct ChoiceSite {
  std::size_t index;
  const std::optional<Symbol>& label;
  const Dist& prior;
  std::span<const Value> history;
  std::span<const Value> extras;
};

/// Handle through which a guide inserts extra choices.
class GuideContext {
 public:
  Value extra_choice(const Dist& guide_dist, ExtraConditional conditional);

 private:
  friend class detail::Execution;
  explicit GuideContext(detail::Execution& exec) : exec_(&exec) {}
  detail::Execution* exec_;
};

/// Returns the guide distribution for a site, or nullopt to keep the prior.
using GuideFn = std::function<std::optional<Dist>(const ChoiceSite&, GuideContext&)>;

struct GuideProgram {
  GuideFn propose;
  /// Runs whose running free energy ever exceeds this are RejectedThreshold.
  std::optional<double> ceiling;

  /// The guide that never overrides the prior.
  static GuideProgram prior(std::optional<double> ceiling = std::nullopt);
};

struct RunOptions {
  /// Runs executing more events than this crash (resource exhaustion).
  std::size_t max_events = 1u << 20;
};

/// Runs `model` with choices drawn from `guide`. Failures never escape; they
/// are folded into the trace status.
Trace run_trace(const ModelProgram& model, const GuideProgram& guide, std::uint64_t seed,
                const RunOptions& options = {});

/// Scoring of a fixed path under a guide.
struct Replay {
  Trace trace;
  /// False when some forced value has zero guide mass (G(x) = 0); the
  /// replay stops at that choice.
  bool reachable = true;
  /// Guide mass that fell outside the prior support at a reachable site:
  /// (choice index, log of G(prefix) * leaked mass).
  std::vector<std::pair<std::size_t, LogProb>> leaks;
};

/// Re-executes `model` with its choices forced to `values` (and extra choices
/// forced to `extra_values`), scoring each site under `guide`. Draws nothing.
/// The ceiling is honoured; the replay stops at a rejection or at the first
/// forced value the guide cannot produce. Throws ReplayMismatchError if the
/// model asks for more choices than were supplied, UnsupportedGuideError if
/// the guide makes an extra choice beyond `extra_values`.
Replay replay_trace(const ModelProgram& model, const GuideProgram& guide,
                    std::span<const Value> values, std::span<const Value> extra_values = {},
                    const RunOptions& options = {});

/// Runs `model` forcing the first `prefix.size()` choices and taking the first
/// atom of the prior thereafter. The guide is the prior. Used for enumeration.
Trace run_forced_prefix(const ModelProgram& model, std::span<const Value> prefix,
                        const RunOptions& options = {});

}  // namespace vpi
