#include "vpi/trace.hpp"

#include <cmath>
#include <exception>
#include <utility>

#include "vpi/error.hpp"

namespace vpi {

std::string_view to_string(RunStatus s) {
  switch (s) {
    case RunStatus::Completed:
      return "Completed";
    case RunStatus::RejectedThreshold:
      return "RejectedThreshold";
    case RunStatus::RejectedCrash:
      return "RejectedCrash";
  }
  return "?";
}

std::string_view to_string(CrashCause c) {
  switch (c) {
    case CrashCause::None:
      return "None";
    case CrashCause::ModelError:
      return "ModelError";
    case CrashCause::GuideError:
      return "GuideError";
    case CrashCause::InvalidArgument:
      return "InvalidArgument";
    case CrashCause::EventCap:
      return "EventCap";
    case CrashCause::ExtraConditional:
      return "ExtraConditional";
  }
  return "?";
}

LogProb Trace::log_prior() const {
  LogProb s = 0.0;
  for (const auto& c : choices) s += c.log_prior;
  return s;
}

LogProb Trace::log_guide() const {
  LogProb s = 0.0;
  for (const auto& c : choices) s += c.log_guide;
  return s;
}

LogProb Trace::extra_log_guide() const {
  LogProb s = 0.0;
  for (const auto& e : extras) s += e.log_guide;
  return s;
}

LogProb Trace::extra_log_conditional() const {
  LogProb s = 0.0;
  for (const auto& e : extras) s += e.log_model_conditional.value_or(kLogZero);
  return s;
}

std::vector<Value> Trace::chosen_values() const {
  std::vector<Value> out;
  out.reserve(choices.size());
  for (const auto& c : choices) out.push_back(c.chosen);
  return out;
}

std::vector<Value> Trace::extra_values() const {
  std::vector<Value> out;
  out.reserve(extras.size());
  for (const auto& e : extras) out.push_back(e.chosen);
  return out;
}

GuideProgram GuideProgram::prior(std::optional<double> ceiling) {
  return GuideProgram{nullptr, ceiling};
}

namespace detail {

using Stop = RunStop;

class Execution {
 public:
  enum class Mode { Sample, Replay, ForcedPrefix };

  Execution(Mode mode, const GuideProgram* guide, std::uint64_t seed, const RunOptions& options)
      : mode_(mode), guide_(guide), rng_(seed), options_(options) {
    trace_.seed = seed;
    trace_.choices.reserve(16);
    trace_.per_event_fe.reserve(16);
    history_.reserve(16);
  }

  void force(std::span<const Value> values, std::span<const Value> extra_values) {
    forced_ = values;
    forced_extras_ = extra_values;
  }

  void run(const ModelProgram& model) {
    Context ctx(*this);
    try {
      model(ctx);
      finalize();
    } catch (const Stop& stop) {
      trace_.status = stop.status;
      trace_.crash_cause = stop.cause;
      trace_.failure = stop.message;
    } catch (const ReplayMismatchError&) {
      throw;
    } catch (const UnsupportedGuideError&) {
      throw;
    } catch (const std::exception& e) {
      crash_into_trace(CrashCause::ModelError, e.what());
    } catch (...) {
      crash_into_trace(CrashCause::ModelError, "unknown exception");
    }
  }

  Value choose(const Dist& prior, std::optional<Symbol> label) {
    count_event();
    const std::size_t index = trace_.choices.size();

    Value chosen;
    Dist guide_dist = prior;
    if (mode_ == Mode::ForcedPrefix) {
      chosen = index < forced_.size() ? forced_[index] : prior.atoms().front().value;
    } else {
      if (mode_ == Mode::Replay && index >= forced_.size()) {
        throw ReplayMismatchError("model requested choice " + std::to_string(index) +
                                  " but only " + std::to_string(forced_.size()) +
                                  " values were supplied");
      }
      guide_dist = propose(index, label, prior);
      if (mode_ == Mode::Sample) {
        chosen = guide_dist.sample(rng_);
      } else {
        chosen = forced_[index];
        record_leak(index, prior, guide_dist);
      }
    }

    ChoiceRecord rec;
    rec.index = index;
    rec.label = std::move(label);
    rec.log_prior = prior.log_prob(chosen);
    rec.log_guide = guide_dist.log_prob(chosen);
    rec.prior = prior;
    rec.guide = std::move(guide_dist);
    rec.chosen = chosen;
    const double contribution = rec.log_guide - rec.log_prior;
    const bool unreachable = rec.log_guide == kLogZero;
    log_guide_sum_ += rec.log_guide;
    trace_.choices.push_back(std::move(rec));
    history_.push_back(chosen);

    if (unreachable) {
      // Only possible when replaying a value the guide cannot produce.
      reachable_ = false;
      throw Stop{RunStatus::RejectedThreshold, CrashCause::None, "path unreachable under guide"};
    }
    add_fe(EventKind::Choose, index, contribution);
    return chosen;
  }

  void evidence(double p) {
    count_event();
    if (std::isnan(p) || p < 0.0 || std::isinf(p)) {
      throw Stop{RunStatus::RejectedCrash, CrashCause::InvalidArgument,
                 "evidence argument must be finite and >= 0"};
    }
    const std::size_t ordinal = trace_.evidence_calls++;
    const LogProb lp = std::log(p);
    trace_.log_evidence += lp;
    add_fe(EventKind::Evidence, ordinal, -lp);
  }

  void set_hypothesis(double v) {
    if (std::isnan(v) || v < 0.0 || std::isinf(v)) {
      throw Stop{RunStatus::RejectedCrash, CrashCause::InvalidArgument,
                 "hypothesis must be finite and >= 0"};
    }
    trace_.hypothesis = v;
  }

  void print(Value v) { trace_.outputs.push_back(std::move(v)); }

  Value extra_choice(const Dist& guide_dist, ExtraConditional conditional) {
    const std::size_t index = trace_.extras.size();
    Value chosen;
    if (mode_ == Mode::Sample) {
      chosen = guide_dist.sample(rng_);
    } else if (mode_ == Mode::Replay && index < forced_extras_.size()) {
      chosen = forced_extras_[index];
    } else {
      throw UnsupportedGuideError("guide makes extra choices; exact replay is not supported");
    }
    ExtraChoiceRecord rec;
    rec.index = index;
    rec.after_choice = trace_.choices.size();
    rec.guide_dist = guide_dist;
    rec.chosen = chosen;
    rec.log_guide = guide_dist.log_prob(chosen);
    rec.conditional = std::move(conditional);
    trace_.extras.push_back(std::move(rec));
    extra_history_.push_back(chosen);
    return chosen;
  }

  Trace take_trace() { return std::move(trace_); }
  bool reachable() const { return reachable_; }
  std::vector<std::pair<std::size_t, LogProb>> take_leaks() { return std::move(leaks_); }

 private:
  void count_event() {
    if (trace_.events >= options_.max_events) {
      throw Stop{RunStatus::RejectedCrash, CrashCause::EventCap,
                 "event cap of " + std::to_string(options_.max_events) + " exceeded"};
    }
    ++trace_.events;
  }

  Dist propose(std::size_t index, const std::optional<Symbol>& label, const Dist& prior) {
    if (guide_ == nullptr || !guide_->propose) return prior;
    ChoiceSite site{index, label, prior, history_, extra_history_};
    GuideContext gctx(*this);
    std::optional<Dist> proposal;
    try {
      proposal = guide_->propose(site, gctx);
    } catch (const UnsupportedGuideError&) {
      throw;
    } catch (const std::exception& e) {
      throw Stop{RunStatus::RejectedCrash, CrashCause::GuideError, e.what()};
    } catch (const Stop&) {
      throw;
    } catch (...) {
      throw Stop{RunStatus::RejectedCrash, CrashCause::GuideError, "unknown guide exception"};
    }
    return proposal ? std::move(*proposal) : prior;
  }

  void record_leak(std::size_t index, const Dist& prior, const Dist& guide_dist) {
    double leaked = 0.0;
    for (const auto& a : guide_dist.atoms()) {
      if (!prior.contains(a.value)) leaked += a.mass;
    }
    if (leaked > 0.0) leaks_.emplace_back(index, log_guide_sum_ + std::log(leaked));
  }

  void add_fe(EventKind kind, std::size_t ordinal, double contribution) {
    trace_.per_event_fe.push_back({kind, ordinal, contribution});
    trace_.running_fe += contribution;
    if (guide_ != nullptr && guide_->ceiling && trace_.running_fe > *guide_->ceiling) {
      throw Stop{RunStatus::RejectedThreshold, CrashCause::None, "free-energy ceiling exceeded"};
    }
  }

  void finalize() {
    for (std::size_t i = 0; i < trace_.extras.size(); ++i) {
      auto& rec = trace_.extras[i];
      try {
        Dist cond = rec.conditional(trace_, std::span<const Value>(extra_history_).first(i));
        rec.log_model_conditional = cond.log_prob(rec.chosen);
      } catch (const std::exception& e) {
        throw Stop{RunStatus::RejectedCrash, CrashCause::ExtraConditional, e.what()};
      }
    }
    trace_.status = RunStatus::Completed;
  }

  void crash_into_trace(CrashCause cause, std::string message) {
    trace_.status = RunStatus::RejectedCrash;
    trace_.crash_cause = cause;
    trace_.failure = std::move(message);
  }

  Mode mode_;
  const GuideProgram* guide_;
  Rng rng_;
  RunOptions options_;
  Trace trace_;
  std::vector<Value> history_;
  std::vector<Value> extra_history_;
  std::span<const Value> forced_;
  std::span<const Value> forced_extras_;
  bool reachable_ = true;
  LogProb log_guide_sum_ = 0.0;
  std::vector<std::pair<std::size_t, LogProb>> leaks_;
};

}  // namespace detail

Value Context::choose(const Dist& prior, std::optional<Symbol> label) {
  return exec_->choose(prior, std::move(label));
}

void Context::evidence(double p) { exec_->evidence(p); }

void Context::set_hypothesis(double v) { exec_->set_hypothesis(v); }

void Context::print(Value v) { exec_->print(std::move(v)); }

Value GuideContext::extra_choice(const Dist& guide_dist, ExtraConditional conditional) {
  return exec_->extra_choice(guide_dist, std::move(conditional));
}

Trace run_trace(const ModelProgram& model, const GuideProgram& guide, std::uint64_t seed,
                const RunOptions& options) {
  detail::Execution exec(detail::Execution::Mode::Sample, &guide, seed, options);
  try {
    exec.run(model);
  } catch (const Error& e) {
    // Replay-only errors cannot arise while sampling; anything else is a crash.
    Trace t = exec.take_trace();
    t.status = RunStatus::RejectedCrash;
    t.crash_cause = CrashCause::GuideError;
    t.failure = e.what();
    return t;
  }
  return exec.take_trace();
}

Replay replay_trace(const ModelProgram& model, const GuideProgram& guide,
                    std::span<const Value> values, std::span<const Value> extra_values,
                    const RunOptions& options) {
  detail::Execution exec(detail::Execution::Mode::Replay, &guide, 0, options);
  exec.force(values, extra_values);
  exec.run(model);
  Replay out;
  out.reachable = exec.reachable();
  out.leaks = exec.take_leaks();
  out.trace = exec.take_trace();
  if (out.trace.completed() && out.trace.choices.size() != values.size()) {
    throw ReplayMismatchError("model made " + std::to_string(out.trace.choices.size()) +
                              " choices but " + std::to_string(values.size()) +
                              " values were supplied");
  }
  return out;
}

Trace run_forced_prefix(const ModelProgram& model, std::span<const Value> prefix,
                        const RunOptions& options) {
  detail::Execution exec(detail::Execution::Mode::ForcedPrefix, nullptr, 0, options);
  exec.force(prefix, {});
  exec.run(model);
  return exec.take_trace();
}

}  // namespace vpi
