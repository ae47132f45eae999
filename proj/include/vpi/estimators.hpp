#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "vpi/error.hpp"
#include "vpi/trace.hpp"

namespace vpi {

/// How a batch of traces is generated. Trace i always uses seed
/// derive_seed(base_seed, i), so results do not depend on `workers`.
struct SamplingOptions {
  std::size_t workers = 1;
  RunOptions run;
};

/// Sampled free energy F(G', P, e) in nats, with the rejection adjustment.
struct FreeEnergyEstimate {
  double mean_fe = 0.0;    // over accepted runs
  double std_error = 0.0;  // of adjusted_fe; +inf when only one run was accepted
  std::size_t n_total = 0;
  std::size_t n_accepted = 0;
  double acceptance_rate = 0.0;  // A(G)
  double adjusted_fe = 0.0;      // mean_fe - ln(acceptance_rate)
  std::size_t total_events = 0;  // over all runs, rejected ones included
};

struct WeightedSample {
  double weight = 0.0;
  std::uint64_t trace_seed = 0;
};

struct LowerBoundResult {
  double bound = 0.0;
  double confidence = 0.0;  // 1 - delta
  std::size_t n = 0;
  double sample_mean = 0.0;
};

/// Nonnegative function of a finished trace, e.g. P(e|x) or h(x) P(e|x).
using TraceFunction = std::function<double(const Trace&)>;

/// log(G(x)/P(x)) - log P(e|x) for a completed trace, summed over the
/// per-event contributions in event order. May be +inf.
/// Throws StatusError for a rejected trace.
double one_run_free_energy(const Trace& t);

/// Runs n traces and averages the one-run free energy over accepted runs,
/// then subtracts ln A. Accepted means Completed; a +inf free energy on an
/// accepted run makes mean_fe +inf.
/// Throws NoAcceptedRunsError when nothing is accepted.
FreeEnergyEstimate estimate_free_energy(const ModelProgram& model, const GuideProgram& guide,
                                        std::size_t n, std::uint64_t base_seed,
                                        const SamplingOptions& options = {});

/// Aggregates per-run (status, free energy, events) records the way
/// estimate_free_energy does.
struct RunSummary {
  RunStatus status = RunStatus::Completed;
  double fe = 0.0;
  std::size_t events = 0;
};
FreeEnergyEstimate summarize_free_energy(std::span<const RunSummary> runs);

/// f(x) * P_G(x,y) / G(x,y). Zero for rejected traces and whenever the
/// numerator carries a -inf log; f is only evaluated when the ratio is
/// nonzero. Throws WeightError if f returns a negative or NaN value.
WeightedSample importance_weight(const Trace& t, const TraceFunction& f);

enum class BoundMethod {
  /// One-sided DKW band: with sorted x(1..n), x(0) = 0 and
  /// eps = sqrt(ln(1/delta)/(2n)),
  ///   bound = sum_i (x(i) - x(i-1)) * max(0, (n-i+1)/n - eps).
  Dkw,
  /// max(DKW at delta/2, x(1) * (delta/2)^(1/n)). The second term holds because
  /// all n draws exceed the q-quantile with probability (1-q)^n; it is close to
  /// x(1) when the weights are nearly constant, as under a near-perfect guide.
  DkwOrMinimum,
};

/// Lower confidence bound on the mean of a nonnegative variable.
/// Throws EmptyError for no samples, InvalidArgumentError for a delta outside
/// (0,1) or a negative or non-finite sample.
LowerBoundResult lower_confidence_bound(std::span<const double> samples, double delta,
                                        BoundMethod method = BoundMethod::Dkw);

/// Importance weights of n guided runs for the sum sum_x P(x) f(x).
std::vector<WeightedSample> sample_weights(const ModelProgram& model, const GuideProgram& guide,
                                           const TraceFunction& f, std::size_t n,
                                           std::uint64_t base_seed,
                                           const SamplingOptions& options = {});

/// Lower bound on P(e) = sum_x P(x) P(e|x) with f = exp(log_evidence).
LowerBoundResult evidence_lower_bound(const ModelProgram& model, const GuideProgram& guide,
                                      std::size_t n, double delta, std::uint64_t base_seed,
                                      const SamplingOptions& options = {},
                                      BoundMethod method = BoundMethod::DkwOrMinimum);

struct HypothesisEstimate {
  LowerBoundResult numerator;    // sum_x P(x) P(e|x) h(x), under guide_num
  LowerBoundResult denominator;  // sum_x P(x) P(e|x), under guide_den
  /// numerator.bound / denominator.bound. An estimate of E(h|e), not a bound.
  std::optional<double> ratio_of_bounds;
  /// sum w_i h_i / sum w_i over the denominator's runs.
  std::optional<double> self_normalized;
  /// Delta-method standard error of self_normalized.
  std::optional<double> self_normalized_std_error;
};

class UndefinedRatioError : public Error {
 public:
  explicit UndefinedRatioError(HypothesisEstimate partial)
      : Error("denominator lower bound is zero; ratio of bounds undefined"),
        partial_(std::move(partial)) {}
  const char* kind() const noexcept override { return "UndefinedRatioError"; }
  const HypothesisEstimate& partial() const noexcept { return partial_; }

 private:
  HypothesisEstimate partial_;
};

/// Estimates E(h|e) two ways. The numerator and denominator use independent
/// seed streams derived from base_seed. Throws UndefinedRatioError (carrying
/// the partial result) when the denominator bound is zero.
HypothesisEstimate hypothesis_estimate(const ModelProgram& model, const GuideProgram& guide_num,
                                       const GuideProgram& guide_den, std::size_t n, double delta,
                                       std::uint64_t base_seed,
                                       const SamplingOptions& options = {},
                                       BoundMethod method = BoundMethod::DkwOrMinimum);

/// Mean and standard error of the plain importance-sampling estimate.
struct MeanEstimate {
  double mean = 0.0;
  double std_error = 0.0;
};
MeanEstimate mean_and_std_error(std::span<const double> xs);

}  // namespace vpi
