#include "vpi/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "vpi/detail/parallel.hpp"

namespace vpi {

double one_run_free_energy(const Trace& t) {
  if (!t.completed()) {
    throw StatusError("one-run free energy needs a completed trace, got " +
                      std::string(to_string(t.status)));
  }
  return t.running_fe;
}

FreeEnergyEstimate summarize_free_energy(std::span<const RunSummary> runs) {
  FreeEnergyEstimate est;
  est.n_total = runs.size();
  double sum = 0.0;
  bool infinite = false;
  for (const auto& r : runs) {
    est.total_events += r.events;
    if (r.status != RunStatus::Completed) continue;
    ++est.n_accepted;
    if (std::isinf(r.fe)) {
      infinite = true;
    } else {
      sum += r.fe;
    }
  }
  if (est.n_accepted == 0) throw NoAcceptedRunsError(est.n_total);

  est.acceptance_rate = static_cast<double>(est.n_accepted) / static_cast<double>(est.n_total);
  if (infinite) {
    est.mean_fe = kInf;
    est.std_error = kInf;
  } else {
    est.mean_fe = sum / static_cast<double>(est.n_accepted);
    if (est.n_accepted > 1) {
      double ss = 0.0;
      for (const auto& r : runs) {
        if (r.status != RunStatus::Completed) continue;
        const double d = r.fe - est.mean_fe;
        ss += d * d;
      }
      const double var = ss / static_cast<double>(est.n_accepted - 1);
      // Delta-method variance of -ln A added to that of the accepted mean.
      const double a = est.acceptance_rate;
      est.std_error = std::sqrt(var / static_cast<double>(est.n_accepted) +
                                (1.0 - a) / (static_cast<double>(est.n_total) * a));
    } else {
      est.std_error = kInf;
    }
  }
  est.adjusted_fe = est.mean_fe - std::log(est.acceptance_rate);
  return est;
}

FreeEnergyEstimate estimate_free_energy(const ModelProgram& model, const GuideProgram& guide,
                                        std::size_t n, std::uint64_t base_seed,
                                        const SamplingOptions& options) {
  if (n == 0) throw InvalidArgumentError("estimate_free_energy needs n >= 1");
  auto runs = detail::parallel_map(n, options.workers, [&](std::size_t i) {
    Trace t = run_trace(model, guide, derive_seed(base_seed, i), options.run);
    return RunSummary{t.status, t.completed() ? one_run_free_energy(t) : 0.0, t.events};
  });
  return summarize_free_energy(runs);
}

WeightedSample importance_weight(const Trace& t, const TraceFunction& f) {
  WeightedSample s{0.0, t.seed};
  if (!t.completed()) return s;
  const LogProb log_num = t.log_prior() + t.extra_log_conditional();
  if (log_num == kLogZero) return s;
  const LogProb log_den = t.log_guide() + t.extra_log_guide();
  const double ratio = std::exp(log_num - log_den);
  if (ratio == 0.0) return s;
  const double fx = f(t);
  if (std::isnan(fx) || fx < 0.0) {
    throw WeightError("trace function returned " + std::to_string(fx) + "; must be >= 0");
  }
  s.weight = fx == 0.0 ? 0.0 : fx * ratio;
  return s;
}

LowerBoundResult lower_confidence_bound(std::span<const double> samples, double delta,
                                        BoundMethod method) {
  if (samples.empty()) throw EmptyError("lower_confidence_bound needs at least one sample");
  if (!(delta > 0.0 && delta < 1.0)) {
    throw InvalidArgumentError("delta must lie in (0, 1)");
  }
  std::vector<double> xs(samples.begin(), samples.end());
  for (double x : xs) {
    if (!std::isfinite(x) || x < 0.0) {
      throw InvalidArgumentError("samples must be finite and >= 0");
    }
  }
  std::sort(xs.begin(), xs.end());

  const auto n = static_cast<double>(xs.size());
  const double band_delta = method == BoundMethod::Dkw ? delta : delta / 2.0;
  const double eps = std::sqrt(std::log(1.0 / band_delta) / (2.0 * n));
  double bound = 0.0;
  double prev = 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    // Mass of the empirical survival function at x(i+1), lowered by eps.
    const double tail = (n - static_cast<double>(i)) / n - eps;
    if (tail > 0.0) bound += (xs[i] - prev) * tail;
    prev = xs[i];
    sum += xs[i];
  }

  LowerBoundResult r;
  r.n = xs.size();
  r.confidence = 1.0 - delta;
  r.sample_mean = sum / n;
  if (method == BoundMethod::DkwOrMinimum) {
    bound = std::max(bound, xs.front() * std::pow(delta / 2.0, 1.0 / n));
  }
  r.bound = std::min(bound, r.sample_mean);
  return r;
}

std::vector<WeightedSample> sample_weights(const ModelProgram& model, const GuideProgram& guide,
                                           const TraceFunction& f, std::size_t n,
                                           std::uint64_t base_seed,
                                           const SamplingOptions& options) {
  if (n == 0) throw InvalidArgumentError("sample_weights needs n >= 1");
  return detail::parallel_map(n, options.workers, [&](std::size_t i) {
    Trace t = run_trace(model, guide, derive_seed(base_seed, i), options.run);
    return importance_weight(t, f);
  });
}

namespace {

double evidence_of(const Trace& t) { return std::exp(t.log_evidence); }

std::vector<double> weights_only(const std::vector<WeightedSample>& ws) {
  std::vector<double> out;
  out.reserve(ws.size());
  for (const auto& w : ws) out.push_back(w.weight);
  return out;
}

}  // namespace

LowerBoundResult evidence_lower_bound(const ModelProgram& model, const GuideProgram& guide,
                                      std::size_t n, double delta, std::uint64_t base_seed,
                                      const SamplingOptions& options, BoundMethod method) {
  auto ws = sample_weights(model, guide, evidence_of, n, base_seed, options);
  return lower_confidence_bound(weights_only(ws), delta, method);
}

HypothesisEstimate hypothesis_estimate(const ModelProgram& model, const GuideProgram& guide_num,
                                       const GuideProgram& guide_den, std::size_t n, double delta,
                                       std::uint64_t base_seed, const SamplingOptions& options,
                                       BoundMethod method) {
  if (n == 0) throw InvalidArgumentError("hypothesis_estimate needs n >= 1");
  const std::uint64_t num_seed = derive_seed(base_seed, 0);
  const std::uint64_t den_seed = derive_seed(base_seed, 1);

  auto numerator = sample_weights(
      model, guide_num, [](const Trace& t) { return t.hypothesis * std::exp(t.log_evidence); }, n,
      num_seed, options);

  struct DenRun {
    double weight = 0.0;
    double h = 0.0;
  };
  auto den_runs = detail::parallel_map(n, options.workers, [&](std::size_t i) {
    Trace t = run_trace(model, guide_den, derive_seed(den_seed, i), options.run);
    return DenRun{importance_weight(t, evidence_of).weight, t.hypothesis};
  });

  HypothesisEstimate est;
  est.numerator = lower_confidence_bound(weights_only(numerator), delta, method);
  std::vector<double> den_weights;
  den_weights.reserve(n);
  double sw = 0.0;
  double swh = 0.0;
  for (const auto& r : den_runs) {
    den_weights.push_back(r.weight);
    sw += r.weight;
    swh += r.weight * r.h;
  }
  est.denominator = lower_confidence_bound(den_weights, delta, method);

  if (sw > 0.0) {
    const double mu = swh / sw;
    double ss = 0.0;
    for (const auto& r : den_runs) {
      const double d = r.weight * (r.h - mu);
      ss += d * d;
    }
    est.self_normalized = mu;
    est.self_normalized_std_error = std::sqrt(ss) / sw;
  }
  if (est.denominator.bound > 0.0) {
    est.ratio_of_bounds = est.numerator.bound / est.denominator.bound;
  } else {
    throw UndefinedRatioError(est);
  }
  return est;
}

MeanEstimate mean_and_std_error(std::span<const double> xs) {
  if (xs.empty()) throw EmptyError("mean_and_std_error needs at least one value");
  const auto n = static_cast<double>(xs.size());
  double sum = 0.0;
  for (double x : xs) sum += x;
  MeanEstimate m;
  m.mean = sum / n;
  if (xs.size() < 2) {
    m.std_error = kInf;
    return m;
  }
  double ss = 0.0;
  for (double x : xs) ss += (x - m.mean) * (x - m.mean);
  m.std_error = std::sqrt(ss / (n - 1.0) / n);
  return m;
}

}  // namespace vpi
