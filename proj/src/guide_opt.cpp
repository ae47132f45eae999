#include "vpi/guide_opt.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "vpi/error.hpp"

namespace vpi {

GuideParams GuideFamily::initial_params() const {
  GuideParams p;
  for (const auto& c : cells) p[c.key] = std::vector<double>(c.arity, 0.0);
  return p;
}

namespace {

Dist table_dist(const Dist& prior, const std::vector<double>& logits, FamilyKind kind,
                double mixing) {
  const auto atoms = prior.atoms();
  std::vector<double> scores(atoms.size());
  for (std::size_t j = 0; j < atoms.size(); ++j) scores[j] = std::log(atoms[j].mass) + logits[j];

  if (kind == FamilyKind::PointMass) {
    const auto best = std::max_element(scores.begin(), scores.end()) - scores.begin();
    return Dist::point(atoms[static_cast<std::size_t>(best)].value);
  }

  const double top = *std::max_element(scores.begin(), scores.end());
  double z = 0.0;
  for (double& s : scores) {
    s = std::exp(s - top);
    z += s;
  }
  std::vector<std::pair<Value, double>> pairs;
  pairs.reserve(atoms.size());
  for (std::size_t j = 0; j < atoms.size(); ++j) {
    pairs.emplace_back(atoms[j].value, mixing * atoms[j].mass + (1.0 - mixing) * scores[j] / z);
  }
  return Dist::from_weights(pairs);
}

}  // namespace

GuideProgram GuideFamily::instantiate(const GuideParams& params) const {
  auto shared = std::make_shared<const GuideParams>(params);
  GuideProgram g;
  g.ceiling = ceiling;
  g.propose = [family = *this, shared](const ChoiceSite& site,
                                       GuideContext&) -> std::optional<Dist> {
    if (family.pinned) {
      if (auto d = family.pinned(site)) return d;
    }
    if (!family.site_key) return std::nullopt;
    auto key = family.site_key(site);
    if (!key) return std::nullopt;
    auto it = shared->find(*key);
    if (it == shared->end() || it->second.size() != site.prior.size()) return std::nullopt;
    return table_dist(site.prior, it->second, family.kind, family.mixing);
  };
  return g;
}

UtilityEstimate estimate_utility(const ModelProgram& model, const GuideProgram& guide,
                                 const UtilityConfig& cfg, std::size_t n, std::uint64_t seed,
                                 const SamplingOptions& options) {
  if (cfg.k < 0.0) throw InvalidArgumentError("impatience k must be >= 0");
  try {
    const auto est = estimate_free_energy(model, guide, n, seed, options);
    if (cfg.k == 0.0) return {est.adjusted_fe, est.std_error};
    const double cost = static_cast<double>(est.total_events) / static_cast<double>(est.n_accepted);
    const double a = est.acceptance_rate;
    // Relative error of 1/A carries over to the cost term.
    const double cost_se = cfg.k * cost * std::sqrt((1.0 - a) / (static_cast<double>(n) * a));
    return {est.adjusted_fe + cfg.k * cost, std::hypot(est.std_error, cost_se)};
  } catch (const NoAcceptedRunsError&) {
    return {};
  }
}

double guide_program_utility(const ModelProgram& model, const GuideProgram& guide,
                             const UtilityConfig& cfg, std::size_t n, std::uint64_t seed,
                             const SamplingOptions& options) {
  return estimate_utility(model, guide, cfg, n, seed, options).utility;
}

double guide_utility(const ModelProgram& model, const GuideFamily& family,
                     const GuideParams& params, const UtilityConfig& cfg, std::size_t n,
                     std::uint64_t seed, const SamplingOptions& options) {
  return guide_program_utility(model, family.instantiate(params), cfg, n, seed, options);
}

double exact_guide_utility(const PathEnumeration& pe, const GuideProgram& guide,
                           const UtilityConfig& cfg) {
  try {
    const auto ex = exact_free_energy(pe, guide);
    const double cost = ex.expected_events / ex.acceptance_rate;
    return cfg.k == 0.0 ? ex.free_energy : ex.free_energy + cfg.k * cost;
  } catch (const NoAcceptedRunsError&) {
    return kInf;
  }
}

SearchReport optimize_guide(const ModelProgram& model, const GuideFamily& family,
                            const UtilityConfig& cfg, std::size_t budget, std::uint64_t seed,
                            const SearchOptions& options) {
  if (budget == 0) throw InvalidArgumentError("optimize_guide needs budget >= 1");
  Rng moves(derive_seed(seed, 1));
  std::size_t epoch = 0;
  auto score = [&](const UtilityEstimate& u) {
    return u.utility + options.selection_z * u.std_error;
  };
  auto evaluate = [&](const GuideParams& p) {
    return estimate_utility(model, family.instantiate(p), cfg, options.n_per_eval,
                            derive_seed(seed, 2 + epoch), options.sampling);
  };

  SearchReport report;
  // Only evaluations on a seed set the params were not chosen on come here.
  auto fresh = [&](const GuideParams& p, const UtilityEstimate& u) {
    const double s = score(u);
    if (s < report.best_score || report.evaluations == 1) {
      report.best_score = s;
      report.best_utility = u.utility;
      report.best_std_error = u.std_error;
      report.best_params = p;
    }
  };

  GuideParams current = family.initial_params();
  UtilityEstimate first = evaluate(current);
  double current_u = score(first);
  report.evaluations = 1;
  fresh(current, first);
  report.utility_trace.emplace_back(0, report.best_score);

  // Step size follows the one-fifth success rule.
  double sigma = options.sigma;
  const double sigma_min = options.sigma * 1e-2;
  const double sigma_max = options.sigma * 4.0;
  std::size_t stale = 0;
  std::size_t in_epoch = 1;
  while (report.evaluations < budget && !family.cells.empty()) {
    ++report.evaluations;
    // The last evaluation always re-measures the walk's end point on fresh seeds.
    const bool new_epoch = options.epoch_length > 0 && in_epoch >= options.epoch_length;
    if (new_epoch || report.evaluations == budget) {
      ++epoch;
      in_epoch = 0;
      const auto u = evaluate(current);
      current_u = score(u);
      fresh(current, u);
    } else if (stale >= options.restart_after) {
      GuideParams candidate = family.initial_params();
      for (auto& [key, logits] : candidate) {
        for (double& x : logits) x = options.sigma * moves.normal();
      }
      ++report.restarts;
      stale = 0;
      sigma = options.sigma;
      current = std::move(candidate);
      const auto u = evaluate(current);
      current_u = score(u);
      fresh(current, u);
    } else {
      GuideParams candidate = current;
      const auto& cell = family.cells[moves.below(family.cells.size())];
      auto& logits = candidate[cell.key];
      if (options.coordinate_moves) {
        logits[moves.below(logits.size())] += sigma * moves.normal();
      } else {
        for (double& x : logits) x += sigma * moves.normal();
      }
      const double u = score(evaluate(candidate));
      const bool improved = u < current_u;
      // Ties are accepted so the walk can cross flat (e.g. all-rejected) regions.
      if (u <= current_u) {
        stale = improved ? 0 : stale + 1;
        current = std::move(candidate);
        current_u = u;
      } else {
        ++stale;
      }
      sigma = std::clamp(sigma * (improved ? 1.5 : std::pow(1.5, -0.25)),
                         sigma_min, sigma_max);
    }
    ++in_epoch;
    report.utility_trace.emplace_back(report.evaluations - 1, report.best_score);
  }

  report.final_params = current;
  report.cell_credit =
      cell_credit(model, family, report.best_params, options.n_per_eval, derive_seed(seed, 0));
  return report;
}

std::map<std::string, double> cell_credit(const ModelProgram& model, const GuideFamily& family,
                                          const GuideParams& params, std::size_t n,
                                          std::uint64_t seed) {
  const GuideProgram guide = family.instantiate(params);
  std::map<std::string, double> totals;
  std::size_t accepted = 0;
  for (std::size_t i = 0; i < n; ++i) {
    Trace t = run_trace(model, guide, derive_seed(seed, i));
    if (!t.completed()) continue;
    ++accepted;
    const std::vector<Value> values = t.chosen_values();
    const std::vector<Value> all_extras = t.extra_values();
    for (const auto& ev : t.per_event_fe) {
      if (ev.kind == EventKind::Evidence) {
        totals["<evidence>"] += ev.contribution;
        continue;
      }
      const auto& rec = t.choices[ev.ordinal];
      std::size_t n_extras = 0;
      while (n_extras < t.extras.size() && t.extras[n_extras].after_choice <= rec.index) ++n_extras;
      std::span<const Value> prefix(values.data(), rec.index);
      std::span<const Value> extras(all_extras.data(), n_extras);
      ChoiceSite site{rec.index, rec.label, rec.prior, prefix, extras};
      std::optional<std::string> key = family.site_key ? family.site_key(site) : std::nullopt;
      if (family.pinned && family.pinned(site)) key = "<pinned>";
      totals[key.value_or("<prior>")] += ev.contribution;
    }
  }
  if (accepted > 0) {
    for (auto& [key, v] : totals) v /= static_cast<double>(accepted);
  }
  return totals;
}

}  // namespace vpi
