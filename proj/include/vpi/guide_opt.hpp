#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vpi/estimators.hpp"
#include "vpi/oracle.hpp"
#include "vpi/trace.hpp"

namespace vpi {

/// Table-cell key -> logit vector, aligned with the prior support at the
/// sites mapped to that cell. Also the on-disk guide parameter format.
using GuideParams = std::map<std::string, std::vector<double>>;

struct CellSpec {
  std::string key;
  std::size_t arity = 0;
};

enum class FamilyKind {
  /// mixing * prior + (1 - mixing) * softmax(log prior + logits)
  Softmax,
  /// Point mass on argmax(log prior + logits); ties go to the first atom.
  PointMass,
};

/// Parameterized guide family: sites are mapped to table cells, each cell
/// holds one logit per prior atom.
struct GuideFamily {
  /// Cell key for a site, or nullopt to leave the site to `pinned`/prior.
  std::function<std::optional<std::string>(const ChoiceSite&)> site_key;
  std::vector<CellSpec> cells;
  FamilyKind kind = FamilyKind::Softmax;
  double mixing = 0.01;
  std::optional<double> ceiling;
  /// Non-parameterized structure; consulted before the table.
  std::function<std::optional<Dist>(const ChoiceSite&)> pinned;

  /// All-zero logits: the guide equals the prior (up to point-mass ties).
  GuideParams initial_params() const;
  GuideProgram instantiate(const GuideParams& params) const;
};

/// U(G) = F(G') + k * (events per accepted run).
struct UtilityConfig {
  double k = 0.0;
};

struct UtilityEstimate {
  double utility = kInf;
  /// Delta-method standard error; +inf with fewer than two accepted runs.
  double std_error = kInf;
};

/// Sampled utility of a guide program with its standard error.
UtilityEstimate estimate_utility(const ModelProgram& model, const GuideProgram& guide,
                                 const UtilityConfig& cfg, std::size_t n, std::uint64_t seed,
                                 const SamplingOptions& options = {});

/// Sampled utility; +inf when no run is accepted.
double guide_utility(const ModelProgram& model, const GuideFamily& family,
                     const GuideParams& params, const UtilityConfig& cfg, std::size_t n,
                     std::uint64_t seed, const SamplingOptions& options = {});

/// Utility of a guide program (no family needed); +inf when nothing is accepted.
double guide_program_utility(const ModelProgram& model, const GuideProgram& guide,
                             const UtilityConfig& cfg, std::size_t n, std::uint64_t seed,
                             const SamplingOptions& options = {});

/// Exact utility from the enumeration oracle; +inf when nothing is accepted.
double exact_guide_utility(const PathEnumeration& pe, const GuideProgram& guide,
                           const UtilityConfig& cfg);

struct SearchOptions {
  /// Runs per utility evaluation; candidates within an epoch see the same seeds.
  std::size_t n_per_eval = 1000;
  /// Evaluations per epoch (0: one seed set for the whole walk). A new epoch
  /// draws a fresh seed set and re-evaluates the incumbent on it. Only such
  /// fresh evaluations, plus the start points and a final re-measurement of
  /// the end point, count towards best_utility, so the search cannot win by
  /// fitting one seed set.
  std::size_t epoch_length = 0;
  /// Fresh evaluations are ranked by utility + selection_z * std_error, so a
  /// lucky estimate from a handful of accepted runs does not become the best.
  double selection_z = 2.0;
  /// Initial std-dev of the Gaussian perturbation; adapted by the
  /// one-fifth success rule within [sigma/100, 4 sigma].
  double sigma = 1.0;
  /// Perturb a single logit of the chosen cell instead of all of them.
  bool coordinate_moves = true;
  /// Restart from a randomized point after this many non-improving steps.
  std::size_t restart_after = 400;
  SamplingOptions sampling;
};

struct SearchReport {
  GuideParams best_params;
  /// Utility of best_params measured on a seed set it was not selected on.
  double best_utility = kInf;
  double best_std_error = kInf;
  /// best_utility + selection_z * best_std_error, the ranking score.
  double best_score = kInf;
  /// Where the walk ended.
  GuideParams final_params;
  /// (evaluation index, best-so-far score); non-increasing.
  std::vector<std::pair<std::size_t, double>> utility_trace;
  std::size_t evaluations = 0;
  std::size_t restarts = 0;
  /// Mean per-run free-energy contribution of the sites mapped to each cell,
  /// under the best guide and over accepted runs.
  std::map<std::string, double> cell_credit;
};

/// Stochastic hill climbing with restarts over the family's logits, using
/// common random numbers. `budget` counts utility evaluations.
SearchReport optimize_guide(const ModelProgram& model, const GuideFamily& family,
                            const UtilityConfig& cfg, std::size_t budget, std::uint64_t seed,
                            const SearchOptions& options = {});

/// Mean free-energy contribution per cell over the accepted runs.
std::map<std::string, double> cell_credit(const ModelProgram& model, const GuideFamily& family,
                                          const GuideParams& params, std::size_t n,
                                          std::uint64_t seed);

}  // namespace vpi
