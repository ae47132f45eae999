#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vpi/guide_opt.hpp"
#include "vpi/trace.hpp"

namespace vpi::models {

// ---------------------------------------------------------------------------
// Three dice summing to seven.

/// die1..die3 ~ uniform(1..6); *h* := (die1 == 5); evidence(sum == 7).
void three_dice(Context& ctx);

/// The hand-written perfect guide: die1 from its posterior
/// {1:1/3, 2:4/15, 3:1/5, 4:2/15, 5:1/15}, die2 ~ uniform(1..6-die1),
/// die3 forced to 7 - die1 - die2.
GuideProgram dice_perfect_guide();

/// Perfect guide for the numerator sum with h = (die1 == 5): the only
/// contributing path is (5, 1, 1).
GuideProgram dice_hypothesis_guide();

/// Tabular family keyed on the site: "die1" for the first die,
/// "die2|die1=<v>" for the second; the third die is pinned to 7 - die1 - die2
/// whenever that is a face.
GuideFamily dice_family(FamilyKind kind = FamilyKind::Softmax, double mixing = 0.01,
                        std::optional<double> ceiling = 500.0);

// ---------------------------------------------------------------------------
// Monkey at a typewriter: a pattern must occur in a random string.

struct MonkeyConfig {
  int alphabet = 2;
  int length = 12;
  /// Letter codes in [0, alphabet).
  std::vector<std::int64_t> pattern{0, 1, 0};
};

/// Parses letters 'a', 'b', ... into codes; throws InvalidArgumentError.
std::vector<std::int64_t> parse_pattern(std::string_view text, int alphabet);
std::string format_pattern(std::span<const std::int64_t> pattern);

ModelProgram monkey_model(const MonkeyConfig& cfg);

/// Leftmost start of `pattern` in `text`, if any.
std::optional<std::int64_t> first_occurrence(std::span<const Value> text,
                                             std::span<const std::int64_t> pattern);

/// Extra-choice guide: picks a start position y uniformly, forces the pattern
/// there and leaves the other characters to the prior. The model extension
/// P_G(y | x) is a point mass on the first occurrence in x.
GuideProgram monkey_position_guide(const MonkeyConfig& cfg);

/// P(pattern occurs) by dynamic programming over the KMP automaton.
double monkey_exact_evidence(const MonkeyConfig& cfg);

/// Number of strings containing the pattern, by the same automaton in exact
/// integer arithmetic. nullopt when alphabet^length overflows 64 bits.
std::optional<std::uint64_t> monkey_count_with_pattern(const MonkeyConfig& cfg);

/// Tabular family with one cell per character position ("pos<i>").
GuideFamily monkey_family(const MonkeyConfig& cfg, double mixing = 0.01,
                          std::optional<double> ceiling = 500.0);

// ---------------------------------------------------------------------------
// Function induction from f(3) = 9, f(4) = 16 with a random expression
// generator.

struct Expr {
  enum class Kind { Var, Const, Add, Mul };
  Kind kind = Kind::Var;
  std::int64_t value = 0;
  std::unique_ptr<Expr> left;
  std::unique_ptr<Expr> right;

  std::int64_t eval(std::int64_t x) const;
  std::string to_string() const;
  int depth() const;
};

/// Production prior below the depth cap.
Dist production_prior();
/// Prior at the depth cap: Var/Const renormalized.
Dist terminal_prior();

/// Generates an expression top-down. Sites are labelled "prod@<path>" and
/// "const@<path>", where <path> is "r" followed by L/R steps.
std::unique_ptr<Expr> generate_expr(Context& ctx, int depth_cap);

/// evidence(f(3) == 9); evidence(f(4) == 16); *h* := (f(5) == 25); prints f(5).
ModelProgram expr_induction_model(int depth_cap);

/// One cell per site label reachable under the depth cap.
GuideFamily expr_family(int depth_cap, double mixing = 0.01,
                        std::optional<double> ceiling = 500.0);

}  // namespace vpi::models
