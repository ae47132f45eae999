#include <doctest.h>

#include <cmath>
#include <set>

#include "helpers.hpp"
#include "vpi/error.hpp"
#include "vpi/estimators.hpp"
#include "vpi/models.hpp"
#include "vpi/oracle.hpp"

using namespace vpi;
using vpi::testing::kDiceEvidence;
using vpi::testing::kDiceFe;

namespace {

double total_mass(const PathEnumeration& pe) {
  double s = 0.0;
  for (const auto& e : pe.entries) s += std::exp(e.log_prior);
  return s;
}

GuideParams random_params(const GuideFamily& fam, std::uint64_t seed, double scale) {
  Rng r(seed);
  auto p = fam.initial_params();
  for (auto& [key, logits] : p)
    for (auto& x : logits) x = scale * r.normal();
  return p;
}

}  // namespace

TEST_SUITE("oracle") {

TEST_CASE("enumerate_paths") {
  auto pe = enumerate_paths(models::three_dice, 1000, 100);
  REQUIRE(pe.entries.size() == 216);
  for (const auto& e : pe.entries) CHECK(e.log_prior == doctest::Approx(-3 * std::log(6.0)));
  CHECK(total_mass(pe) == doctest::Approx(1.0).epsilon(1e-9));
  std::set<std::vector<Value>> seen;
  for (std::size_t i = 0; i < pe.entries.size(); ++i) {
    seen.insert(pe.entries[i].choices);
    if (i > 0) CHECK(pe.entries[i - 1].choices < pe.entries[i].choices);
  }
  CHECK(seen.size() == 216);

  ModelProgram empty = [](Context&) {};
  auto one = enumerate_paths(empty, 10, 10);
  REQUIRE(one.entries.size() == 1);
  CHECK(one.entries[0].log_prior == 0.0);

  auto expr = enumerate_paths(models::expr_induction_model(2), 100000, 10000);
  CHECK(expr.entries.size() == 253);
  CHECK(total_mass(expr) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("enumeration errors") {
  CHECK_THROWS_AS(enumerate_paths(models::three_dice, 100, 100), EnumerationCapError);
  CHECK_THROWS_AS(enumerate_paths(models::three_dice, 1000, 3), EnumerationCapError);
  ModelProgram crash = [](Context& ctx) {
    if (ctx.choose(uniform_range(0, 2)).as_int() == 2) throw std::runtime_error("boom");
  };
  CHECK_THROWS_AS(enumerate_paths(crash, 100, 100), ModelCrashError);
}

TEST_CASE("exact_evidence and exact_conditional_expectation") {
  auto pe = enumerate_paths(models::three_dice, 1000, 100);
  CHECK(std::abs(exact_evidence(pe) - kDiceEvidence) <= 1e-12);
  CHECK(std::abs(exact_conditional_expectation(pe) - 1.0 / 15) <= 1e-12);

  ModelProgram never = [](Context& ctx) {
    ctx.choose(uniform_range(0, 2));
    ctx.evidence(false);
  };
  auto pn = enumerate_paths(never, 10, 10);
  CHECK(exact_evidence(pn) == 0.0);
  CHECK_THROWS_AS(exact_conditional_expectation(pn), ConditioningOnNullError);

  ModelProgram free = [](Context& ctx) {
    ctx.choose(uniform_range(0, 2));
    ctx.set_hypothesis(0.4);
  };
  auto pf = enumerate_paths(free, 10, 10);
  CHECK(exact_evidence(pf) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(exact_conditional_expectation(pf) == doctest::Approx(0.4).epsilon(1e-15));

  auto expr = enumerate_paths(models::expr_induction_model(2), 100000, 10000);
  CHECK(exact_evidence(expr) == doctest::Approx(1.0 / 20).epsilon(1e-12));
  CHECK(exact_conditional_expectation(expr) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("die1 posterior") {
  auto pe = enumerate_paths(models::three_dice, 1000, 100);
  std::vector<double> post(7, 0.0);
  for (const auto& e : pe.entries)
    post[static_cast<std::size_t>(e.choices[0].as_int())] += std::exp(e.log_prior + e.log_evidence);
  const double z = exact_evidence(pe);
  const double expected[] = {0, 1.0 / 3, 4.0 / 15, 1.0 / 5, 2.0 / 15, 1.0 / 15, 0.0};
  for (int v = 1; v <= 6; ++v) CHECK(post[v] / z == doctest::Approx(expected[v]).epsilon(1e-12));
}

TEST_CASE("exact_free_energy") {
  auto pe = enumerate_paths(models::three_dice, 1000, 100);
  auto perfect = exact_free_energy(pe, models::dice_perfect_guide());
  CHECK(perfect.free_energy == doctest::Approx(kDiceFe).epsilon(1e-12));
  CHECK(std::abs(perfect.kl) <= 1e-12);
  CHECK(perfect.acceptance_rate == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(perfect.expected_events == doctest::Approx(4.0));

  auto prior = exact_free_energy(pe, GuideProgram::prior());
  CHECK(prior.kl > 0.0);
  CHECK(prior.free_energy - kDiceFe == prior.kl);

  auto rejecting = exact_free_energy(pe, GuideProgram::prior(500.0));
  CHECK(rejecting.acceptance_rate == doctest::Approx(kDiceEvidence).epsilon(1e-12));
  CHECK(rejecting.free_energy == doctest::Approx(kDiceFe).epsilon(1e-12));

  ModelProgram plain = [](Context& ctx) { ctx.choose(uniform_range(1, 4)); };
  auto pp = enumerate_paths(plain, 10, 10);
  auto z = exact_free_energy(pp, GuideProgram::prior());
  CHECK(z.free_energy == 0.0);
  CHECK(z.kl == 0.0);

  GuideProgram leaky;
  leaky.propose = [](const ChoiceSite&, GuideContext&) -> std::optional<Dist> {
    return Dist::from_weights({{Value(1), 1.0}, {Value(9), 1.0}});
  };
  CHECK(exact_free_energy(pp, leaky).free_energy == kInf);
  leaky.ceiling = 100.0;
  auto capped = exact_free_energy(pp, leaky);
  CHECK(capped.acceptance_rate == doctest::Approx(0.5));
  CHECK(capped.free_energy == doctest::Approx(2 * std::log(2.0)).epsilon(1e-12));

  const models::MonkeyConfig cfg;
  ModelProgram small = [](Context& ctx) { ctx.choose(uniform_range(0, 1)); };
  auto ps = enumerate_paths(small, 10, 10);
  CHECK_THROWS_AS(exact_free_energy(ps, models::monkey_position_guide(cfg)), UnsupportedGuideError);
}

TEST_CASE("free-energy floor and kl >= 0") {
  auto pe = enumerate_paths(models::three_dice, 1000, 100);
  const auto fam = models::dice_family();
  for (std::uint64_t s = 0; s < 20; ++s) {
    auto ex = exact_free_energy(pe, fam.instantiate(random_params(fam, s, 1.5)));
    CHECK(ex.kl >= -1e-12);
    CHECK(ex.free_energy >= kDiceFe - 1e-9);
    CHECK(ex.free_energy > kDiceFe + 1e-9);
  }
  for (std::uint64_t m = 0; m < 20; ++m) {
    vpi::testing::RandomModel model{m};
    auto rpe = enumerate_paths(model, 100000, 100);
    auto ex = exact_free_energy(rpe, vpi::testing::random_guide(m));
    CHECK(ex.kl >= -1e-12);
    CHECK(ex.free_energy >= -std::log(exact_evidence(rpe)) - 1e-9);
  }
}

TEST_CASE("sampling consistency") {
  auto pe = enumerate_paths(models::three_dice, 1000, 100);
  const auto fam = models::dice_family();
  for (std::uint64_t s = 0; s < 4; ++s) {
    const auto g = fam.instantiate(random_params(fam, s + 50, 1.0));
    const auto ex = exact_free_energy(pe, g);
    const auto est = estimate_free_energy(models::three_dice, g, 20000, s);
    CHECK(std::abs(est.adjusted_fe - ex.free_energy) <= 3 * est.std_error);
  }
}

}  // TEST_SUITE
