#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "helpers.hpp"
#include "vpi/error.hpp"
#include "vpi/estimators.hpp"
#include "vpi/models.hpp"
#include "vpi/oracle.hpp"

using namespace vpi;
using vpi::testing::kDiceEvidence;
using vpi::testing::kDiceFe;

namespace {
double evidence_of(const Trace& t) { return std::exp(t.log_evidence); }
}  // namespace

TEST_SUITE("estimators") {

TEST_CASE("one_run_free_energy") {
  const auto guide = models::dice_perfect_guide();
  for (std::uint64_t s = 0; s < 100; ++s) {
    auto t = run_trace(models::three_dice, guide, s);
    CHECK(one_run_free_energy(t) == doctest::Approx(2.667228).epsilon(1e-6));
    CHECK(std::abs(one_run_free_energy(t) - kDiceFe) < 1e-12);
  }
  ModelProgram plain = [](Context& ctx) { ctx.choose(uniform_range(1, 3)); };
  CHECK(one_run_free_energy(run_trace(plain, GuideProgram::prior(), 0)) == 0.0);
  ModelProgram quarter = [](Context& ctx) {
    ctx.choose(uniform_range(1, 3));
    ctx.evidence(0.25);
  };
  CHECK(one_run_free_energy(run_trace(quarter, GuideProgram::prior(), 0)) ==
        doctest::Approx(std::log(4.0)));

  auto rejected = run_trace(models::three_dice, GuideProgram::prior(1.0), 0);
  REQUIRE_FALSE(rejected.completed());
  CHECK_THROWS_AS(one_run_free_energy(rejected), StatusError);
}

TEST_CASE("estimate_free_energy") {
  SUBCASE("perfect guide") {
    auto e = estimate_free_energy(models::three_dice, models::dice_perfect_guide(), 1000, 7);
    CHECK(e.adjusted_fe == doctest::Approx(kDiceFe).epsilon(1e-12));
    CHECK(e.std_error <= 1e-12);
    CHECK(e.acceptance_rate == 1.0);
    CHECK(e.n_total == 1000);
    CHECK(e.n_accepted == 1000);
  }
  SUBCASE("prior with rejection") {
    auto e = estimate_free_energy(models::three_dice, GuideProgram::prior(500.0), 10000, 11);
    CHECK(e.mean_fe == 0.0);
    const double sigma = std::sqrt(kDiceEvidence * (1 - kDiceEvidence) / 10000.0);
    CHECK(std::abs(e.acceptance_rate - kDiceEvidence) <= 3 * sigma);
    CHECK(std::abs(e.adjusted_fe - kDiceFe) <= 3 * e.std_error);
    CHECK(e.acceptance_rate == static_cast<double>(e.n_accepted) / static_cast<double>(e.n_total));
    CHECK(e.adjusted_fe == e.mean_fe - std::log(e.acceptance_rate));
  }
  SUBCASE("single run") {
    auto e = estimate_free_energy(models::three_dice, models::dice_perfect_guide(), 1, 3);
    auto t = run_trace(models::three_dice, models::dice_perfect_guide(), derive_seed(3, 0));
    CHECK(e.adjusted_fe == one_run_free_energy(t) - std::log(1.0));
    CHECK(e.std_error == kInf);
  }
  SUBCASE("no ceiling: infinite fe propagates") {
    auto e = estimate_free_energy(models::three_dice, GuideProgram::prior(), 200, 1);
    CHECK(e.mean_fe == kInf);
    CHECK(e.adjusted_fe == kInf);
  }
  SUBCASE("nothing accepted") {
    ModelProgram never = [](Context& ctx) { ctx.evidence(false); };
    try {
      estimate_free_energy(never, GuideProgram::prior(10.0), 50, 1);
      FAIL("expected NoAcceptedRunsError");
    } catch (const NoAcceptedRunsError& e) {
      CHECK(e.n_total() == 50);
    }
  }
  SUBCASE("workers do not change the result") {
    SamplingOptions four;
    four.workers = 4;
    auto a = estimate_free_energy(models::three_dice, GuideProgram::prior(500.0), 5000, 2);
    auto b = estimate_free_energy(models::three_dice, GuideProgram::prior(500.0), 5000, 2, four);
    CHECK(a.adjusted_fe == b.adjusted_fe);
    CHECK(a.n_accepted == b.n_accepted);
    CHECK(a.total_events == b.total_events);
  }
}

TEST_CASE("importance_weight") {
  const auto guide = models::dice_perfect_guide();
  for (std::uint64_t s = 0; s < 100; ++s) {
    auto t = run_trace(models::three_dice, guide, s);
    CHECK(importance_weight(t, evidence_of).weight == doctest::Approx(15.0 / 216).epsilon(1e-12));
    CHECK(importance_weight(t, evidence_of).trace_seed == s);
  }
  double sum = 0.0;
  const int n = 20000;
  for (int s = 0; s < n; ++s) {
    auto t = run_trace(models::three_dice, GuideProgram::prior(), derive_seed(9, s));
    const double w = importance_weight(t, evidence_of).weight;
    CHECK((w == 0.0 || w == 1.0));
    sum += w;
  }
  const double sigma = std::sqrt(kDiceEvidence * (1 - kDiceEvidence) / n);
  CHECK(std::abs(sum / n - kDiceEvidence) <= 5 * sigma);

  auto rejected = run_trace(models::three_dice, GuideProgram::prior(1.0), 0);
  bool called = false;
  auto w = importance_weight(rejected, [&](const Trace&) {
    called = true;
    return 1.0;
  });
  CHECK(w.weight == 0.0);
  CHECK_FALSE(called);

  auto ok = run_trace(models::three_dice, guide, 0);
  CHECK_THROWS_AS(importance_weight(ok, [](const Trace&) { return -1.0; }), WeightError);
  CHECK_THROWS_AS(importance_weight(ok, [](const Trace&) { return NAN; }), WeightError);
}

TEST_CASE("lower_confidence_bound closed forms") {
  for (std::size_t n : {10u, 100u, 10000u}) {
    std::vector<double> xs(n, 2.5);
    const double eps = std::sqrt(std::log(1 / 0.05) / (2.0 * static_cast<double>(n)));
    auto r = lower_confidence_bound(xs, 0.05);
    CHECK(r.bound == doctest::Approx(2.5 * std::max(0.0, 1 - eps)).epsilon(1e-12));
    CHECK(r.sample_mean == doctest::Approx(2.5));
    CHECK(r.confidence == doctest::Approx(0.95));
    CHECK(r.n == n);
  }
  std::vector<double> one{3.0};
  CHECK(lower_confidence_bound(one, 0.05).bound == 0.0);

  std::vector<double> zeros(100, 0.0);
  CHECK(lower_confidence_bound(zeros, 0.05).bound == 0.0);

  std::vector<double> none;
  CHECK_THROWS_AS(lower_confidence_bound(none, 0.05), EmptyError);
  CHECK_THROWS_AS(lower_confidence_bound(one, 0.0), InvalidArgumentError);
  CHECK_THROWS_AS(lower_confidence_bound(one, 1.0), InvalidArgumentError);
  std::vector<double> negative{1.0, -1.0};
  CHECK_THROWS_AS(lower_confidence_bound(negative, 0.05), InvalidArgumentError);
}

TEST_CASE("lower_confidence_bound properties") {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.below(300);
    std::vector<double> xs(n);
    for (auto& x : xs) x = rng.uniform01() < 0.3 ? 0.0 : -std::log(1 - rng.uniform01()) * 4.0;
    const double delta = 0.01 + 0.5 * rng.uniform01();
    auto base = lower_confidence_bound(xs, delta);
    CHECK(base.bound <= base.sample_mean + 1e-12);
    CHECK(base.bound >= 0.0);

    const double c = 0.1 + 10 * rng.uniform01();
    std::vector<double> scaled(xs);
    for (auto& x : scaled) x *= c;
    CHECK(lower_confidence_bound(scaled, delta).bound ==
          doctest::Approx(c * base.bound).epsilon(1e-9));

    std::vector<double> bigger(xs);
    for (auto& x : bigger) x += rng.uniform01();
    CHECK(lower_confidence_bound(bigger, delta).bound >= base.bound - 1e-12);
  }
}

TEST_CASE("lower_confidence_bound coverage on Bernoulli(15/216)") {
  int violations = 0;
  const int trials = 1000;
  Rng rng(2024);
  std::vector<double> xs(10000);
  const double eps = std::sqrt(std::log(20.0) / 20000.0);
  for (int i = 0; i < trials; ++i) {
    for (auto& x : xs) x = rng.uniform01() < kDiceEvidence ? 1.0 : 0.0;
    const auto r = lower_confidence_bound(xs, 0.05);
    if (r.bound > kDiceEvidence) ++violations;
    // On 0/1 data the bound is the sample mean shifted down by eps.
    CHECK(r.bound == doctest::Approx(std::max(0.0, r.sample_mean - eps)).epsilon(1e-12));
  }
  CHECK(violations <= 0.05 * trials + 3 * std::sqrt(0.05 * 0.95 * trials));
}

TEST_CASE("lower_confidence_bound with the minimum term") {
  std::vector<double> xs(100, 2.0);
  auto r = lower_confidence_bound(xs, 0.05, BoundMethod::DkwOrMinimum);
  CHECK(r.bound == doctest::Approx(2.0 * std::pow(0.025, 0.01)).epsilon(1e-12));
  std::vector<double> mixed{0.0, 1.0, 1.0, 1.0};
  auto m = lower_confidence_bound(mixed, 0.05, BoundMethod::DkwOrMinimum);
  // Minimum is 0, so only the band at delta/2 contributes.
  CHECK(m.bound == doctest::Approx(0.75 - std::sqrt(std::log(40.0) / 8.0)).epsilon(1e-12));

  Rng rng(77);
  for (double delta : {0.05, 0.01}) {
    int violations = 0;
    const int trials = 1000;
    std::vector<double> ys(200);
    const double mean = 1.0 + 0.1 * 5.0 + 0.9 * 0.5;
    for (int t = 0; t < trials; ++t) {
      for (auto& y : ys) {
        y = 1.0 + (rng.uniform01() < 0.1 ? -std::log(1 - rng.uniform01()) * 5.0 : rng.uniform01());
      }
      auto b = lower_confidence_bound(ys, delta, BoundMethod::DkwOrMinimum);
      CHECK(b.bound <= b.sample_mean);
      if (b.bound > mean) ++violations;
    }
    CHECK(violations <= delta * trials + 3 * std::sqrt(delta * (1 - delta) * trials));
  }
}

TEST_CASE("evidence_lower_bound") {
  auto p = evidence_lower_bound(models::three_dice, models::dice_perfect_guide(), 100, 0.05, 7);
  CHECK(p.bound <= kDiceEvidence + 1e-15);
  CHECK(p.bound >= 0.95 * kDiceEvidence);

  // The plain DKW band alone gives P(e) * (1 - eps) with eps = 0.1224 at n = 100.
  auto d = evidence_lower_bound(models::three_dice, models::dice_perfect_guide(), 100, 0.05, 7, {},
                                BoundMethod::Dkw);
  CHECK(d.bound == doctest::Approx(kDiceEvidence * (1 - std::sqrt(std::log(20.0) / 200.0))));

  auto q = evidence_lower_bound(models::three_dice, GuideProgram::prior(), 100, 0.05, 7);
  CHECK(q.bound < p.bound);
  CHECK(q.bound <= kDiceEvidence);

  ModelProgram never = [](Context& ctx) {
    ctx.choose(uniform_range(0, 1));
    ctx.evidence(false);
  };
  CHECK(evidence_lower_bound(never, GuideProgram::prior(), 100, 0.05, 1).bound == 0.0);
}

TEST_CASE("hypothesis_estimate") {
  auto h = hypothesis_estimate(models::three_dice, models::dice_hypothesis_guide(),
                               models::dice_perfect_guide(), 10000, 0.05, 3);
  REQUIRE(h.ratio_of_bounds.has_value());
  REQUIRE(h.self_normalized.has_value());
  CHECK(*h.ratio_of_bounds == doctest::Approx(1.0 / 15).epsilon(0.01 * 15));
  CHECK(std::abs(*h.self_normalized - 1.0 / 15) <= 0.01);
  CHECK(h.numerator.bound <= 1.0 / 216 + 1e-15);

  ModelProgram ones = [](Context& ctx) {
    ctx.choose(uniform_range(0, 3));
    ctx.evidence(0.5);
  };
  auto one = hypothesis_estimate(ones, GuideProgram::prior(), GuideProgram::prior(), 500, 0.05, 1);
  CHECK(*one.self_normalized == 1.0);
  CHECK(one.numerator.bound == one.denominator.bound);

  ModelProgram zeros = [](Context& ctx) {
    ctx.choose(uniform_range(0, 3));
    ctx.set_hypothesis(0.0);
  };
  auto zero = hypothesis_estimate(zeros, GuideProgram::prior(), GuideProgram::prior(), 500, 0.05, 1);
  CHECK(zero.numerator.bound == 0.0);
  CHECK(*zero.self_normalized == 0.0);

  try {
    hypothesis_estimate(models::three_dice, GuideProgram::prior(), GuideProgram::prior(), 1,
                        0.05, 1);
    FAIL("expected UndefinedRatioError");
  } catch (const UndefinedRatioError& e) {
    CHECK(e.partial().denominator.bound == 0.0);
    CHECK_FALSE(e.partial().ratio_of_bounds.has_value());
  }
}

TEST_CASE("unbiasedness against the exact expectation") {
  auto pe = enumerate_paths(models::three_dice, 1000, 100);
  const TraceFunction f = evidence_of;
  const double truth = exact_evidence(pe);
  CHECK(exact_expected_weight(pe, models::dice_perfect_guide(), f) ==
        doctest::Approx(truth).epsilon(1e-12));
  CHECK(exact_expected_weight(pe, GuideProgram::prior(), f) == doctest::Approx(truth).epsilon(1e-12));
  // die1 never 6 and never 1 under this guide: incomplete coverage.
  GuideProgram partial;
  partial.propose = [](const ChoiceSite& site, GuideContext&) -> std::optional<Dist> {
    if (site.index != 0) return std::nullopt;
    return uniform_range(2, 5);
  };
  CHECK(exact_expected_weight(pe, partial, f) < truth - 1e-6);

  for (std::uint64_t m = 0; m < 20; ++m) {
    vpi::testing::RandomModel model{m};
    auto rpe = enumerate_paths(model, 100000, 100);
    const double sum = exact_evidence(rpe);
    CHECK(exact_expected_weight(rpe, vpi::testing::random_guide(m), f) ==
          doctest::Approx(sum).epsilon(1e-10));
  }
}

TEST_CASE("mean_and_std_error") {
  std::vector<double> xs{1.0, 2.0, 3.0, 4.0};
  auto m = mean_and_std_error(xs);
  CHECK(m.mean == 2.5);
  CHECK(m.std_error == doctest::Approx(std::sqrt(5.0 / 3.0 / 4.0)));
}

}  // TEST_SUITE
