#include <doctest.h>

#include <cmath>
#include <set>

#include "csd/blocks.hpp"
#include "csd/channel.hpp"
#include "csd/errors.hpp"
#include "csd/mathutil.hpp"
#include "csd/rng.hpp"
#include "csd/tilting.hpp"
#include "oracles.hpp"

using namespace csd;

TEST_CASE("cumulant values") {
  SUBCASE("independent channel has a flat cumulant") {
    DiscreteJointChannel ind = make_independent_channel();
    for (double l : {-3.0, 0.0, 1.0, 7.5}) {
      CumulantData c = cumulant(ind, l, 0);
      CHECK(std::abs(c.value) < 1e-12);
      CHECK(std::abs(c.d1) < 1e-12);
      CHECK(std::abs(c.d2) < 1e-12);
      CHECK(std::abs(c.d3) < 1e-12);
    }
  }
  SUBCASE("lambda = 0 gives the log support mass") {
    DiscreteJointChannel id = make_identity_channel();
    CHECK(cumulant(id, 0.0, 0).value == doctest::Approx(std::log(0.5)));
    DiscreteJointChannel bsc = make_bsc(0.11);
    CHECK(std::abs(cumulant(bsc, 0.0, 0).value) < 1e-14);
  }
  SUBCASE("lambda = 1 is always zero for discrete channels") {
    SeqRng rng(13);
    for (int t = 0; t < 20; ++t) {
      DiscreteJointChannel ch = oracles::random_channel(rng, 3, 3);
      for (std::size_t y = 0; y < 3; ++y)
        CHECK(std::abs(cumulant(ch, 1.0, y).value) < 1e-12);
    }
  }
  SUBCASE("convexity along a lambda grid") {
    DiscreteJointChannel bsc = make_bsc(0.25);
    double prev = -kInf;
    std::vector<double> values;
    for (int i = 0; i <= 100; ++i) {
      double l = -5.0 + 10.0 * i / 100.0;
      CumulantData c = cumulant(bsc, l, 1);
      values.push_back(c.value);
      CHECK(c.d2 >= -1e-12);
      CHECK(c.d1 >= prev - 1e-10);  // d1 nondecreasing since d2 >= 0
      prev = c.d1;
    }
    for (std::size_t i = 2; i < values.size(); ++i)
      CHECK(values[i - 1] <= 0.5 * (values[i - 2] + values[i]) + 1e-12);
  }
  SUBCASE("extreme tilts stay finite through log-sum-exp") {
    DiscreteJointChannel bsc = make_bsc(0.11);
    for (double l : {-50.0, 50.0}) {
      CumulantData c = cumulant(bsc, l, 0);
      CHECK(std::isfinite(c.value));
      CHECK(std::isfinite(c.d2));
    }
  }
}

TEST_CASE("cumulant derivatives vs central finite differences") {
  // BSC p=0.11, lambda=0.7, y=0, step 1e-4. Derivative magnitudes are O(1)
  // here, so 80-bit differences stay comfortably inside 1e-5 relative.
  DiscreteJointChannel bsc = make_bsc(0.11);
  CumulantData c = cumulant(bsc, 0.7, 0);
  auto lam_ld = [&](long double l) {
    long double a0 = std::log(0.5L) + l * (std::log(2.0L * 0.89L));
    long double a1 = std::log(0.5L) + l * (std::log(2.0L * 0.11L));
    long double m = std::max(a0, a1);
    return m + std::log(std::exp(a0 - m) + std::exp(a1 - m));
  };
  long double h = 1e-4L, l0 = 0.7L;
  double d1 = static_cast<double>((lam_ld(l0 + h) - lam_ld(l0 - h)) / (2 * h));
  double d2 = static_cast<double>((lam_ld(l0 + h) - 2 * lam_ld(l0) + lam_ld(l0 - h)) /
                                  (h * h));
  double d3 = static_cast<double>((lam_ld(l0 + 2 * h) - 2 * lam_ld(l0 + h) +
                                   2 * lam_ld(l0 - h) - lam_ld(l0 - 2 * h)) /
                                  (2 * h * h * h));
  CHECK(std::abs(d1 - c.d1) / std::abs(c.d1) < 1e-5);
  CHECK(std::abs(d2 - c.d2) / std::abs(c.d2) < 1e-5);
  CHECK(std::abs(d3 - c.d3) / std::abs(c.d3) < 1e-5);
}

TEST_CASE("tilted measure") {
  DiscreteJointChannel bsc = make_bsc(0.11);
  SUBCASE("lambda = 1 recovers the posterior exactly") {
    SeqRng rng(17);
    for (int t = 0; t < 20; ++t) {
      DiscreteJointChannel ch = oracles::random_channel(rng, 4, 3);
      for (std::size_t y = 0; y < ch.ny(); ++y) {
        TiltedMeasure tm = tilted_measure(ch, 1.0, y);
        for (std::size_t x = 0; x < ch.nx(); ++x)
          CHECK(std::abs(tm.pmf[x] - ch.posterior(x, y)) < 1e-12);
      }
    }
  }
  SUBCASE("lambda = 0 renormalizes the prior on the support") {
    DiscreteJointChannel id = make_identity_channel();
    TiltedMeasure tm = tilted_measure(id, 0.0, 0);
    CHECK(tm.pmf[0] == doctest::Approx(1.0));
    CHECK(tm.pmf[1] == 0.0);
  }
  SUBCASE("lambda = 2 on the BSC follows the squared-ratio law") {
    TiltedMeasure tm = tilted_measure(bsc, 2.0, 0);
    double a = 0.89 * 0.89, b = 0.11 * 0.11;
    CHECK(tm.pmf[0] == doctest::Approx(a / (a + b)).epsilon(1e-12));
    CHECK(tm.pmf[1] == doctest::Approx(b / (a + b)).epsilon(1e-12));
  }
  SUBCASE("pmf sums to one") {
    TiltedMeasure tm = tilted_measure(bsc, -3.7, 1);
    double s = 0.0;
    for (double p : tm.pmf) s += p;
    CHECK(std::abs(s - 1.0) < 1e-12);
  }
}

TEST_CASE("block tilt stats additivity") {
  DiscreteJointChannel bsc = make_bsc(0.11);
  SUBCASE("independent channel gives zeros") {
    std::vector<std::size_t> block{0, 1, 0};
    BlockTiltStats s = block_tilt_stats(make_independent_channel(), 0.8, block);
    CHECK(std::abs(s.s_n_sq) < 1e-12);
    CHECK(std::abs(s.mu3) < 1e-12);
  }
  SUBCASE("constant block is n times one letter") {
    std::vector<std::size_t> one{0};
    std::vector<std::size_t> five(5, 0);
    BlockTiltStats a = block_tilt_stats(bsc, 0.7, one);
    BlockTiltStats b = block_tilt_stats(bsc, 0.7, five);
    CHECK(b.s_n_sq == doctest::Approx(5.0 * a.s_n_sq).epsilon(1e-13));
    CHECK(b.mu3 == doctest::Approx(5.0 * a.mu3).epsilon(1e-13));
  }
  SUBCASE("mixed block composes by counts") {
    std::vector<std::size_t> block{0, 1, 1, 0, 1};
    std::vector<std::size_t> y0{0}, y1{1};
    BlockTiltStats whole = block_tilt_stats(bsc, 1.3, block);
    BlockTiltStats a = block_tilt_stats(bsc, 1.3, y0);
    BlockTiltStats b = block_tilt_stats(bsc, 1.3, y1);
    CHECK(whole.s_n_sq == doctest::Approx(2 * a.s_n_sq + 3 * b.s_n_sq).epsilon(1e-13));
    CHECK(whole.mu3 == doctest::Approx(2 * a.mu3 + 3 * b.mu3).epsilon(1e-13));
  }
}

TEST_CASE("stochastic dominance") {
  DiscreteJointChannel bsc = make_bsc(0.11);
  SUBCASE("sweep of nearby pairs") {
    for (int i = 0; i < 20; ++i) {
      double l1 = -1.0 + 0.15 * i;
      CHECK(stochastic_dominance_check(bsc, 0, l1, l1 + 0.05).dominated);
    }
  }
  SUBCASE("independent channel ties at margin zero") {
    DominanceResult d = stochastic_dominance_check(make_independent_channel(), 0, 0.2, 0.9);
    CHECK(d.dominated);
    CHECK(std::abs(d.worst_margin) < 1e-14);
  }
  SUBCASE("random 8x8 channels") {
    SeqRng rng(19);
    for (int t = 0; t < 100; ++t) {
      DiscreteJointChannel ch = oracles::random_channel(rng, 8, 8, 0.0);
      double l1 = -2.0 + 3.0 * rng.unit_co();
      double l2 = l1 + 0.01 + 2.0 * rng.unit_co();
      CHECK(stochastic_dominance_check(ch, rng.bits() % 8, l1, l2).dominated);
    }
  }
  SUBCASE("tied levels with unequal masses") {
    // x0 and x1 share one ratio value given y=0; margins must be evaluated
    // per level, not per atom.
    DiscreteJointChannel ch({{0.05, 0.15}, {0.1, 0.3}, {0.35, 0.05}});
    for (int i = 0; i < 30; ++i) {
      double l1 = -2.0 + 0.15 * i;
      CHECK(stochastic_dominance_check(ch, 0, l1, l1 + 0.6).dominated);
    }
  }
}

TEST_CASE("moment bound lemma") {
  SUBCASE("independent channel is the zero case") {
    std::vector<double> grid{0.5, 0.75, 1.0, 1.25, 1.5};
    CHECK(moment_bound_check(make_independent_channel(), 0, 3, grid));
  }
  SUBCASE("BSC on a fine grid") {
    DiscreteJointChannel bsc = make_bsc(0.11);
    std::vector<double> grid(50);
    for (int i = 0; i < 50; ++i) grid[i] = 0.5 + i / 49.0;
    CHECK(moment_bound_check(bsc, 0, 3, grid));
  }
  SUBCASE("random channels, k = 1..6") {
    SeqRng rng(23);
    for (int t = 0; t < 60; ++t) {
      DiscreteJointChannel ch = oracles::random_channel(rng, 3, 4);
      auto [lo, hi] = find_operating_interval(ch, 1e-2);
      std::vector<double> grid(11);
      for (int i = 0; i <= 10; ++i) grid[i] = lo + (hi - lo) * i / 10.0;
      for (int k = 1; k <= 6; ++k)
        CHECK(moment_bound_check(ch, rng.bits() % ch.ny(), k, grid));
    }
  }
}

TEST_CASE("operating interval") {
  SUBCASE("BSC contains 1 with room") {
    auto [lo, hi] = find_operating_interval(make_bsc(0.11));
    CHECK(lo < 1.0);
    CHECK(hi > 1.0);
    CHECK(hi - lo > 0.1);
  }
  SUBCASE("identity channel is singular") {
    CHECK_THROWS_AS(find_operating_interval(make_identity_channel()), SingularChannel);
    CHECK_THROWS_AS(find_operating_interval(make_independent_channel()), SingularChannel);
  }
  SUBCASE("near-singular channel yields a nonempty interval") {
    auto [lo, hi] = find_operating_interval(make_bsc(1e-6));
    CHECK(lo < 1.0);
    CHECK(hi > 1.0);
  }
}

TEST_CASE("regularity constants") {
  DiscreteJointChannel bsc = make_bsc(0.11);
  RegularityConstants c = assemble_regularity_constants(bsc);
  CHECK(c.lambda_lo < 1.0);
  CHECK(c.lambda_hi > 1.0);
  CHECK(c.m2_lo > 0.0);
  CHECK(c.m2_lo <= c.m2_hi);
  CHECK(c.m3_hi > 0.0);
  CHECK(c.epsilon > 0.0);
  CHECK(c.n0 > 0.0);
  CHECK(std::isfinite(c.log_m_lo));
  // typical-block statistics actually live inside the bounds
  std::vector<std::size_t> block(64);
  for (std::size_t i = 0; i < block.size(); ++i) block[i] = i % 2;
  for (double l : {c.lambda_lo, 1.0, c.lambda_hi}) {
    BlockTiltStats s = block_tilt_stats(bsc, l, block);
    CHECK(s.s_n_sq / 64.0 >= c.m2_lo - 1e-12);
    CHECK(s.s_n_sq / 64.0 <= c.m2_hi + 1e-12);
    CHECK(s.mu3 / 64.0 <= c.m3_hi + 1e-12);
  }
  SUBCASE("explicit epsilon is validated") {
    CHECK_THROWS_AS(assemble_regularity_constants(bsc, 1e-3, 100.0), ConfigError);
  }
}

TEST_CASE("m lower formula") {
  SUBCASE("mu = 0 specialization") {
    double l = 0.9, s = 11.0, n = 400.0;
    double expect = (1.0 - 2.0 / (l * std::sqrt(M_E) * s)) * std::sqrt(n) /
                    (2.0 * l * std::sqrt(2.0 * M_PI) * s);
    CHECK(m_lower(l, s, 0.0, n) == doctest::Approx(expect).epsilon(1e-12));
  }
  SUBCASE("dual implementation oracle") {
    // second, independent evaluation of the same formula
    auto oracle = [](double l, double s, double mu, double n) {
      double t = l * 2.0 * std::sqrt(2.0 * M_PI) * mu / (s * s);
      double g = 1.0 - (1.0 + (1.0 + 2.0 * t) * (1.0 + 2.0 * t)) /
                           (l * (1.0 + 2.0 * t) * std::sqrt(M_E) * s);
      return (1.0 + 2.0 * t) * g * std::sqrt(n) /
             (2.0 * l * std::sqrt(2.0 * M_PI) * s * std::exp(2.0 * t));
    };
    SeqRng rng(29);
    for (int t = 0; t < 50; ++t) {
      double l = 0.3 + rng.unit();
      double s = 2.0 + 30.0 * rng.unit_co();
      double mu = 4.0 * rng.unit_co();
      double n = 10.0 + 1000.0 * rng.unit_co();
      CHECK(m_lower(l, s, mu, n) == doctest::Approx(oracle(l, s, mu, n)).epsilon(1e-10));
      double lg = m_lower_log(l, s, mu, n);
      if (std::isfinite(lg))
        CHECK(std::exp(lg) == doctest::Approx(oracle(l, s, mu, n)).epsilon(1e-10));
    }
  }
  SUBCASE("doubling n scales by sqrt 2") {
    double a = m_lower(0.8, 9.0, 1.5, 100.0);
    double b = m_lower(0.8, 9.0, 1.5, 200.0);
    CHECK(b == doctest::Approx(a * std::sqrt(2.0)).epsilon(1e-12));
  }
}

TEST_CASE("typicality events") {
  DiscreteJointChannel bsc = make_bsc(0.11);
  RegularityConstants c = assemble_regularity_constants(bsc);
  auto grid = k_epsilon_grid(c.lambda_lo, c.lambda_hi, c.epsilon);
  std::vector<std::size_t> block(32);
  for (std::size_t i = 0; i < block.size(); ++i) block[i] = i % 2;

  SUBCASE("huge epsilon marks every block typical") {
    TypicalityReport r = typicality_check(bsc, block, 100.0, grid);
    CHECK_FALSE(r.atypical);
  }
  SUBCASE("full-space conditional mean sits below I and trips the mean event") {
    TypicalityReport r = typicality_check(bsc, block, c.epsilon, grid);
    CHECK(r.mean_stat < mutual_information_nats(bsc));
    CHECK(r.mean_atypical);
  }
  SUBCASE("posterior conditional mean is typical for the BSC") {
    double kappa = posterior_mean_llr_nats(bsc, 0);
    TypicalityReport r = typicality_check(bsc, block, c.epsilon, grid, kappa);
    CHECK_FALSE(r.atypical);
  }
  SUBCASE("independent channel: all moment events trivially typical") {
    DiscreteJointChannel ind = make_independent_channel();
    std::vector<double> small_grid{0.5, 1.0, 1.5};
    TypicalityReport r = typicality_check(ind, block, 1e-6, small_grid,
                                          mutual_information_nats(ind));
    CHECK_FALSE(r.atypical);
  }
  SUBCASE("mc sweep bounded by the Chebyshev constant") {
    TypicalitySweep s = typicality_mc_sweep(bsc, 256, c.epsilon, grid, 2'000, 5);
    CHECK(s.holds);
    // asymmetric channel: nonzero variances, still bounded
    DiscreteJointChannel r4 = make_random4x4_channel();
    RegularityConstants c4 = assemble_regularity_constants(r4);
    auto grid4 = k_epsilon_grid(c4.lambda_lo, c4.lambda_hi, c4.epsilon);
    TypicalitySweep s4 = typicality_mc_sweep(r4, 256, c4.epsilon, grid4, 2'000, 6);
    CHECK(s4.holds);
    CHECK(s4.chebyshev_c > 0.0);
  }
}

TEST_CASE("conditional mean llr") {
  DiscreteJointChannel bsc = make_bsc(0.11);
  std::vector<std::size_t> block{0, 1, 0, 1, 0, 1, 0, 1, 0, 1};

  SUBCASE("full space equals the unconditional mean") {
    double got = conditional_mean_llr(bsc, block, [](std::uint64_t) { return true; });
    KahanSum expect;
    for (std::size_t y : block) {
      for (std::size_t x = 0; x < 2; ++x)
        expect.add(bsc.marginal_x(x) * bsc.log_likelihood_ratio(x, y));
    }
    CHECK(got == doctest::Approx(expect.value() / 10.0).epsilon(1e-12));
  }
  SUBCASE("identity point set") {
    DiscreteJointChannel id = make_identity_channel();
    std::vector<std::size_t> yb{0, 1, 1, 0};
    // x^n = y^n is index 0b0110
    std::uint64_t target = 0b0110;
    double got = conditional_mean_llr(id, yb, [&](std::uint64_t i) { return i == target; });
    CHECK(got == doctest::Approx(std::log(2.0)).epsilon(1e-13));
  }
  SUBCASE("threshold sets match exhaustive enumeration at n=10") {
    LevelDistribution d = block_level_distribution(bsc, block);
    double ie = mutual_information_nats(bsc);
    for (double theta : {ie - 0.2, ie, ie + 0.15}) {
      double via_dist = conditional_mean_llr_threshold(d, theta);
      double via_enum = conditional_mean_llr(bsc, block, [&](std::uint64_t idx) {
        double sum = 0.0;
        std::uint64_t v = idx;
        for (std::size_t i = block.size(); i-- > 0;) {
          sum += bsc.log_likelihood_ratio(v % 2, block[i]);
          v /= 2;
        }
        return sum / 10.0 >= theta;
      });
      CHECK(via_dist == doctest::Approx(via_enum).epsilon(1e-10));
    }
  }
  SUBCASE("empty set is rejected") {
    CHECK_THROWS_AS(conditional_mean_llr(bsc, block, [](std::uint64_t) { return false; }),
                    EmptySet);
    LevelDistribution d = block_level_distribution(bsc, block);
    CHECK_THROWS_AS(conditional_mean_llr_threshold(d, 100.0), EmptySet);
  }
}

TEST_CASE("ball radius") {
  RegularityConstants c;
  c.lambda_lo = 0.6;
  c.m2_lo = 0.04;
  c.m_lo = 5.0;
  SUBCASE("n doubling halves the correction") {
    double base = 0.5;
    double r1 = ball_radius(base, c, 100);
    double r2 = ball_radius(base, c, 200);
    CHECK(base - r2 == doctest::Approx(0.5 * (base - r1)).epsilon(1e-12));
  }
  SUBCASE("large n approaches iota") {
    CHECK(ball_radius(0.5, c, 1u << 30) == doctest::Approx(0.5).epsilon(1e-8));
  }
  SUBCASE("dual implementation") {
    double correction = 1.0 / (c.m_lo * c.lambda_lo * c.lambda_lo * std::sqrt(c.m2_lo) * 64.0);
    CHECK(ball_radius(0.3, c, 64) == doctest::Approx(0.3 - correction).epsilon(1e-13));
  }
}

TEST_CASE("gibbs check") {
  DiscreteJointChannel bsc = make_bsc(0.11);
  RegularityConstants c = assemble_regularity_constants(bsc);
  std::vector<std::size_t> block{0, 1, 0, 1, 0, 1, 0, 1, 0, 1};

  SUBCASE("threshold sets give equality-style passes") {
    // A already a ball: B re-derived from iota(A) must keep both inequalities.
    double ie = mutual_information_nats(bsc);
    std::vector<double> sums(1 << 10);
    for (std::uint64_t idx = 0; idx < sums.size(); ++idx) {
      double s = 0.0;
      std::uint64_t v = idx;
      for (std::size_t i = block.size(); i-- > 0;) {
        s += bsc.log_likelihood_ratio(v % 2, block[i]);
        v /= 2;
      }
      sums[idx] = s / 10.0;
    }
    GibbsResult g = gibbs_check(
        bsc, block, [&](std::uint64_t idx) { return sums[idx] >= ie; }, c);
    CHECK(g.pass);
  }
  SUBCASE("full space maps to the full space") {
    GibbsResult g = gibbs_check(bsc, block, [](std::uint64_t) { return true; }, c);
    CHECK(g.pass);
    CHECK(g.b_is_full_space);
    CHECK(g.p_b == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("posterior-sampled decoder-like sets at n=10, 200 trials") {
    SeqRng rng(37);
    std::vector<CategoricalSampler> post;
    for (std::size_t y = 0; y < 2; ++y) post.emplace_back(bsc.posterior_column(y));
    for (int trial = 0; trial < 200; ++trial) {
      std::vector<std::size_t> yb(10);
      for (auto& y : yb) y = rng.bits() % 2;
      std::set<std::uint64_t> a;
      for (int i = 0; i < 32; ++i) {
        std::uint64_t idx = 0;
        for (std::size_t j = 0; j < 10; ++j) idx = idx * 2 + post[yb[j]](rng.unit_co());
        a.insert(idx);
      }
      GibbsResult g =
          gibbs_check(bsc, yb, [&](std::uint64_t i) { return a.count(i) > 0; }, c);
      CHECK(g.pass);
    }
  }
  SUBCASE("empty conditioning set is rejected") {
    CHECK_THROWS_AS(
        gibbs_check(bsc, block, [](std::uint64_t) { return false; }, c), EmptySet);
  }
}

TEST_CASE("ball probability bound") {
  DiscreteJointChannel bsc = make_bsc(0.11);
  RegularityConstants c = assemble_regularity_constants(bsc);
  std::vector<std::size_t> block(256);
  for (std::size_t i = 0; i < block.size(); ++i) block[i] = i % 2;
  double ie = mutual_information_nats(bsc);

  SUBCASE("holds with positive slack at iota = I + 0.01") {
    BallBoundResult r = ball_probability_bound_check(bsc, block, c, ie + 0.01);
    CHECK(r.holds);
    CHECK(r.slack_bits > 0.0);
    CHECK(r.lambda_star > 1.0);
    CHECK(r.lambda_star < c.lambda_hi);
  }
  SUBCASE("lambda solver hits the radius") {
    BallBoundResult r = ball_probability_bound_check(bsc, block, c, ie + 0.05, 1e-12);
    CHECK(block_cumulant_d1(bsc, r.lambda_star, block) ==
          doctest::Approx(ie + 0.05).epsilon(1e-9));
  }
  SUBCASE("radius below the derivative range is rejected") {
    double low = block_cumulant_d1(bsc, c.lambda_lo, block) - 0.05;
    CHECK_THROWS_AS(ball_probability_bound_check(bsc, block, c, low), RadiusOutOfRange);
  }
}
