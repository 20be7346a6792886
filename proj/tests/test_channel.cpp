#include <doctest.h>

#include <cmath>

#include "csd/channel.hpp"
#include "csd/errors.hpp"
#include "csd/mathutil.hpp"
#include "csd/rng.hpp"
#include "oracles.hpp"

using namespace csd;

TEST_CASE("construction rejects bad joints") {
  CHECK_THROWS_AS(DiscreteJointChannel({{0.5, -0.1}, {0.3, 0.3}}), ChannelParseError);
  CHECK_THROWS_AS(DiscreteJointChannel({{0.4, 0.4}}), ChannelParseError);  // mass 0.8
  // zero-mass y column
  CHECK_THROWS_AS(DiscreteJointChannel({{0.5, 0.0}, {0.5, 0.0}}), ChannelParseError);
  // zero-mass x row
  CHECK_THROWS_AS(DiscreteJointChannel({{0.5, 0.5}, {0.0, 0.0}}), ChannelParseError);
  // mass off by < 1e-9 is normalized
  DiscreteJointChannel ok({{0.25, 0.25}, {0.25, 0.25 + 4e-10}});
  double total = 0.0;
  for (std::size_t x = 0; x < 2; ++x)
    for (std::size_t y = 0; y < 2; ++y) total += ok.joint(x, y);
  CHECK(total == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("log likelihood ratio on the named channels") {
  DiscreteJointChannel ind = make_independent_channel();
  for (std::size_t x = 0; x < 2; ++x)
    for (std::size_t y = 0; y < 2; ++y)
      CHECK(ind.log_likelihood_ratio(x, y) == doctest::Approx(0.0).epsilon(1e-14));

  DiscreteJointChannel id = make_identity_channel();
  CHECK(id.log_likelihood_ratio(0, 0) == doctest::Approx(std::log(2.0)));
  CHECK(id.log_likelihood_ratio(1, 0) == -kInf);

  DiscreteJointChannel bsc = make_bsc(0.11);
  CHECK(bsc.log_likelihood_ratio(0, 0) == doctest::Approx(std::log(2.0 * 0.89)));
  CHECK(bsc.log_likelihood_ratio(1, 0) == doctest::Approx(std::log(2.0 * 0.11)));
}

TEST_CASE("likelihood ratio normalization sum_x p(x) r(x|y) = 1") {
  SeqRng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    DiscreteJointChannel ch =
        oracles::random_channel(rng, 2 + rng.bits() % 5, 2 + rng.bits() % 5, 0.0);
    for (std::size_t y = 0; y < ch.ny(); ++y) {
      double s = 0.0;
      for (std::size_t x = 0; x < ch.nx(); ++x)
        s += ch.marginal_x(x) * ch.likelihood_ratio(x, y);
      CHECK(std::abs(s - 1.0) < 1e-12);
    }
  }
}

TEST_CASE("mutual information") {
  CHECK(mutual_information_bits(make_independent_channel()) ==
        doctest::Approx(0.0).epsilon(1e-14));
  CHECK(mutual_information_bits(make_identity_channel()) == 1.0);
  // BSC: 1 - H_b(p)
  CHECK(mutual_information_bits(make_bsc(0.11)) ==
        doctest::Approx(1.0 - oracles::binary_entropy_bits(0.11)).epsilon(1e-3));
  CHECK(std::abs(mutual_information_bits(make_bsc(0.11)) -
                 (1.0 - oracles::binary_entropy_bits(0.11))) < 1e-12);

  GaussianChannel g(1.0, 1.0);
  CHECK(mutual_information_bits(g) == doctest::Approx(0.5));
  // nonnegativity on random channels; zero iff factorized
  SeqRng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    auto px = oracles::random_pmf(rng, 3, 0.05);
    auto py = oracles::random_pmf(rng, 4, 0.05);
    std::vector<std::vector<double>> joint(3, std::vector<double>(4));
    for (int x = 0; x < 3; ++x)
      for (int y = 0; y < 4; ++y) joint[x][y] = px[x] * py[y];
    CHECK(std::abs(mutual_information_bits(DiscreteJointChannel(joint))) < 1e-12);
    DiscreteJointChannel ch = oracles::random_channel(rng, 3, 4);
    CHECK(mutual_information_bits(ch) >= -1e-15);
  }
}

TEST_CASE("gaussian mutual information vs monte carlo") {
  GaussianChannel g(1.0, 0.7);
  SeqRng rng(123);
  std::size_t n = 1'000'000;
  double mean = 0.0, m2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double x = g.sigma_x * rng.normal();
    double y = x + g.sigma_n * rng.normal();
    double l = nats_to_bits(g.log_likelihood_ratio(x, y));
    double d = l - mean;
    mean += d / static_cast<double>(i + 1);
    m2 += d * (l - mean);
  }
  double se = std::sqrt(m2 / static_cast<double>(n - 1) / static_cast<double>(n));
  CHECK(std::abs(mean - mutual_information_bits(g)) < 3.0 * se);
}

TEST_CASE("nonsingularity classification") {
  CHECK_FALSE(is_nonsingular(make_identity_channel()).nonsingular);
  CHECK_FALSE(is_nonsingular(make_independent_channel()).nonsingular);
  auto bsc = is_nonsingular(make_bsc(0.11));
  CHECK(bsc.nonsingular);
  CHECK(bsc.witness_y.has_value());
  CHECK(is_nonsingular(GaussianChannel(1.0, 1.0)).nonsingular);
  CHECK(is_nonsingular(make_bsc(1e-6)).nonsingular);
}

TEST_CASE("llr stats moments") {
  LogLikelihoodStats ind = llr_stats(make_independent_channel());
  CHECK(std::abs(ind.mean_nats) < 1e-14);
  CHECK(std::abs(ind.var_nats2) < 1e-14);

  LogLikelihoodStats id = llr_stats(make_identity_channel());
  for (double v : id.per_y_variance) CHECK(v == 0.0);

  // BSC variance two ways
  DiscreteJointChannel bsc = make_bsc(0.11);
  LogLikelihoodStats st = llr_stats(bsc);
  double e1 = 0.0, e2 = 0.0;
  for (std::size_t x = 0; x < 2; ++x)
    for (std::size_t y = 0; y < 2; ++y) {
      double l = bsc.log_likelihood_ratio(x, y);
      e1 += bsc.joint(x, y) * l;
      e2 += bsc.joint(x, y) * l * l;
    }
  CHECK(std::abs(st.var_nats2 - (e2 - e1 * e1)) < 1e-12);
  CHECK(st.mean_nats == doctest::Approx(mutual_information_nats(bsc)).epsilon(1e-13));
  // nonsingular iff some per-y variance positive
  bool any = false;
  for (double v : st.per_y_variance) any = any || v > 0.0;
  CHECK(any == is_nonsingular(bsc).nonsingular);
}

TEST_CASE("gaussian llr stats against monte carlo") {
  GaussianChannel g(1.3, 0.8);
  LogLikelihoodStats st = llr_stats(g);
  SeqRng rng(97);
  std::size_t n = 400'000;
  double mean = 0.0, m2 = 0.0, cond = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double x = g.sigma_x * rng.normal();
    double y = x + g.sigma_n * rng.normal();
    double l = g.log_likelihood_ratio(x, y);
    double d = l - mean;
    mean += d / static_cast<double>(i + 1);
    m2 += d * (l - mean);
    cond += g.conditional_var_llr(y);
  }
  double var = m2 / static_cast<double>(n - 1);
  CHECK(st.mean_nats == doctest::Approx(mean).epsilon(0.01));
  CHECK(st.var_nats2 == doctest::Approx(var).epsilon(0.05));
  CHECK(st.mean_conditional_var ==
        doctest::Approx(cond / static_cast<double>(n)).epsilon(0.02));
}

TEST_CASE("channel json round trip") {
  ChannelSpec spec = bundled_channel("bsc11");
  std::string text = channel_to_json(spec);
  ChannelSpec back = parse_channel_json(text);
  REQUIRE(back.kind == ChannelSpec::Kind::discrete);
  CHECK(back.discrete->y_symmetric_declared());
  for (std::size_t x = 0; x < 2; ++x)
    for (std::size_t y = 0; y < 2; ++y)
      CHECK(back.discrete->joint(x, y) == spec.discrete->joint(x, y));

  ChannelSpec g = parse_channel_json(R"({"type":"gaussian","sigma_x":1.5,"sigma_n":0.5})");
  REQUIRE(g.kind == ChannelSpec::Kind::gaussian);
  CHECK(g.gaussian->sigma_x == 1.5);

  CHECK_THROWS_AS(parse_channel_json("{not json"), ChannelParseError);
  CHECK_THROWS_AS(parse_channel_json(R"({"type":"discrete"})"), ChannelParseError);
  CHECK_THROWS_AS(parse_channel_json(R"({"type":"laplace"})"), ChannelParseError);
}
