#include "csd/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <set>
#include <sstream>

#include <quadmath.h>

#include "csd/blocks.hpp"
#include "csd/channel.hpp"
#include "csd/errors.hpp"
#include "csd/mathutil.hpp"
#include "csd/rng.hpp"
#include "csd/sampler.hpp"
#include "csd/tilting.hpp"
#include "csd/width.hpp"

namespace csd {

namespace {

using Clock = std::chrono::steady_clock;

std::string fmt(const char* format, ...) {
  char buf[512];
  va_list args;
  va_start(args, format);
  std::vsnprintf(buf, sizeof buf, format, args);
  va_end(args);
  return buf;
}

std::vector<double> random_pmf(SeqRng& rng, std::size_t k, double floor) {
  std::vector<double> p(k);
  double total = 0.0;
  for (auto& v : p) {
    v = floor + rng.unit();
    total += v;
  }
  for (auto& v : p) v /= total;
  return p;
}

DiscreteJointChannel random_channel(SeqRng& rng, std::size_t nx, std::size_t ny,
                                    double floor) {
  std::vector<std::vector<double>> joint(nx, std::vector<double>(ny));
  double total = 0.0;
  for (auto& row : joint)
    for (auto& v : row) {
      v = floor + rng.unit();
      total += v;
    }
  for (auto& row : joint)
    for (auto& v : row) v /= total;
  return DiscreteJointChannel(std::move(joint));
}

// Independent finite-difference oracle for the cumulant: quad-precision
// log-sum-exp, no shared code with csd::cumulant. At the pinned step 1e-4 the
// third-derivative stencil divides cancellation error by 8e-12, which already
// exceeds 80-bit precision; __float128 keeps the oracle floor near 1e-15.
__float128 cumulant_q(const DiscreteJointChannel& ch, __float128 lambda, std::size_t y) {
  __float128 m = -1e300Q;
  std::vector<__float128> a;
  for (std::size_t x = 0; x < ch.nx(); ++x) {
    if (ch.posterior(x, y) > 0.0) {
      __float128 l = logq(static_cast<__float128>(ch.posterior(x, y))) -
                     logq(static_cast<__float128>(ch.marginal_x(x)));
      a.push_back(logq(static_cast<__float128>(ch.marginal_x(x))) + lambda * l);
      if (a.back() > m) m = a.back();
    }
  }
  __float128 s = 0.0Q;
  for (__float128 v : a) s += expq(v - m);
  return m + logq(s);
}

struct FdDerivatives {
  double d1, d2, d3;
};

FdDerivatives fd_derivatives(const DiscreteJointChannel& ch, double lambda, std::size_t y,
                             double h) {
  auto f = [&](__float128 l) { return cumulant_q(ch, l, y); };
  __float128 hp = h;
  __float128 l0 = lambda;
  __float128 f1 = f(l0 + hp), f2 = f(l0 + 2 * hp), f3 = f(l0 + 3 * hp);
  __float128 g1 = f(l0 - hp), g2 = f(l0 - 2 * hp), g3 = f(l0 - 3 * hp);
  __float128 f0 = f(l0);
  FdDerivatives d;
  d.d1 = static_cast<double>((-f2 + 8 * f1 - 8 * g1 + g2) / (12 * hp));
  d.d2 = static_cast<double>((-f2 + 16 * f1 - 30 * f0 + 16 * g1 - g2) / (12 * hp * hp));
  d.d3 = static_cast<double>((g3 - 8 * g2 + 13 * g1 - 13 * f1 + 8 * f2 - f3) /
                             (8 * hp * hp * hp));
  return d;
}

double rel_err(double approx, double exact) {
  // The 1e-8 floor handles exact derivatives sitting at the double roundoff
  // scale, where a relative comparison is ill-posed.
  return std::abs(approx - exact) / std::max(std::abs(exact), 1e-8);
}

std::vector<std::size_t> dyadic_n_list() {
  return {64, 128, 256, 512, 1024, 2048, 4096, 8192};
}

std::vector<std::size_t> random_bits_block(SeqRng& rng, std::size_t n) {
  std::vector<std::size_t> b(n);
  for (auto& v : b) v = rng.bits() & 1u;
  return b;
}

// --- criteria -------------------------------------------------------------

CriterionResult criterion_divergence_oracles(std::uint64_t seed) {
  CriterionResult r{1, "divergence oracle equivalence", false, "", 0.0};
  SeqRng rng(CounterRng(seed).derive(1));
  double worst_kl = 0.0, worst_gap = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    std::size_t k = 2 + rng.bits() % 15;
    std::vector<double> p = random_pmf(rng, k, 1e-3);
    std::vector<double> q = random_pmf(rng, k, 0.0);
    if (trial % 3 == 0 && k > 2) {
      // exercise zero-ratio atoms
      std::size_t z = rng.bits() % k;
      q[z] = 0.0;
      double total = 0.0;
      for (double v : q) total += v;
      for (double& v : q) v /= total;
    }
    DivergenceReport rep = divergence_gap(p, q);
    worst_kl = std::max(worst_kl, std::abs(rep.d_kl_direct - rep.d_kl_integral));
    worst_gap = std::max(worst_gap,
                         std::abs(rep.gap - (rep.log_width_entropy - kLbE)));
  }
  r.pass = worst_kl <= 1e-9 && worst_gap <= 1e-9;
  r.detail = fmt("200 pairs: max |KL_direct-KL_integral| = %.2e, max gap-identity residual "
                 "= %.2e (tol 1e-9)",
                 worst_kl, worst_gap);
  return r;
}

CriterionResult criterion_ordering(std::uint64_t seed) {
  CriterionResult r{2, "D_KL <= D_CS ordering", false, "", 0.0};
  SeqRng rng(CounterRng(seed).derive(1));  // same stream as criterion 1
  double min_slack = kInf;
  std::size_t instances = 0;
  auto track = [&](const DivergenceReport& rep) {
    min_slack = std::min(min_slack, rep.d_cs - rep.d_kl_direct);
    ++instances;
  };
  for (int trial = 0; trial < 200; ++trial) {
    std::size_t k = 2 + rng.bits() % 15;
    std::vector<double> p = random_pmf(rng, k, 1e-3);
    std::vector<double> q = random_pmf(rng, k, 0.0);
    if (trial % 3 == 0 && k > 2) {
      std::size_t z = rng.bits() % k;
      q[z] = 0.0;
      double total = 0.0;
      for (double v : q) total += v;
      for (double& v : q) v /= total;
    }
    track(divergence_gap(p, q));
  }
  for (const char* name : {"independent", "identity", "bsc11", "bsc25", "rand4x4"}) {
    ChannelSpec spec = bundled_channel(name);
    const DiscreteJointChannel& ch = *spec.discrete;
    for (std::size_t y = 0; y < ch.ny(); ++y) track(slice_divergence(ch, y));
  }
  // Block-level ordering on BSC blocks.
  DiscreteJointChannel bsc = make_bsc(0.11);
  SeqRng brng(CounterRng(seed).derive(2));
  for (std::size_t n = 1; n <= 10; ++n) {
    auto block = random_bits_block(brng, n);
    LevelDistribution d = block_level_distribution(bsc, block);
    min_slack = std::min(min_slack, block_csd_bits(d) - block_kl_bits(d));
    ++instances;
  }
  r.pass = min_slack >= -1e-9;
  r.detail = fmt("%zu instances, min (D_CS - D_KL) = %.3e bits (must be >= -1e-9)",
                 instances, min_slack);
  return r;
}

CriterionResult criterion_redundancy_law(std::uint64_t) {
  CriterionResult r{3, "redundancy law (slope -> 1/2)", false, "", 0.0};
  DiscreteJointChannel bsc = make_bsc(0.11);
  auto n_list = dyadic_n_list();
  auto curve = redundancy_curve(bsc, n_list, {});
  std::vector<double> lbn, gap;
  // The lattice BSC approaches 1/2 from below, so "toward 1/2" is checked as
  // monotone convergence of |gap/lb n - 1/2|.
  bool converging = true;
  double prev_dist = kInf;
  for (const auto& p : curve) {
    lbn.push_back(std::log2(static_cast<double>(p.n)));
    gap.push_back(p.gap);
    double dist = std::abs(p.gap_over_lbn - 0.5);
    if (dist >= prev_dist) converging = false;
    prev_dist = dist;
  }
  double slope = ls_slope(lbn, gap);
  r.pass = slope >= 0.4 && slope <= 0.6 && converging;
  r.detail = fmt("slope = %.4f (need [0.4,0.6]); gap/lb n: %.4f -> %.4f, monotone toward "
                 "1/2 (from below, lattice deficit): %s",
                 slope, curve.front().gap_over_lbn, curve.back().gap_over_lbn,
                 converging ? "yes" : "NO");
  return r;
}

CriterionResult criterion_singular_contrast(std::uint64_t) {
  CriterionResult r{4, "singular contrast (identity gap = 0 exactly)", false, "", 0.0};
  DiscreteJointChannel id = make_identity_channel();
  auto curve = redundancy_curve(id, dyadic_n_list(), {});
  double worst = 0.0;
  bool exact = true;
  for (const auto& p : curve) {
    worst = std::max(worst, std::abs(p.gap));
    if (p.gap != 0.0) exact = false;
  }
  r.pass = exact;
  r.detail = fmt("8 blocklengths, max |gap| = %.3e bits (must be exactly 0)", worst);
  return r;
}

CriterionResult criterion_one_shot_bound(std::uint64_t seed) {
  CriterionResult r{5, "one-shot bound (index entropy vs E[D_CS])", false, "", 0.0};
  bool all_ok = true;
  std::ostringstream detail;
  int part = 0;
  for (const char* name : {"independent", "identity", "bsc11", "bsc25", "rand4x4"}) {
    ChannelSpec spec = bundled_channel(name);
    const DiscreteJointChannel& ch = *spec.discrete;
    double edcs = expected_dcs_bits(ch);
    EntropyEstimate est =
        conditional_index_entropy(ch, 500, CounterRng(seed).derive(10 + part).seed());
    bool lower = est.mean_bits >= edcs - 3.0 * est.stderr_bits;
    bool upper = est.mean_bits <= edcs + std::log2(edcs + 1.0) + 8.0;
    all_ok = all_ok && lower && upper;
    detail << (part ? "; " : "") << name << ": H=" << fmt("%.4f", est.mean_bits)
           << " E[D_CS]=" << fmt("%.4f", edcs) << (lower && upper ? " ok" : " VIOLATION");
    ++part;
  }
  r.pass = all_ok;
  r.detail = detail.str();
  return r;
}

CriterionResult criterion_sampler_exactness(std::uint64_t seed) {
  CriterionResult r{6, "sampler exactness (TV at 1e6 samples)", false, "", 0.0};
  double tv = exactness_test(make_bsc(0.11), 1'000'000, CounterRng(seed).derive(20).seed());
  r.pass = tv < 0.005;
  r.detail = fmt("TV = %.5f (need < 0.005)", tv);
  return r;
}

CriterionResult criterion_cdf_identity(std::uint64_t seed) {
  CriterionResult r{7, "CDF identity for ln H_n", false, "", 0.0};
  DiscreteJointChannel bsc = make_bsc(0.11);
  SeqRng rng(CounterRng(seed).derive(30));
  double worst = 0.0;
  for (std::size_t n = 1; n <= 10; ++n) {
    auto block = random_bits_block(rng, n);
    LevelDistribution d = block_level_distribution(bsc, block);
    double s = std::sqrt(static_cast<double>(n));
    KahanSum b;
    for (std::size_t y : block) b.add(posterior_mean_llr_nats(bsc, y));
    double eta_lo = (d.levels.front() - b.value()) / s - 1.0;
    double eta_hi = (d.levels.back() - b.value()) / s + 1.0;
    std::vector<double> grid(100);
    for (int i = 0; i < 100; ++i) grid[i] = eta_lo + (eta_hi - eta_lo) * i / 99.0;
    worst = std::max(worst, verify_cdf_identity(bsc, block, grid));
  }
  r.pass = worst < 1e-9;
  r.detail = fmt("blocks n=1..10, sup discrepancy = %.3e (need < 1e-9)", worst);
  return r;
}

CriterionResult criterion_clt(std::uint64_t seed) {
  CriterionResult r{8, "CLT contraction (KS at n=4096 vs n=16)", false, "", 0.0};
  std::vector<std::size_t> n_list{16, 4096};
  auto points = clt_check(make_bsc(0.11), n_list, 100'000, CounterRng(seed).derive(40).seed());
  r.pass = points[1].ks < points[0].ks;
  r.detail = fmt("KS(16) = %.5f, KS(4096) = %.5f", points[0].ks, points[1].ks);
  return r;
}

CriterionResult criterion_tilting(std::uint64_t seed) {
  CriterionResult r{9, "tilting correctness", false, "", 0.0};
  SeqRng rng(CounterRng(seed).derive(50));
  double worst_fd = 0.0, worst_moment = 0.0, worst_margin = kInf;
  bool moment_lemma_ok = true;
  for (int trial = 0; trial < 100; ++trial) {
    DiscreteJointChannel ch =
        random_channel(rng, 2 + rng.bits() % 4, 2 + rng.bits() % 4, 0.05);
    double lambda = -2.0 + 5.0 * rng.unit_co();
    std::size_t y = rng.bits() % ch.ny();

    CumulantData c = cumulant(ch, lambda, y);
    FdDerivatives fd = fd_derivatives(ch, lambda, y, 1e-4);
    worst_fd = std::max({worst_fd, rel_err(fd.d1, c.d1), rel_err(fd.d2, c.d2),
                         rel_err(fd.d3, c.d3)});

    TiltedMeasure tm = tilted_measure(ch, lambda, y);
    double m1 = 0.0, m2 = 0.0, m3 = 0.0;
    for (std::size_t x = 0; x < ch.nx(); ++x) {
      if (tm.pmf[x] > 0.0) {
        double l = ch.log_likelihood_ratio(x, y);
        m1 += tm.pmf[x] * l;
      }
    }
    for (std::size_t x = 0; x < ch.nx(); ++x) {
      if (tm.pmf[x] > 0.0) {
        double d = ch.log_likelihood_ratio(x, y) - m1;
        m2 += tm.pmf[x] * d * d;
        m3 += tm.pmf[x] * d * d * d;
      }
    }
    worst_moment = std::max({worst_moment, std::abs(m1 - c.d1), std::abs(m2 - c.d2),
                             std::abs(m3 - c.d3)});

    double l1 = -2.0 + 4.0 * rng.unit_co();
    double l2 = l1 + 0.05 + rng.unit_co();
    worst_margin = std::min(worst_margin,
                            stochastic_dominance_check(ch, y, l1, l2).worst_margin);

    auto [lo, hi] = find_operating_interval(ch, 1e-2);
    std::vector<double> grid(21);
    for (int i = 0; i <= 20; ++i) grid[i] = lo + (hi - lo) * i / 20.0;
    int k = 1 + static_cast<int>(rng.bits() % 6);
    moment_lemma_ok = moment_lemma_ok && moment_bound_check(ch, y, k, grid);
  }
  bool dominance_ok = worst_margin >= -1e-12;
  r.pass = worst_fd < 1e-5 && worst_moment <= 1e-10 && dominance_ok && moment_lemma_ok;
  r.detail = fmt("100 triples: max FD rel err = %.2e (tol 1e-5), max moment residual = "
                 "%.2e (tol 1e-10), dominance margin >= %.1e, moment lemma %s",
                 worst_fd, worst_moment, worst_margin, moment_lemma_ok ? "ok" : "FAILED");
  return r;
}

CriterionResult criterion_ball_machinery(std::uint64_t seed) {
  CriterionResult r{10, "ball machinery (Gibbs + tail bound)", false, "", 0.0};
  DiscreteJointChannel bsc = make_bsc(0.11);
  RegularityConstants constants = assemble_regularity_constants(bsc);
  SeqRng rng(CounterRng(seed).derive(60));

  // Decoder-like conditioning sets: deduplicated posterior samples.
  std::size_t gibbs_pass = 0, full_space = 0;
  std::vector<CategoricalSampler> post;
  for (std::size_t y = 0; y < bsc.ny(); ++y) post.emplace_back(bsc.posterior_column(y));
  for (int trial = 0; trial < 500; ++trial) {
    std::size_t n = 8 + 2 * (trial % 3);  // 8, 10, 12
    auto block = random_bits_block(rng, n);
    double rate = 0.35 + 0.4 * rng.unit_co();
    std::size_t k = static_cast<std::size_t>(
        std::llround(std::pow(2.0, rate * static_cast<double>(n))));
    std::set<std::uint64_t> a_set;
    for (std::size_t i = 0; i < k; ++i) {
      std::uint64_t idx = 0;
      for (std::size_t j = 0; j < n; ++j)
        idx = idx * bsc.nx() + post[block[j]](rng.unit_co());
      a_set.insert(idx);
    }
    GibbsResult g = gibbs_check(
        bsc, block, [&](std::uint64_t idx) { return a_set.count(idx) > 0; }, constants);
    if (g.pass) ++gibbs_pass;
    if (g.b_is_full_space) ++full_space;
  }

  // Exact tail vs the packaged bound, radius I_e + 0.01 nats.
  double iota = mutual_information_nats(bsc) + 0.01;
  std::vector<double> slack;
  bool ball_ok = true;
  for (std::size_t n : {std::size_t{64}, std::size_t{256}, std::size_t{1024}}) {
    std::vector<std::size_t> block(n);
    for (std::size_t i = 0; i < n; ++i) block[i] = i % 2;
    BallBoundResult b = ball_probability_bound_check(bsc, block, constants, iota);
    ball_ok = ball_ok && b.holds && b.slack_bits > 0.0;
    slack.push_back(b.slack_bits);
  }
  double band = *std::max_element(slack.begin(), slack.end()) -
                *std::min_element(slack.begin(), slack.end());
  bool band_ok = band <= 8.0;

  r.pass = gibbs_pass == 500 && ball_ok && band_ok;
  r.detail = fmt("gibbs 500 trials: %zu pass (%zu degenerate full-space balls); tail bound "
                 "slack bits = [%.2f, %.2f, %.2f], band %.2f <= 8",
                 gibbs_pass, full_space, slack[0], slack[1], slack[2], band);
  return r;
}

CriterionResult criterion_typicality(std::uint64_t seed) {
  CriterionResult r{11, "typicality Chebyshev bound", false, "", 0.0};
  DiscreteJointChannel bsc = make_bsc(0.11);
  RegularityConstants c = assemble_regularity_constants(bsc);
  std::vector<double> grid = k_epsilon_grid(c.lambda_lo, c.lambda_hi, c.epsilon);
  bool ok = true;
  std::ostringstream detail;
  int part = 0;
  for (std::size_t n : {std::size_t{256}, std::size_t{1024}}) {
    TypicalitySweep s = typicality_mc_sweep(bsc, n, c.epsilon, grid, 10'000,
                                            CounterRng(seed).derive(70 + part).seed());
    ok = ok && s.holds;
    detail << (part ? "; " : "")
           << fmt("n=%zu: freq*n = %.3f <= C = %.3f", n,
                  s.atypical_frequency * static_cast<double>(n), s.chebyshev_c);
    ++part;
  }
  r.pass = ok;
  r.detail = detail.str();
  return r;
}

CriterionResult timed(CriterionResult (*f)(std::uint64_t), std::uint64_t seed,
                      double limit_seconds) {
  auto t0 = Clock::now();
  CriterionResult r = f(seed);
  r.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  if (limit_seconds > 0.0 && r.seconds >= limit_seconds) {
    r.pass = false;
    r.detail += fmt(" [runtime %.1fs exceeded %.0fs limit]", r.seconds, limit_seconds);
  }
  return r;
}

} // namespace

CriterionResult run_criterion(int id, std::uint64_t seed) {
  switch (id) {
    case 1: return timed(criterion_divergence_oracles, seed, 5.0);
    case 2: return timed(criterion_ordering, seed, 0.0);
    case 3: return timed(criterion_redundancy_law, seed, 120.0);
    case 4: return timed(criterion_singular_contrast, seed, 0.0);
    case 5: return timed(criterion_one_shot_bound, seed, 120.0);
    case 6: return timed(criterion_sampler_exactness, seed, 0.0);
    case 7: return timed(criterion_cdf_identity, seed, 0.0);
    case 8: return timed(criterion_clt, seed, 0.0);
    case 9: return timed(criterion_tilting, seed, 0.0);
    case 10: return timed(criterion_ball_machinery, seed, 0.0);
    case 11: return timed(criterion_typicality, seed, 0.0);
    default: throw ConfigError("unknown criterion id");
  }
}

std::vector<CriterionResult> run_acceptance_suite(std::uint64_t seed) {
  std::vector<CriterionResult> out;
  for (int id = 1; id <= 11; ++id) out.push_back(run_criterion(id, seed));
  return out;
}

std::string format_criterion_line(const CriterionResult& r) {
  return fmt("%s  criterion %2d: %s - %s (%.2fs)", r.pass ? "PASS" : "FAIL", r.id,
             r.name.c_str(), r.detail.c_str(), r.seconds);
}

} // namespace csd
