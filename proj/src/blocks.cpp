#include "csd/blocks.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <queue>

#include "csd/errors.hpp"
#include "csd/mathutil.hpp"
#include "csd/parallel.hpp"
#include "csd/rng.hpp"

namespace csd {

namespace {

constexpr double kLevelMergeTol = 1e-12;  // relative, on the nats scale

bool levels_equal(double a, double b) {
  return std::abs(a - b) <= kLevelMergeTol * std::max({1.0, std::abs(a), std::abs(b)});
}

} // namespace

double LevelDistribution::prior_mass(std::size_t i) const { return std::exp(log_prior[i]); }

double LevelDistribution::posterior_mass(std::size_t i) const {
  return std::exp(levels[i] + log_prior[i]);
}

double LevelDistribution::zero_bucket_prior_mass() const {
  return -std::expm1(log_nonzero_mass);
}

std::vector<double> LevelDistribution::log_prior_tail() const {
  std::vector<double> tail(levels.size());
  double acc = kNegInf;
  for (std::size_t i = levels.size(); i-- > 0;) {
    acc = log_add(acc, log_prior[i]);
    tail[i] = acc;
  }
  return tail;
}

LogWidthSegments LevelDistribution::prior_width() const {
  LogWidthSegments s;
  s.log_levels = levels;
  s.log_tail_mass = log_prior_tail();
  return s;
}

double LevelDistribution::log_prior_tail_at(double threshold) const {
  double acc = kNegInf;
  for (std::size_t i = levels.size(); i-- > 0;) {
    if (levels[i] < threshold) break;
    acc = log_add(acc, log_prior[i]);
  }
  return acc;
}

LevelDistribution letter_level_distribution(const DiscreteJointChannel& ch, std::size_t y) {
  struct Atom {
    double level, mass;
  };
  std::vector<Atom> atoms;
  double zero_mass = 0.0;
  for (std::size_t x = 0; x < ch.nx(); ++x) {
    double p = ch.marginal_x(x);
    if (ch.posterior(x, y) > 0.0)
      atoms.push_back({ch.log_likelihood_ratio(x, y), p});
    else
      zero_mass += p;
  }
  std::sort(atoms.begin(), atoms.end(),
            [](const Atom& a, const Atom& b) { return a.level < b.level; });
  LevelDistribution d;
  d.n = 1;
  for (const Atom& a : atoms) {
    if (!d.levels.empty() && levels_equal(d.levels.back(), a.level)) {
      d.log_prior.back() = log_add(d.log_prior.back(), std::log(a.mass));
    } else {
      d.levels.push_back(a.level);
      d.log_prior.push_back(std::log(a.mass));
    }
  }
  d.log_nonzero_mass = zero_mass > 0.0 ? std::log1p(-zero_mass) : 0.0;
  return d;
}

LevelDistribution convolve(const LevelDistribution& a, const LevelDistribution& b,
                           const ConvolveOptions& opts) {
  if (a.size() == 0 || b.size() == 0) {
    // A block whose ratio is almost surely zero; keep the empty finite part.
    LevelDistribution d;
    d.n = a.n + b.n;
    d.log_nonzero_mass = a.log_nonzero_mass + b.log_nonzero_mass;
    return d;
  }
  if (a.size() * b.size() > 100'000'000)
    throw BlockTooLarge("convolution pair count exceeds the work cap");

  // k-way merge over the b.size() sorted streams {a.levels + b.levels[j]}.
  struct Head {
    double level;
    std::size_t i, j;
  };
  auto cmp = [](const Head& l, const Head& r) { return l.level > r.level; };
  std::priority_queue<Head, std::vector<Head>, decltype(cmp)> heap(cmp);
  for (std::size_t j = 0; j < b.size(); ++j) heap.push({a.levels[0] + b.levels[j], 0, j});

  LevelDistribution d;
  d.n = a.n + b.n;
  d.log_nonzero_mass = a.log_nonzero_mass + b.log_nonzero_mass;
  while (!heap.empty()) {
    Head h = heap.top();
    heap.pop();
    double lm = a.log_prior[h.i] + b.log_prior[h.j];
    if (!d.levels.empty() && levels_equal(d.levels.back(), h.level)) {
      d.log_prior.back() = log_add(d.log_prior.back(), lm);
    } else {
      if (d.levels.size() >= opts.max_levels)
        throw BlockTooLarge("merged level support exceeds max_levels");
      d.levels.push_back(h.level);
      d.log_prior.push_back(lm);
    }
    if (h.i + 1 < a.size()) heap.push({a.levels[h.i + 1] + b.levels[h.j], h.i + 1, h.j});
  }
  return d;
}

LevelDistribution convolution_power(const LevelDistribution& d, std::size_t n,
                                    const ConvolveOptions& opts) {
  LevelDistribution acc;
  acc.n = 0;
  acc.levels = {0.0};
  acc.log_prior = {0.0};
  acc.log_nonzero_mass = 0.0;
  LevelDistribution base = d;
  std::size_t k = n;
  while (k > 0) {
    if (k & 1) acc = convolve(acc, base, opts);
    k >>= 1;
    if (k > 0) base = convolve(base, base, opts);
  }
  return acc;
}

LevelDistribution block_level_distribution(const DiscreteJointChannel& ch,
                                           std::span<const std::size_t> y_block,
                                           const ConvolveOptions& opts) {
  if (y_block.empty()) throw ConfigError("y_block must be non-empty");
  std::vector<std::size_t> counts(ch.ny(), 0);
  for (std::size_t y : y_block) {
    if (y >= ch.ny()) throw ConfigError("y_block symbol out of range");
    ++counts[y];
  }
  // Convolve per-symbol powers in canonical y order, so the result depends on
  // the block only through its type.
  LevelDistribution acc;
  acc.n = 0;
  acc.levels = {0.0};
  acc.log_prior = {0.0};
  bool first = true;
  for (std::size_t y = 0; y < ch.ny(); ++y) {
    if (counts[y] == 0) continue;
    LevelDistribution part = convolution_power(letter_level_distribution(ch, y), counts[y], opts);
    acc = first ? std::move(part) : convolve(acc, part, opts);
    first = false;
  }
  return acc;
}

double block_csd_nats(const LevelDistribution& d) {
  if (d.size() == 0) return 0.0;
  return lw_dcs_nats(d.prior_width());
}

double block_csd_bits(const LevelDistribution& d) { return nats_to_bits(block_csd_nats(d)); }

double block_kl_bits(const LevelDistribution& d) {
  KahanSum s;
  for (std::size_t i = 0; i < d.size(); ++i) {
    double lq = d.log_posterior(i);
    s.add(std::exp(lq) * d.levels[i]);
  }
  return nats_to_bits(s.value());
}

double posterior_mean_llr_nats(const DiscreteJointChannel& ch, std::size_t y) {
  KahanSum s;
  for (std::size_t x = 0; x < ch.nx(); ++x) {
    double p = ch.posterior(x, y);
    if (p > 0.0) s.add(p * ch.log_likelihood_ratio(x, y));
  }
  return s.value();
}

namespace {

bool distributions_equal(const LevelDistribution& a, const LevelDistribution& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!levels_equal(a.levels[i], b.levels[i])) return false;
    if (std::abs(a.log_prior[i] - b.log_prior[i]) > 1e-12) return false;
  }
  return std::abs(a.log_nonzero_mass - b.log_nonzero_mass) <= 1e-12;
}

bool same_bits(const LevelDistribution& a, const LevelDistribution& b) {
  return a.levels == b.levels && a.log_prior == b.log_prior &&
         a.log_nonzero_mass == b.log_nonzero_mass;
}

// Declared symmetry guard: a permuted block must reproduce the canonical
// LevelDistribution bit for bit.
void validate_permutation_determinism(const DiscreteJointChannel& ch) {
  std::size_t n = 8;
  SeqRng rng(0x5ca1ab1eULL);
  std::vector<std::size_t> block(n);
  for (auto& y : block) y = static_cast<std::size_t>(rng.bits() % ch.ny());
  LevelDistribution ref = block_level_distribution(ch, block);
  for (int trial = 0; trial < 10; ++trial) {
    for (std::size_t i = n - 1; i > 0; --i)
      std::swap(block[i], block[rng.bits() % (i + 1)]);
    if (!same_bits(ref, block_level_distribution(ch, block)))
      throw SymmetryRequired("permuting a y-block changed its level distribution");
  }
}

// Distinct per-letter level distributions with their total y-mass.
struct LetterClasses {
  std::vector<LevelDistribution> dist;
  std::vector<double> prob;
};

LetterClasses group_letter_classes(const DiscreteJointChannel& ch) {
  LetterClasses cls;
  for (std::size_t y = 0; y < ch.ny(); ++y) {
    LevelDistribution d = letter_level_distribution(ch, y);
    bool matched = false;
    for (std::size_t c = 0; c < cls.dist.size(); ++c) {
      if (distributions_equal(cls.dist[c], d)) {
        cls.prob[c] += ch.marginal_y(y);
        matched = true;
        break;
      }
    }
    if (!matched) {
      cls.dist.push_back(std::move(d));
      cls.prob.push_back(ch.marginal_y(y));
    }
  }
  return cls;
}

} // namespace

ExpectedCsd expected_block_csd_exact(const DiscreteJointChannel& ch, std::size_t n,
                                     const ConvolveOptions& opts) {
  if (!ch.y_symmetric_declared())
    throw SymmetryRequired("exact mode requires a channel declared y_symmetric");
  validate_permutation_determinism(ch);
  LetterClasses cls = group_letter_classes(ch);

  ExpectedCsd out;
  out.mode = "exact";
  if (cls.dist.size() == 1) {
    // All conditionals share one level distribution, so every type gives the
    // same block divergence and the multinomial weights sum to one.
    out.nats = block_csd_nats(convolution_power(cls.dist[0], n, opts));
    out.bits = nats_to_bits(out.nats);
    return out;
  }

  // Type enumeration over distribution classes with multinomial weights.
  std::size_t c_count = cls.dist.size();
  double type_count = 1.0;
  for (std::size_t i = 1; i < c_count; ++i)
    type_count *= static_cast<double>(n + i) / static_cast<double>(i);
  if (type_count > 100'000.0)
    throw BlockTooLarge("type enumeration too large for exact mode; use Monte Carlo");

  std::vector<double> log_prob(c_count);
  for (std::size_t c = 0; c < c_count; ++c) log_prob[c] = std::log(cls.prob[c]);

  // Memoized per-class convolution powers.
  std::map<std::pair<std::size_t, std::size_t>, LevelDistribution> powers;
  auto power_of = [&](std::size_t c, std::size_t m) -> const LevelDistribution& {
    auto key = std::make_pair(c, m);
    auto it = powers.find(key);
    if (it == powers.end())
      it = powers.emplace(key, convolution_power(cls.dist[c], m, opts)).first;
    return it->second;
  };

  KahanSum mean_nats;
  std::vector<std::size_t> counts(c_count, 0);
  double lgn = std::lgamma(static_cast<double>(n) + 1.0);
  std::function<void(std::size_t, std::size_t)> walk = [&](std::size_t c, std::size_t left) {
    if (c + 1 == c_count) {
      counts[c] = left;
      double lw = lgn;
      for (std::size_t i = 0; i < c_count; ++i) {
        lw -= std::lgamma(static_cast<double>(counts[i]) + 1.0);
        lw += static_cast<double>(counts[i]) * log_prob[i];
      }
      LevelDistribution block;
      bool first = true;
      for (std::size_t i = 0; i < c_count; ++i) {
        if (counts[i] == 0) continue;
        const LevelDistribution& part = power_of(i, counts[i]);
        block = first ? part : convolve(block, part, opts);
        first = false;
      }
      mean_nats.add(std::exp(lw) * block_csd_nats(block));
      return;
    }
    for (std::size_t m = 0; m <= left; ++m) {
      counts[c] = m;
      walk(c + 1, left - m);
    }
  };
  walk(0, n);
  out.nats = mean_nats.value();
  out.bits = nats_to_bits(out.nats);
  return out;
}

ExpectedCsd expected_block_csd_mc(const DiscreteJointChannel& ch, std::size_t n,
                                  const McOptions& mc, const ConvolveOptions& opts) {
  if (mc.samples < 1) throw ConfigError("monte_carlo mode requires samples >= 1");
  CategoricalSampler sample_y(ch.marginal_y());
  CounterRng rng(mc.seed);

  LetterClasses cls = group_letter_classes(ch);
  std::vector<std::size_t> y_to_class(ch.ny());
  for (std::size_t y = 0; y < ch.ny(); ++y) {
    LevelDistribution d = letter_level_distribution(ch, y);
    for (std::size_t c = 0; c < cls.dist.size(); ++c)
      if (distributions_equal(cls.dist[c], d)) {
        y_to_class[y] = c;
        break;
      }
  }

  // D_CS depends on the block only through its class counts; cache per type.
  std::map<std::vector<std::size_t>, double> cache;
  std::vector<double> values(mc.samples);
  std::vector<std::vector<std::size_t>> types(mc.samples);
  for (std::size_t s = 0; s < mc.samples; ++s) {
    std::vector<std::size_t> counts(cls.dist.size(), 0);
    for (std::size_t i = 0; i < n; ++i)
      ++counts[y_to_class[sample_y(rng.unit_co(s * n + i))]];
    types[s] = std::move(counts);
  }
  for (std::size_t s = 0; s < mc.samples; ++s) {
    auto it = cache.find(types[s]);
    if (it == cache.end()) {
      LevelDistribution block;
      bool first = true;
      for (std::size_t c = 0; c < cls.dist.size(); ++c) {
        if (types[s][c] == 0) continue;
        LevelDistribution part = convolution_power(cls.dist[c], types[s][c], opts);
        block = first ? std::move(part) : convolve(block, part, opts);
        first = false;
      }
      it = cache.emplace(types[s], block_csd_bits(block)).first;
    }
    values[s] = it->second;
  }
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(mc.samples);
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  var = mc.samples > 1 ? var / static_cast<double>(mc.samples - 1) : 0.0;

  ExpectedCsd out;
  out.mode = "mc";
  out.bits = mean;
  out.nats = bits_to_nats(mean);
  out.stderr_bits = std::sqrt(var / static_cast<double>(mc.samples));
  return out;
}

std::vector<RedundancyCurvePoint> redundancy_curve(const DiscreteJointChannel& ch,
                                                   std::span<const std::size_t> n_list,
                                                   const RedundancyOptions& opts) {
  for (std::size_t i = 1; i < n_list.size(); ++i)
    if (n_list[i] <= n_list[i - 1]) throw ConfigError("n_list must be strictly increasing");
  double mi_nats = mutual_information_nats(ch);
  bool exact = opts.prefer_exact && ch.y_symmetric_declared();

  std::vector<RedundancyCurvePoint> out;
  out.reserve(n_list.size());
  for (std::size_t n : n_list) {
    ExpectedCsd e = exact ? expected_block_csd_exact(ch, n, opts.conv)
                          : expected_block_csd_mc(ch, n, opts.mc, opts.conv);
    RedundancyCurvePoint p;
    p.n = n;
    p.expected_dcs = e.bits;
    p.block_mi = nats_to_bits(static_cast<double>(n) * mi_nats);
    // Subtract in nats first: for singular channels the two sides are the
    // same floating-point value and the gap is an exact zero.
    double gap_nats = e.nats - static_cast<double>(n) * mi_nats;
    p.gap = nats_to_bits(gap_nats);
    p.gap_over_lbn = n >= 2 ? p.gap / std::log2(static_cast<double>(n)) : 0.0;
    p.stderr_bits = e.stderr_bits;
    p.mode = e.mode;
    p.seed = exact ? 0 : opts.mc.seed;
    out.push_back(p);
  }
  return out;
}

double verify_cdf_identity(const DiscreteJointChannel& ch,
                           std::span<const std::size_t> y_block,
                           std::span<const double> t_grid, const ConvolveOptions& opts) {
  LevelDistribution d = block_level_distribution(ch, y_block, opts);
  double s = std::sqrt(static_cast<double>(y_block.size()));
  KahanSum b_acc;
  for (std::size_t y : y_block) b_acc.add(posterior_mean_llr_nats(ch, y));
  double b = b_acc.value();

  double worst = 0.0;
  for (double t : t_grid) {
    double c = s * t + b;
    // Left side: integral of the prior width function up to e^c, evaluated
    // per segment; collapses to sum_i p_i min(e^{level_i}, e^c).
    KahanSum lhs;
    for (std::size_t i = 0; i < d.size(); ++i)
      lhs.add(std::exp(d.log_prior[i] + std::min(d.levels[i], c)));
    // Right side: posterior tail plus the exponentially damped sum over
    // posterior levels at or above t.
    KahanSum rhs;
    for (std::size_t i = 0; i < d.size(); ++i) {
      double eta = (d.levels[i] - b) / s;
      if (eta < t)
        rhs.add(std::exp(d.log_posterior(i)));
      else
        rhs.add(std::exp(d.log_posterior(i) - s * (eta - t)));
    }
    worst = std::max(worst, std::abs(lhs.value() - rhs.value()));
  }
  return worst;
}

namespace {

std::vector<CltPoint> clt_check_impl(const std::function<double(SeqRng&)>& draw_letter,
                                     double target_var, std::span<const std::size_t> n_list,
                                     std::size_t samples, std::uint64_t seed) {
  if (samples < 1) throw ConfigError("clt_check requires samples >= 1");
  std::vector<CltPoint> out;
  double sd = std::sqrt(target_var);
  for (std::size_t n : n_list) {
    std::vector<double> stats(samples);
    CounterRng master(seed);
    parallel_for(samples, [&](std::size_t lo, std::size_t hi) {
      for (std::size_t j = lo; j < hi; ++j) {
        SeqRng rng(master.derive(j ^ (static_cast<std::uint64_t>(n) << 32)));
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) acc += draw_letter(rng);
        stats[j] = acc / std::sqrt(static_cast<double>(n));
      }
    });
    double ks = ks_distance(std::move(stats),
                            [sd](double x) { return normal_cdf(x / sd); });
    out.push_back({n, ks});
  }
  return out;
}

} // namespace

std::vector<CltPoint> clt_check(const DiscreteJointChannel& ch,
                                std::span<const std::size_t> n_list, std::size_t samples,
                                std::uint64_t seed) {
  LogLikelihoodStats stats = llr_stats(ch);
  if (stats.mean_conditional_var <= 0.0)
    throw SingularChannel("clt_check requires a non-singular channel");

  CategoricalSampler sample_y(ch.marginal_y());
  std::vector<CategoricalSampler> sample_x_given_y;
  sample_x_given_y.reserve(ch.ny());
  std::vector<std::vector<double>> centered(ch.ny(), std::vector<double>(ch.nx()));
  for (std::size_t y = 0; y < ch.ny(); ++y) {
    sample_x_given_y.emplace_back(ch.posterior_column(y));
    double kappa = posterior_mean_llr_nats(ch, y);
    for (std::size_t x = 0; x < ch.nx(); ++x) {
      double l = ch.posterior(x, y) > 0.0 ? ch.log_likelihood_ratio(x, y) : 0.0;
      centered[y][x] = l - kappa;
    }
  }
  auto draw = [&](SeqRng& rng) {
    std::size_t y = sample_y(rng.unit_co());
    std::size_t x = sample_x_given_y[y](rng.unit_co());
    return centered[y][x];
  };
  return clt_check_impl(draw, stats.mean_conditional_var, n_list, samples, seed);
}

std::vector<CltPoint> clt_check(const GaussianChannel& ch, std::span<const std::size_t> n_list,
                                std::size_t samples, std::uint64_t seed) {
  LogLikelihoodStats stats = llr_stats(ch);
  auto draw = [&](SeqRng& rng) {
    double x = ch.sigma_x * rng.normal();
    double y = x + ch.sigma_n * rng.normal();
    return ch.log_likelihood_ratio(x, y) - ch.conditional_mean_llr(y);
  };
  return clt_check_impl(draw, stats.mean_conditional_var, n_list, samples, seed);
}

} // namespace csd
