#include "csd/tilting.hpp"

#include <algorithm>
#include <cmath>

#include "csd/errors.hpp"
#include "csd/mathutil.hpp"
#include "csd/parallel.hpp"
#include "csd/rng.hpp"

namespace csd {

namespace {

constexpr std::uint64_t kEnumerationCap = 1ULL << 22;

// (ln r, prior mass) pairs on the support of r(.|y).
struct SupportAtoms {
  std::vector<double> llr;
  std::vector<double> mass;
};

SupportAtoms support_atoms(const DiscreteJointChannel& ch, std::size_t y) {
  SupportAtoms s;
  for (std::size_t x = 0; x < ch.nx(); ++x) {
    if (ch.posterior(x, y) > 0.0) {
      s.llr.push_back(ch.log_likelihood_ratio(x, y));
      s.mass.push_back(ch.marginal_x(x));
    }
  }
  if (s.llr.empty()) throw ConfigError("r(.|y) has empty support");
  return s;
}

// Normalized tilted weights exp(ln p + lambda ln r - Lambda).
std::vector<double> tilted_weights(const SupportAtoms& s, double lambda, double* lambda_out) {
  std::vector<double> a(s.llr.size());
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = std::log(s.mass[i]) + lambda * s.llr[i];
  double lse = log_sum_exp(a);
  if (lambda_out) *lambda_out = lse;
  std::vector<double> w(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) w[i] = std::exp(a[i] - lse);
  return w;
}

} // namespace

CumulantData cumulant(const DiscreteJointChannel& ch, double lambda, std::size_t y) {
  SupportAtoms s = support_atoms(ch, y);
  CumulantData c;
  c.lambda = lambda;
  c.y = y;
  std::vector<double> w = tilted_weights(s, lambda, &c.value);
  KahanSum m1;
  for (std::size_t i = 0; i < w.size(); ++i) m1.add(w[i] * s.llr[i]);
  c.d1 = m1.value();
  KahanSum m2, m3;
  for (std::size_t i = 0; i < w.size(); ++i) {
    double d = s.llr[i] - c.d1;
    m2.add(w[i] * d * d);
    m3.add(w[i] * d * d * d);
  }
  c.d2 = m2.value();
  c.d3 = m3.value();
  return c;
}

TiltedMeasure tilted_measure(const DiscreteJointChannel& ch, double lambda, std::size_t y) {
  SupportAtoms s = support_atoms(ch, y);
  double lse = 0.0;
  std::vector<double> w = tilted_weights(s, lambda, &lse);
  TiltedMeasure t;
  t.lambda = lambda;
  t.y = y;
  t.pmf.assign(ch.nx(), 0.0);
  std::size_t k = 0;
  for (std::size_t x = 0; x < ch.nx(); ++x)
    if (ch.posterior(x, y) > 0.0) t.pmf[x] = w[k++];
  return t;
}

BlockTiltStats block_tilt_stats(const DiscreteJointChannel& ch, double lambda,
                                std::span<const std::size_t> y_block) {
  BlockTiltStats b;
  b.lambda = lambda;
  KahanSum s2, m3;
  for (std::size_t y : y_block) {
    s2.add(cumulant(ch, lambda, y).d2);
    m3.add(tilted_abs_moment(ch, lambda, y, 3));
  }
  b.s_n_sq = s2.value();
  b.mu3 = m3.value();
  return b;
}

double tilted_abs_moment(const DiscreteJointChannel& ch, double lambda, std::size_t y, int k) {
  SupportAtoms s = support_atoms(ch, y);
  std::vector<double> w = tilted_weights(s, lambda, nullptr);
  KahanSum acc;
  for (std::size_t i = 0; i < w.size(); ++i)
    acc.add(w[i] * std::pow(std::abs(s.llr[i]), k));
  return acc.value();
}

double tilted_signed_moment(const DiscreteJointChannel& ch, double lambda, std::size_t y, int k) {
  SupportAtoms s = support_atoms(ch, y);
  std::vector<double> w = tilted_weights(s, lambda, nullptr);
  KahanSum acc;
  for (std::size_t i = 0; i < w.size(); ++i) acc.add(w[i] * std::pow(s.llr[i], k));
  return acc.value();
}

double block_cumulant_d1(const DiscreteJointChannel& ch, double lambda,
                         std::span<const std::size_t> y_block) {
  KahanSum acc;
  for (std::size_t y : y_block) acc.add(cumulant(ch, lambda, y).d1);
  return acc.value() / static_cast<double>(y_block.size());
}

DominanceResult stochastic_dominance_check(const DiscreteJointChannel& ch, std::size_t y,
                                           double lambda1, double lambda2) {
  if (!(lambda1 < lambda2)) throw ConfigError("dominance check requires lambda1 < lambda2");
  SupportAtoms s = support_atoms(ch, y);
  std::vector<double> w1 = tilted_weights(s, lambda1, nullptr);
  std::vector<double> w2 = tilted_weights(s, lambda2, nullptr);

  std::vector<std::size_t> order(s.llr.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return s.llr[a] > s.llr[b]; });

  // Tail margins are meaningful only at level boundaries; tied levels must be
  // absorbed together before comparing.
  DominanceResult r;
  r.worst_margin = kInf;
  double t1 = 0.0, t2 = 0.0;
  for (std::size_t k = 0; k < order.size();) {
    std::size_t j = k;
    while (j < order.size() &&
           std::abs(s.llr[order[j]] - s.llr[order[k]]) <=
               1e-12 * std::max({1.0, std::abs(s.llr[order[j]]), std::abs(s.llr[order[k]])}))
      ++j;
    for (std::size_t i = k; i < j; ++i) {
      t1 += w1[order[i]];
      t2 += w2[order[i]];
    }
    r.worst_margin = std::min(r.worst_margin, t2 - t1);
    k = j;
  }
  r.dominated = r.worst_margin >= -1e-12;
  return r;
}

bool moment_bound_check(const DiscreteJointChannel& ch, std::size_t y, int k,
                        std::span<const double> lambda_grid) {
  if (lambda_grid.size() < 2) throw ConfigError("moment_bound_check needs a grid");
  double lo = lambda_grid.front(), hi = lambda_grid.back();
  double sup = -kInf;
  for (double l : lambda_grid) sup = std::max(sup, tilted_abs_moment(ch, l, y, k));
  double bound = tilted_abs_moment(ch, hi, y, k) + tilted_abs_moment(ch, lo, y, k);
  return sup <= bound + 1e-9;
}

namespace {

// E_Y Var_{Q^lambda}[ln r | Y].
double mean_tilted_variance(const DiscreteJointChannel& ch, double lambda) {
  KahanSum acc;
  for (std::size_t y = 0; y < ch.ny(); ++y) acc.add(ch.marginal_y(y) * cumulant(ch, lambda, y).d2);
  return acc.value();
}

// E_Y E_{Q^lambda}[ln r | Y].
double mean_tilted_mean(const DiscreteJointChannel& ch, double lambda) {
  KahanSum acc;
  for (std::size_t y = 0; y < ch.ny(); ++y) acc.add(ch.marginal_y(y) * cumulant(ch, lambda, y).d1);
  return acc.value();
}

double mean_tilted_abs_moment(const DiscreteJointChannel& ch, double lambda, int k) {
  KahanSum acc;
  for (std::size_t y = 0; y < ch.ny(); ++y)
    acc.add(ch.marginal_y(y) * tilted_abs_moment(ch, lambda, y, k));
  return acc.value();
}

} // namespace

std::pair<double, double> find_operating_interval(const DiscreteJointChannel& ch,
                                                  double grid_resolution) {
  if (!(grid_resolution > 0.0)) throw ConfigError("grid_resolution must be positive");
  double v1 = mean_tilted_variance(ch, 1.0);
  if (v1 <= 1e-18)
    throw SingularChannel("operating interval undefined: E_Y Var[ln r | Y] = 0 at lambda = 1");
  double floor = 0.5 * v1;
  // All moments are finite on a finite alphabet; the only active constraint is
  // the variance floor, which both tails eventually violate.
  std::size_t max_steps = static_cast<std::size_t>(49.0 / grid_resolution);
  std::size_t k = 0;
  while (k < max_steps) {
    double step = static_cast<double>(k + 1) * grid_resolution;
    if (mean_tilted_variance(ch, 1.0 - step) < floor ||
        mean_tilted_variance(ch, 1.0 + step) < floor)
      break;
    ++k;
  }
  if (k == 0)
    throw SingularChannel("variance floor fails immediately next to lambda = 1");
  double width = static_cast<double>(k) * grid_resolution;
  return {1.0 - width, 1.0 + width};
}

std::vector<double> k_epsilon_grid(double lambda_lo, double lambda_hi, double epsilon) {
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive");
  std::vector<double> grid;
  for (double l = lambda_lo; l < lambda_hi; l += epsilon) grid.push_back(l);
  grid.push_back(lambda_hi);
  return grid;
}

namespace {

// U_k = E_Y E_{Q^lo}|ln r|^k + E_Y E_{Q^hi}|ln r|^k + 2 eps, the typical-block
// bound on averaged absolute tilted moments.
double moment_u(const DiscreteJointChannel& ch, double lo, double hi, int k, double eps) {
  return mean_tilted_abs_moment(ch, lo, k) + mean_tilted_abs_moment(ch, hi, k) + 2.0 * eps;
}

double m3_bound(const DiscreteJointChannel& ch, double lo, double hi, double eps) {
  double u1 = moment_u(ch, lo, hi, 1, eps);
  double u2 = moment_u(ch, lo, hi, 2, eps);
  double u3 = moment_u(ch, lo, hi, 3, eps);
  return u3 + 3.0 * u1 * u2 + 2.0 * u1 * u1 * u1;
}

double grid_min_variance(const DiscreteJointChannel& ch, double lo, double hi, double res) {
  double v = kInf;
  for (double l = lo; l < hi + 0.5 * res; l += res) v = std::min(v, mean_tilted_variance(ch, l));
  return v;
}

} // namespace

double max_admissible_epsilon(const DiscreteJointChannel& ch, double lambda_lo,
                              double lambda_hi, double grid_resolution) {
  double ie = mutual_information_nats(ch);
  double mean_hi = mean_tilted_mean(ch, lambda_hi);
  double mean_lo = mean_tilted_mean(ch, lambda_lo);
  double e1 = (mean_hi - ie) / 3.0;
  double e2 = (ie - mean_lo) / 3.0;
  if (e1 <= 0.0 || e2 <= 0.0)
    throw SingularChannel("tilted means at the interval endpoints do not straddle I");
  double inf_var = grid_min_variance(ch, lambda_lo, lambda_hi, grid_resolution);
  // m2_lo = inf_var - (2 + m3_hi(eps)) eps must stay positive; m3_hi grows
  // with eps so iterate the bound downward.
  double e3 = inf_var / (2.0 + m3_bound(ch, lambda_lo, lambda_hi, 0.0));
  for (int i = 0; i < 32; ++i) {
    double next = inf_var / (2.0 + m3_bound(ch, lambda_lo, lambda_hi, e3));
    if (std::abs(next - e3) < 1e-14) break;
    e3 = next;
  }
  return std::min({e1, e2, e3});
}

RegularityConstants assemble_regularity_constants(const DiscreteJointChannel& ch,
                                                  double grid_resolution, double epsilon) {
  RegularityConstants c;
  auto [lo, hi] = find_operating_interval(ch, grid_resolution);
  c.lambda_lo = lo;
  c.lambda_hi = hi;

  double eps_max = max_admissible_epsilon(ch, lo, hi, grid_resolution);
  if (epsilon <= 0.0) {
    c.epsilon = 0.9 * eps_max;
  } else {
    if (epsilon >= eps_max)
      throw ConfigError("epsilon violates the typicality construction inequalities");
    c.epsilon = epsilon;
  }

  double u1 = moment_u(ch, lo, hi, 1, c.epsilon);
  double u2 = moment_u(ch, lo, hi, 2, c.epsilon);
  c.m2_hi = u2 + u1 * u1;
  c.m3_hi = m3_bound(ch, lo, hi, c.epsilon);
  double inf_var = grid_min_variance(ch, lo, hi, grid_resolution);
  c.m2_lo = inf_var - 2.0 * c.epsilon - c.m3_hi * c.epsilon;
  if (c.m2_lo <= 0.0) throw ConfigError("variance floor m2_lo is not positive");

  // n0: smallest n with gamma > 1/2 across the (lambda, s^2/n, mu/n) box;
  // gamma > 1/2 solves to n > 4 (1+(1+2t)^2)^2 / (e lambda^2 (1+2t)^2 m2).
  // M_lo: the box minimum of M_n at n0 (M_n is nondecreasing in n).
  double n0 = 0.0;
  auto for_box = [&](auto&& f) {
    constexpr int kGrid = 16;
    for (int il = 0; il <= kGrid; ++il) {
      double lambda = lo + (hi - lo) * il / kGrid;
      for (int im = 0; im <= kGrid; ++im) {
        double m2 = c.m2_lo + (c.m2_hi - c.m2_lo) * im / kGrid;
        for (int iu = 0; iu <= kGrid; ++iu) {
          double mu = c.m3_hi * iu / kGrid;
          f(lambda, m2, mu);
        }
      }
    }
  };
  for_box([&](double lambda, double m2, double mu) {
    double t = 2.0 * std::sqrt(2.0 * M_PI) * lambda * mu / m2;
    double q = 1.0 + (1.0 + 2.0 * t) * (1.0 + 2.0 * t);
    double s_req = 2.0 * q / (lambda * (1.0 + 2.0 * t) * std::sqrt(M_E));
    n0 = std::max(n0, s_req * s_req / m2);
  });
  c.n0 = n0;

  double log_m = kInf;
  for_box([&](double lambda, double m2, double mu) {
    double t = 2.0 * std::sqrt(2.0 * M_PI) * lambda * mu / m2;
    double s = std::sqrt(n0 * m2);
    double gamma = 1.0 - (1.0 + (1.0 + 2.0 * t) * (1.0 + 2.0 * t)) /
                             (lambda * (1.0 + 2.0 * t) * std::sqrt(M_E) * s);
    gamma = std::max(gamma, 0.5);  // at n0 every box point satisfies gamma > 1/2
    double lm = std::log1p(2.0 * t) + std::log(gamma) -
                std::log(2.0 * lambda * std::sqrt(2.0 * M_PI * m2)) - 2.0 * t;
    log_m = std::min(log_m, lm);
  });
  c.log_m_lo = log_m;
  c.m_lo = std::exp(log_m);  // underflows to 0 when 2t is large
  return c;
}

double m_lower(double lambda, double s, double mu, double n) {
  double t = 2.0 * std::sqrt(2.0 * M_PI) * lambda * mu / (s * s);
  double one2t = 1.0 + 2.0 * t;
  double gamma = 1.0 - (1.0 + one2t * one2t) / (lambda * one2t * std::sqrt(M_E) * s);
  if (gamma <= 0.0)
    return one2t * gamma * std::sqrt(n) / (2.0 * lambda * std::sqrt(2.0 * M_PI) * s) *
           std::exp(-2.0 * t);
  return std::exp(std::log1p(2.0 * t) + std::log(gamma) + 0.5 * std::log(n) -
                  std::log(2.0 * lambda * std::sqrt(2.0 * M_PI) * s) - 2.0 * t);
}

double m_lower_log(double lambda, double s, double mu, double n) {
  double t = 2.0 * std::sqrt(2.0 * M_PI) * lambda * mu / (s * s);
  double one2t = 1.0 + 2.0 * t;
  double gamma = 1.0 - (1.0 + one2t * one2t) / (lambda * one2t * std::sqrt(M_E) * s);
  if (gamma <= 0.0) return kNegInf;
  return std::log1p(2.0 * t) + std::log(gamma) + 0.5 * std::log(n) -
         std::log(2.0 * lambda * std::sqrt(2.0 * M_PI) * s) - 2.0 * t;
}

namespace {

struct StatTables {
  // [grid][j-1][y] for j in {1,2,3}
  std::vector<std::vector<std::vector<double>>> abs_stat, sgn_stat;
  std::vector<std::vector<double>> abs_mean, sgn_mean;  // population means
  std::vector<std::vector<double>> abs_var, sgn_var;    // population variances
  std::vector<double> kappa;                            // per-y posterior mean llr
  double kappa_mean = 0.0, kappa_var = 0.0;
};

StatTables build_stat_tables(const DiscreteJointChannel& ch,
                             std::span<const double> lambda_grid) {
  StatTables t;
  std::size_t g = lambda_grid.size();
  t.abs_stat.assign(g, std::vector<std::vector<double>>(3, std::vector<double>(ch.ny())));
  t.sgn_stat = t.abs_stat;
  t.abs_mean.assign(g, std::vector<double>(3, 0.0));
  t.sgn_mean = t.abs_mean;
  t.abs_var = t.abs_mean;
  t.sgn_var = t.abs_mean;
  for (std::size_t i = 0; i < g; ++i)
    for (int j = 1; j <= 3; ++j)
      for (std::size_t y = 0; y < ch.ny(); ++y) {
        t.abs_stat[i][j - 1][y] = tilted_abs_moment(ch, lambda_grid[i], y, j);
        t.sgn_stat[i][j - 1][y] = tilted_signed_moment(ch, lambda_grid[i], y, j);
      }
  for (std::size_t i = 0; i < g; ++i)
    for (int j = 0; j < 3; ++j) {
      double ma = 0.0, ms = 0.0;
      for (std::size_t y = 0; y < ch.ny(); ++y) {
        ma += ch.marginal_y(y) * t.abs_stat[i][j][y];
        ms += ch.marginal_y(y) * t.sgn_stat[i][j][y];
      }
      t.abs_mean[i][j] = ma;
      t.sgn_mean[i][j] = ms;
      double va = 0.0, vs = 0.0;
      for (std::size_t y = 0; y < ch.ny(); ++y) {
        va += ch.marginal_y(y) * (t.abs_stat[i][j][y] - ma) * (t.abs_stat[i][j][y] - ma);
        vs += ch.marginal_y(y) * (t.sgn_stat[i][j][y] - ms) * (t.sgn_stat[i][j][y] - ms);
      }
      t.abs_var[i][j] = va;
      t.sgn_var[i][j] = vs;
    }
  t.kappa.resize(ch.ny());
  for (std::size_t y = 0; y < ch.ny(); ++y) t.kappa[y] = posterior_mean_llr_nats(ch, y);
  for (std::size_t y = 0; y < ch.ny(); ++y) t.kappa_mean += ch.marginal_y(y) * t.kappa[y];
  for (std::size_t y = 0; y < ch.ny(); ++y)
    t.kappa_var += ch.marginal_y(y) * (t.kappa[y] - t.kappa_mean) * (t.kappa[y] - t.kappa_mean);
  return t;
}

} // namespace

TypicalityReport typicality_check(const DiscreteJointChannel& ch,
                                  std::span<const std::size_t> y_block, double epsilon,
                                  std::span<const double> lambda_grid,
                                  std::optional<double> conditional_mean) {
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive");
  StatTables t = build_stat_tables(ch, lambda_grid);
  double n = static_cast<double>(y_block.size());
  double ie = mutual_information_nats(ch);

  TypicalityReport r;
  if (conditional_mean) {
    r.mean_stat = *conditional_mean;
  } else {
    // Full-space conditioning set: the unconditional prior mean of ln r,
    // restricted to the support (zero-ratio atoms would force -inf).
    KahanSum acc;
    for (std::size_t y : y_block) {
      KahanSum m;
      for (std::size_t x = 0; x < ch.nx(); ++x)
        if (ch.posterior(x, y) > 0.0)
          m.add(ch.marginal_x(x) * ch.log_likelihood_ratio(x, y));
      acc.add(m.value());
    }
    r.mean_stat = acc.value() / n;
  }
  r.mean_atypical = std::abs(r.mean_stat - ie) > epsilon;
  r.atypical = r.mean_atypical;

  for (std::size_t i = 0; i < lambda_grid.size(); ++i)
    for (int j = 1; j <= 3; ++j)
      for (bool signed_moment : {false, true}) {
        const auto& stat = signed_moment ? t.sgn_stat[i][j - 1] : t.abs_stat[i][j - 1];
        double mean = signed_moment ? t.sgn_mean[i][j - 1] : t.abs_mean[i][j - 1];
        KahanSum acc;
        for (std::size_t y : y_block) acc.add(stat[y]);
        MomentEventFlag f;
        f.lambda = lambda_grid[i];
        f.j = j;
        f.signed_moment = signed_moment;
        f.block_average = acc.value() / n;
        f.population_mean = mean;
        f.atypical = std::abs(f.block_average - mean) > epsilon;
        r.atypical = r.atypical || f.atypical;
        r.moment_events.push_back(f);
      }
  return r;
}

double typicality_chebyshev_constant(const DiscreteJointChannel& ch, double epsilon,
                                     std::span<const double> lambda_grid) {
  StatTables t = build_stat_tables(ch, lambda_grid);
  double c = t.kappa_var;
  for (std::size_t i = 0; i < lambda_grid.size(); ++i)
    for (int j = 0; j < 3; ++j) c += t.abs_var[i][j] + t.sgn_var[i][j];
  return c / (epsilon * epsilon);
}

TypicalitySweep typicality_mc_sweep(const DiscreteJointChannel& ch, std::size_t n,
                                    double epsilon, std::span<const double> lambda_grid,
                                    std::size_t blocks, std::uint64_t seed) {
  if (blocks < 1) throw ConfigError("typicality sweep requires blocks >= 1");
  StatTables t = build_stat_tables(ch, lambda_grid);
  double ie = mutual_information_nats(ch);
  CategoricalSampler sample_y(ch.marginal_y());
  CounterRng master(seed);

  std::vector<std::uint8_t> flags(blocks, 0);
  parallel_for(blocks, [&](std::size_t lo, std::size_t hi) {
    std::vector<double> counts(ch.ny());
    for (std::size_t bidx = lo; bidx < hi; ++bidx) {
      std::fill(counts.begin(), counts.end(), 0.0);
      CounterRng task = master.derive(bidx);
      for (std::size_t i = 0; i < n; ++i) counts[sample_y(task.unit_co(i))] += 1.0;
      double inv_n = 1.0 / static_cast<double>(n);
      bool atypical = false;
      // Conditional-mean event with the exact posterior block mean.
      double kappa_avg = 0.0;
      for (std::size_t y = 0; y < ch.ny(); ++y) kappa_avg += counts[y] * t.kappa[y];
      atypical = std::abs(kappa_avg * inv_n - ie) > epsilon;
      for (std::size_t i = 0; i < lambda_grid.size() && !atypical; ++i)
        for (int j = 0; j < 3 && !atypical; ++j) {
          double sa = 0.0, ss = 0.0;
          for (std::size_t y = 0; y < ch.ny(); ++y) {
            sa += counts[y] * t.abs_stat[i][j][y];
            ss += counts[y] * t.sgn_stat[i][j][y];
          }
          atypical = std::abs(sa * inv_n - t.abs_mean[i][j]) > epsilon ||
                     std::abs(ss * inv_n - t.sgn_mean[i][j]) > epsilon;
        }
      flags[bidx] = atypical ? 1 : 0;
    }
  });

  TypicalitySweep out;
  out.blocks = blocks;
  for (auto f : flags) out.atypical += f;
  out.atypical_frequency = static_cast<double>(out.atypical) / static_cast<double>(blocks);
  out.chebyshev_c = typicality_chebyshev_constant(ch, epsilon, lambda_grid);
  out.holds = out.atypical_frequency * static_cast<double>(n) <= out.chebyshev_c + 1e-12;
  return out;
}

namespace {

// Exhaustive per-outcome scan: calls f(index, avg_llr, prior_mass).
void enumerate_outcomes(const DiscreteJointChannel& ch, std::span<const std::size_t> y_block,
                        const std::function<void(std::uint64_t, double, double)>& f) {
  std::size_t n = y_block.size();
  double total = std::pow(static_cast<double>(ch.nx()), static_cast<double>(n));
  if (total > static_cast<double>(kEnumerationCap))
    throw ConfigError("block too long for exhaustive enumeration");
  std::uint64_t count = static_cast<std::uint64_t>(total);
  std::vector<std::size_t> digits(n, 0);
  for (std::uint64_t idx = 0; idx < count; ++idx) {
    double sum = 0.0, mass = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t x = digits[i];
      mass *= ch.marginal_x(x);
      sum += ch.posterior(x, y_block[i]) > 0.0 ? ch.log_likelihood_ratio(x, y_block[i]) : kNegInf;
    }
    f(idx, sum / static_cast<double>(n), mass);
    for (std::size_t i = n; i-- > 0;) {
      if (++digits[i] < ch.nx()) break;
      digits[i] = 0;
    }
  }
}

} // namespace

double conditional_mean_llr(const DiscreteJointChannel& ch,
                            std::span<const std::size_t> y_block,
                            const std::function<bool(std::uint64_t)>& member) {
  long double num = 0.0L, den = 0.0L;
  enumerate_outcomes(ch, y_block, [&](std::uint64_t idx, double avg, double mass) {
    if (member(idx)) {
      num += static_cast<long double>(mass) * avg;
      den += mass;
    }
  });
  if (den <= 0.0L) throw EmptySet("conditioning set has zero prior mass");
  return static_cast<double>(num / den);
}

double conditional_mean_llr_threshold(const LevelDistribution& d, double threshold_avg) {
  double n = static_cast<double>(d.n);
  double threshold = threshold_avg * n;
  double lmax = kNegInf;
  for (std::size_t i = 0; i < d.size(); ++i)
    if (d.levels[i] >= threshold) lmax = std::max(lmax, d.log_prior[i]);
  if (lmax == kNegInf) throw EmptySet("threshold set has zero prior mass");
  long double num = 0.0L, den = 0.0L;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (d.levels[i] < threshold) continue;
    long double w = std::exp(d.log_prior[i] - lmax);
    num += w * d.levels[i];
    den += w;
  }
  return static_cast<double>(num / den) / n;
}

double ball_radius(double iota_a, const RegularityConstants& c, std::size_t n) {
  return iota_a - 1.0 / (c.m_lo * c.lambda_lo * c.lambda_lo * std::sqrt(c.m2_lo) *
                         static_cast<double>(n));
}

GibbsResult gibbs_check(const DiscreteJointChannel& ch, std::span<const std::size_t> y_block,
                        const std::function<bool(std::uint64_t)>& member,
                        const RegularityConstants& constants) {
  GibbsResult r;
  long double num_a = 0.0L, den_a = 0.0L;
  std::vector<double> avgs;
  std::vector<double> masses;
  enumerate_outcomes(ch, y_block, [&](std::uint64_t idx, double avg, double mass) {
    avgs.push_back(avg);
    masses.push_back(mass);
    if (member(idx)) {
      num_a += static_cast<long double>(mass) * avg;
      den_a += mass;
    }
  });
  if (den_a <= 0.0L) throw EmptySet("conditioning set has zero prior mass");
  r.iota_a = static_cast<double>(num_a / den_a);
  r.p_a = static_cast<double>(den_a);
  r.radius = ball_radius(r.iota_a, constants, y_block.size());

  long double num_b = 0.0L, den_b = 0.0L;
  std::size_t b_count = 0;
  for (std::size_t i = 0; i < avgs.size(); ++i) {
    if (avgs[i] >= r.radius) {
      num_b += static_cast<long double>(masses[i]) * avgs[i];
      den_b += masses[i];
      ++b_count;
    }
  }
  r.iota_b = den_b > 0.0L ? static_cast<double>(num_b / den_b) : kNegInf;
  r.p_b = static_cast<double>(den_b);
  r.b_is_full_space = b_count == avgs.size();
  r.iota_holds = r.iota_b <= r.iota_a + 1e-12;
  r.mass_holds = r.p_b >= r.p_a - 1e-12;
  r.pass = r.iota_holds && r.mass_holds;
  return r;
}

BallBoundResult ball_probability_bound_check(const DiscreteJointChannel& ch,
                                             std::span<const std::size_t> y_block,
                                             const RegularityConstants& constants, double iota,
                                             double lambda_solver_tol) {
  double lo = constants.lambda_lo, hi = constants.lambda_hi;
  double d_lo = block_cumulant_d1(ch, lo, y_block);
  double d_hi = block_cumulant_d1(ch, hi, y_block);
  if (!(iota > d_lo) || !(iota < d_hi))
    throw RadiusOutOfRange("iota outside (Lambda'(lambda_lo), Lambda'(lambda_hi))");

  // Lambda' is nondecreasing in lambda (d2 >= 0), so bisection brackets.
  while (hi - lo > lambda_solver_tol) {
    double mid = 0.5 * (lo + hi);
    if (block_cumulant_d1(ch, mid, y_block) < iota)
      lo = mid;
    else
      hi = mid;
  }

  BallBoundResult r;
  r.lambda_star = 0.5 * (lo + hi);
  double n = static_cast<double>(y_block.size());
  LevelDistribution d = block_level_distribution(ch, y_block);
  double log_tail = d.log_prior_tail_at(n * iota);
  r.log2_p_b = log_tail * kLbE;
  double factor = 1.0 / std::sqrt(2.0 * M_PI * constants.m2_lo) +
                  constants.m3_hi / constants.m2_lo;
  r.log2_bound = (-n * iota + std::log(factor) - 0.5 * std::log(n)) * kLbE;
  r.slack_bits = r.log2_bound - r.log2_p_b;
  r.holds = r.log2_p_b <= r.log2_bound;
  return r;
}

} // namespace csd
