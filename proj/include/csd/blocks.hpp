#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "csd/channel.hpp"
#include "csd/width.hpp"

namespace csd {

// Exact law of S = sum_i ln r(X_i|y_i) under the prior product measure.
// Finite levels are in nats; masses are carried as logs so blocklengths in the
// thousands stay representable. The r = 0 outcomes form an explicit bucket
// whose prior mass is 1 - exp(log_nonzero_mass) and whose posterior mass is 0.
struct LevelDistribution {
  std::vector<double> levels;     // ascending, distinct (relative 1e-12)
  std::vector<double> log_prior;  // ln prior mass per level
  double log_nonzero_mass = 0.0;  // ln P[all letters have positive ratio]
  std::size_t n = 0;              // blocklength

  std::size_t size() const { return levels.size(); }
  double prior_mass(std::size_t i) const;
  double posterior_mass(std::size_t i) const;      // e^level * prior
  double log_posterior(std::size_t i) const { return levels[i] + log_prior[i]; }
  double zero_bucket_prior_mass() const;

  // ln P[S >= levels[i]] under the prior, one entry per level.
  std::vector<double> log_prior_tail() const;
  LogWidthSegments prior_width() const;

  // ln P[S >= threshold] under the prior (finite part).
  double log_prior_tail_at(double threshold) const;
};

struct ConvolveOptions {
  std::size_t max_levels = 2'000'000;
};

LevelDistribution letter_level_distribution(const DiscreteJointChannel& ch, std::size_t y);
LevelDistribution convolve(const LevelDistribution& a, const LevelDistribution& b,
                           const ConvolveOptions& opts = {});
LevelDistribution convolution_power(const LevelDistribution& d, std::size_t n,
                                    const ConvolveOptions& opts = {});
LevelDistribution block_level_distribution(const DiscreteJointChannel& ch,
                                           std::span<const std::size_t> y_block,
                                           const ConvolveOptions& opts = {});

double block_csd_bits(const LevelDistribution& d);
double block_csd_nats(const LevelDistribution& d);
double block_kl_bits(const LevelDistribution& d);  // direct, from posterior masses

// E_{X|y}[ln r(X|y)] in nats.
double posterior_mean_llr_nats(const DiscreteJointChannel& ch, std::size_t y);

struct ExpectedCsd {
  double bits = 0.0;
  double nats = 0.0;
  double stderr_bits = 0.0;
  std::string mode;  // "exact" or "mc"
};

struct McOptions {
  std::size_t samples = 1000;
  std::uint64_t seed = 1;
};

// Exact mode: sums D_CS over y-types with multinomial weights. Requires the
// channel's declared y_symmetric flag; per-letter level distributions are
// grouped into classes, and the declared symmetry is validated by a
// 10-permutation determinism check before use.
ExpectedCsd expected_block_csd_exact(const DiscreteJointChannel& ch, std::size_t n,
                                     const ConvolveOptions& opts = {});
ExpectedCsd expected_block_csd_mc(const DiscreteJointChannel& ch, std::size_t n,
                                  const McOptions& mc, const ConvolveOptions& opts = {});

struct RedundancyCurvePoint {
  std::size_t n = 0;
  double expected_dcs = 0.0;  // bits
  double block_mi = 0.0;      // n * I, bits
  double gap = 0.0;           // bits
  double gap_over_lbn = 0.0;
  double stderr_bits = 0.0;
  std::string mode;
  std::uint64_t seed = 0;
};

struct RedundancyOptions {
  bool prefer_exact = true;   // fall back to MC when symmetry is not declared
  McOptions mc;
  ConvolveOptions conv;
};

std::vector<RedundancyCurvePoint> redundancy_curve(const DiscreteJointChannel& ch,
                                                   std::span<const std::size_t> n_list,
                                                   const RedundancyOptions& opts = {});

// Sup over t_grid of |P[(ln H_n - b)/s <= t | y^n] - (1 - Lambda_n(t) +
// sum over posterior levels of the exponential kernel)| with s = sqrt(n),
// b = kappa^n; both sides are exact finite sums.
double verify_cdf_identity(const DiscreteJointChannel& ch,
                           std::span<const std::size_t> y_block,
                           std::span<const double> t_grid,
                           const ConvolveOptions& opts = {});

struct CltPoint {
  std::size_t n = 0;
  double ks = 0.0;
};

// KS distance between the sampled law of sum_i (ln r - kappa_{Y_i})/sqrt(n)
// and N(0, E_Y[sigma^2_Y]). Throws SingularChannel when the target variance
// vanishes.
std::vector<CltPoint> clt_check(const DiscreteJointChannel& ch,
                                std::span<const std::size_t> n_list, std::size_t samples,
                                std::uint64_t seed);
std::vector<CltPoint> clt_check(const GaussianChannel& ch, std::span<const std::size_t> n_list,
                                std::size_t samples, std::uint64_t seed);

} // namespace csd
