#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "csd/blocks.hpp"
#include "csd/channel.hpp"

namespace csd {

// Pointwise cumulant Lambda_X(lambda, y) = ln E_X[1[r > 0] e^{lambda ln r}]
// with its first three derivatives (tilted mean / variance / third central
// moment), all in nats.
struct CumulantData {
  double lambda = 0.0;
  std::size_t y = 0;
  double value = 0.0;
  double d1 = 0.0;
  double d2 = 0.0;
  double d3 = 0.0;
};

struct TiltedMeasure {
  double lambda = 0.0;
  std::size_t y = 0;
  std::vector<double> pmf;  // over the full x alphabet, zero off-support
};

struct BlockTiltStats {
  double lambda = 0.0;
  double s_n_sq = 0.0;  // sum of tilted variances, nats^2
  double mu3 = 0.0;     // sum of tilted third absolute moments, nats^3
};

// Operating interval, moment bounds, and the uniform large-deviations
// constant. m_lo routinely underflows double range (the exp(-2t) factor), so
// log_m_lo is the authoritative representation.
struct RegularityConstants {
  double lambda_lo = 0.0;
  double lambda_hi = 0.0;
  double m2_lo = 0.0;
  double m2_hi = 0.0;
  double m3_hi = 0.0;
  double m_lo = 0.0;
  double log_m_lo = 0.0;
  double n0 = 0.0;
  double epsilon = 0.0;
};

CumulantData cumulant(const DiscreteJointChannel& ch, double lambda, std::size_t y);
TiltedMeasure tilted_measure(const DiscreteJointChannel& ch, double lambda, std::size_t y);
BlockTiltStats block_tilt_stats(const DiscreteJointChannel& ch, double lambda,
                                std::span<const std::size_t> y_block);

// E_{Q^lambda}[|ln r|^k] and E_{Q^lambda}[(ln r)^k].
double tilted_abs_moment(const DiscreteJointChannel& ch, double lambda, std::size_t y, int k);
double tilted_signed_moment(const DiscreteJointChannel& ch, double lambda, std::size_t y, int k);

// (1/n) sum_i Lambda'(lambda, y_i).
double block_cumulant_d1(const DiscreteJointChannel& ch, double lambda,
                         std::span<const std::size_t> y_block);

struct DominanceResult {
  bool dominated = false;
  double worst_margin = 0.0;  // min over levels of tail(lambda2) - tail(lambda1)
};

DominanceResult stochastic_dominance_check(const DiscreteJointChannel& ch, std::size_t y,
                                           double lambda1, double lambda2);

bool moment_bound_check(const DiscreteJointChannel& ch, std::size_t y, int k,
                        std::span<const double> lambda_grid);

// Widest symmetric grid interval around 1 on which the mean conditional
// tilted variance stays at or above half its lambda = 1 value.
std::pair<double, double> find_operating_interval(const DiscreteJointChannel& ch,
                                                  double grid_resolution = 1e-3);

// Grid {lambda_lo, lambda_lo + eps, ..., lambda_hi}.
std::vector<double> k_epsilon_grid(double lambda_lo, double lambda_hi, double epsilon);

// Largest epsilon compatible with the typicality construction: the two
// endpoint-mean inequalities I +- 3 eps and a positive variance floor m2_lo.
double max_admissible_epsilon(const DiscreteJointChannel& ch, double lambda_lo,
                              double lambda_hi, double grid_resolution = 1e-3);

// Assembles (lambda interval, m2/m3 bounds, n0, M_lo) from exact per-y
// moments. epsilon = 0 picks 0.9 * max_admissible_epsilon; an explicit
// epsilon is validated and rejected if it breaks the construction.
RegularityConstants assemble_regularity_constants(const DiscreteJointChannel& ch,
                                                  double grid_resolution = 1e-3,
                                                  double epsilon = 0.0);

// M_n(lambda, s, mu) exactly as defined (gamma may be negative; callers
// filter by n0). m_lower_log returns ln M_n, or -inf when gamma <= 0.
double m_lower(double lambda, double s, double mu, double n);
double m_lower_log(double lambda, double s, double mu, double n);

struct MomentEventFlag {
  double lambda = 0.0;
  int j = 0;
  bool signed_moment = false;
  double block_average = 0.0;
  double population_mean = 0.0;
  bool atypical = false;
};

struct TypicalityReport {
  double mean_stat = 0.0;  // conditional mean log-likelihood ratio used
  bool mean_atypical = false;
  std::vector<MomentEventFlag> moment_events;
  bool atypical = false;
};

// Event membership for one block. conditional_mean defaults to the full-space
// conditional mean (1/n) sum_i E_P[ln r(.|y_i)].
TypicalityReport typicality_check(const DiscreteJointChannel& ch,
                                  std::span<const std::size_t> y_block, double epsilon,
                                  std::span<const double> lambda_grid,
                                  std::optional<double> conditional_mean = std::nullopt);

// Union-bound Chebyshev constant with each per-event variance evaluated
// exactly: C = [Var(kappa_Y) + sum over events Var_Y(per-letter stat)]/eps^2.
double typicality_chebyshev_constant(const DiscreteJointChannel& ch, double epsilon,
                                     std::span<const double> lambda_grid);

struct TypicalitySweep {
  std::size_t blocks = 0;
  std::size_t atypical = 0;
  double atypical_frequency = 0.0;
  double chebyshev_c = 0.0;
  bool holds = false;  // frequency * n <= C
};

// Monte-Carlo estimate of P(atypical) over Y^n blocks; the conditional-mean
// event is instantiated with the exact posterior mean (1/n) sum_i kappa_{Y_i}.
TypicalitySweep typicality_mc_sweep(const DiscreteJointChannel& ch, std::size_t n,
                                    double epsilon, std::span<const double> lambda_grid,
                                    std::size_t blocks, std::uint64_t seed);

// iota_{y^n}(S) over an explicit or predicate subset of X^n, by exhaustive
// enumeration (|X|^n capped). Block index encodes letters base-|X|, most
// significant digit first.
double conditional_mean_llr(const DiscreteJointChannel& ch,
                            std::span<const std::size_t> y_block,
                            const std::function<bool(std::uint64_t)>& member);
// Threshold-set variant via a LevelDistribution: S = {avg llr >= threshold}.
double conditional_mean_llr_threshold(const LevelDistribution& d, double threshold_avg);

// iota_A - 1/(M_lo * lambda_lo^2 * sqrt(m2_lo) * n).
double ball_radius(double iota_a, const RegularityConstants& c, std::size_t n);

struct GibbsResult {
  double iota_a = 0.0;
  double radius = 0.0;
  double iota_b = 0.0;
  double p_a = 0.0;
  double p_b = 0.0;
  bool b_is_full_space = false;
  bool iota_holds = false;  // iota(B) <= iota(A) + 1e-12
  bool mass_holds = false;  // P(B) >= P(A) - 1e-12
  bool pass = false;
};

GibbsResult gibbs_check(const DiscreteJointChannel& ch, std::span<const std::size_t> y_block,
                        const std::function<bool(std::uint64_t)>& member,
                        const RegularityConstants& constants);

struct BallBoundResult {
  double lambda_star = 0.0;
  double log2_p_b = 0.0;
  double log2_bound = 0.0;
  double slack_bits = 0.0;  // log2(bound) - log2(P(B))
  bool holds = false;
};

// Exact tail P[S >= n*iota] against e^{-n iota} (1/sqrt(n)) (1/sqrt(2 pi m2_lo)
// + m3_hi/m2_lo); the tilt parameter solving Lambda'(lambda, y^n) = iota is
// located by bisection and reported. Throws RadiusOutOfRange when iota is not
// inside (Lambda'(lambda_lo), Lambda'(lambda_hi)).
BallBoundResult ball_probability_bound_check(const DiscreteJointChannel& ch,
                                             std::span<const std::size_t> y_block,
                                             const RegularityConstants& constants, double iota,
                                             double lambda_solver_tol = 1e-10);

} // namespace csd
