#pragma once

#include <span>
#include <vector>

#include "csd/channel.hpp"

namespace csd {

// Nonincreasing step function w(h) = P[r >= h] for a likelihood ratio r.
// breakpoints[0] = 0 and values[0] = 1 (the value at h <= 0); values[j] is the
// tail mass on the half-open interval (breakpoints[j-1], breakpoints[j]], and
// w(h) = 0 beyond the last breakpoint.
struct WidthFunction {
  std::vector<double> breakpoints;
  std::vector<double> values;
  double zero_ratio_mass = 0.0;  // P[r = 0]

  double value_at(double h) const;
  double integral() const;  // = E[r] = 1 for a P-width function
};

// Same step data with levels and tail masses held in log space. Block-level
// width functions live here: levels reach thousands of nats, so e^level and
// the tail masses are representable only as logs.
struct LogWidthSegments {
  std::vector<double> log_levels;     // ln h_j, strictly ascending
  std::vector<double> log_tail_mass;  // ln w on (h_{j-1}, h_j]
};

double lw_integral(const LogWidthSegments& s);
double lw_dcs_nats(const LogWidthSegments& s);
double lw_dcs_bits(const LogWidthSegments& s);
double lw_kl_integral_bits(const LogWidthSegments& s);
double lw_log_width_entropy_bits(const LogWidthSegments& s);

LogWidthSegments to_log_segments(const WidthFunction& w);

enum class KlMethod { direct, integral };

struct DivergenceReport {
  double d_cs = 0.0;              // bits
  double d_kl_direct = 0.0;       // bits
  double d_kl_integral = 0.0;     // bits
  double gap = 0.0;               // d_cs - d_kl_direct, bits
  double log_width_entropy = 0.0; // h(ln H), bits
};

// P-width function of r = dQ/dP for pmfs on a common alphabet.
// Throws AbsoluteContinuityViolation if Q puts mass where P does not.
WidthFunction width_function(std::span<const double> prior, std::span<const double> target);
// Q-width function w_Q(h) = Q[r >= h].
WidthFunction q_width_function(std::span<const double> prior, std::span<const double> target);

double channel_simulation_divergence(std::span<const double> prior,
                                     std::span<const double> target);  // bits
double kl_divergence(std::span<const double> prior, std::span<const double> target,
                     KlMethod method);  // bits
DivergenceReport divergence_gap(std::span<const double> prior, std::span<const double> target);

// Posterior-vs-prior slice of a discrete channel.
WidthFunction slice_width(const DiscreteJointChannel& ch, std::size_t y);
DivergenceReport slice_divergence(const DiscreteJointChannel& ch, std::size_t y);
// E_Y[D_CS(P_{X|Y} || P_X)] in bits, exact.
double expected_dcs_bits(const DiscreteJointChannel& ch);
double expected_dcs_nats(const DiscreteJointChannel& ch);

// Gaussian posterior/prior pair, evaluated by quadrature in t = ln h
// coordinates. quad_tol is the panel-halving stop in bits; tail truncation
// keeps residual width mass below 1e-10.
struct GaussianWidth {
  double a, b, c;      // ln r(x) = -(a x^2 + b x + c), a > 0
  double sigma_x;
  double t_max;        // max of ln r

  double value_at_log(double t) const;  // w(e^t)
};

GaussianWidth gaussian_width(const GaussianChannel& ch, double y);
DivergenceReport gaussian_divergence(const GaussianChannel& ch, double y,
                                     double quad_tol = 1e-7);

} // namespace csd
