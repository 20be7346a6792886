#include "csd/width.hpp"

#include <algorithm>
#include <cmath>

#include "csd/errors.hpp"
#include "csd/mathutil.hpp"

namespace csd {

namespace {

constexpr double kLevelMergeTol = 1e-12;  // relative
constexpr double kIdentityTol = 1e-9;     // discrete gap/ordering identities
constexpr double kGaussIdentityTol = 1e-5;

struct Atom {
  double r;
  double mass;
};

// Sorted positive-ratio atoms with equal levels merged, plus the r = 0 mass.
std::pair<std::vector<Atom>, double> ratio_atoms(std::span<const double> prior,
                                                 std::span<const double> target,
                                                 bool weight_by_target) {
  if (prior.size() != target.size())
    throw AbsoluteContinuityViolation("prior and target have different alphabet sizes");
  std::vector<Atom> atoms;
  double zero_mass = 0.0;
  for (std::size_t i = 0; i < prior.size(); ++i) {
    double p = prior[i], q = target[i];
    if (p <= 0.0) {
      if (q > 0.0)
        throw AbsoluteContinuityViolation("target has mass outside the prior support");
      continue;
    }
    double w = weight_by_target ? q : p;
    if (q <= 0.0) {
      zero_mass += w;
      continue;
    }
    atoms.push_back({q / p, w});
  }
  std::sort(atoms.begin(), atoms.end(), [](const Atom& a, const Atom& b) { return a.r < b.r; });
  std::vector<Atom> merged;
  for (const Atom& a : atoms) {
    if (!merged.empty() &&
        std::abs(a.r - merged.back().r) <= kLevelMergeTol * std::max(a.r, merged.back().r)) {
      merged.back().mass += a.mass;
    } else {
      merged.push_back(a);
    }
  }
  return {std::move(merged), zero_mass};
}

WidthFunction width_from_atoms(std::vector<Atom> atoms, double zero_mass) {
  WidthFunction w;
  w.zero_ratio_mass = zero_mass;
  w.breakpoints.reserve(atoms.size() + 1);
  w.values.reserve(atoms.size() + 1);
  w.breakpoints.push_back(0.0);
  w.values.push_back(1.0);
  // Tail masses from the top down so each value is an exact suffix sum.
  std::vector<double> tail(atoms.size());
  KahanSum acc;
  for (std::size_t j = atoms.size(); j-- > 0;) {
    acc.add(atoms[j].mass);
    tail[j] = acc.value();
  }
  for (std::size_t j = 0; j < atoms.size(); ++j) {
    w.breakpoints.push_back(atoms[j].r);
    w.values.push_back(tail[j]);
  }
  return w;
}

} // namespace

double WidthFunction::value_at(double h) const {
  if (h <= 0.0) return 1.0;
  if (breakpoints.size() <= 1 || h > breakpoints.back()) return 0.0;
  // first breakpoint >= h; h lies in (breakpoints[i-1], breakpoints[i]]
  auto it = std::lower_bound(breakpoints.begin() + 1, breakpoints.end(), h);
  return values[static_cast<std::size_t>(it - breakpoints.begin())];
}

double WidthFunction::integral() const {
  KahanSum s;
  for (std::size_t j = 1; j < breakpoints.size(); ++j)
    s.add((breakpoints[j] - breakpoints[j - 1]) * values[j]);
  return s.value();
}

WidthFunction width_function(std::span<const double> prior, std::span<const double> target) {
  auto [atoms, zero_mass] = ratio_atoms(prior, target, /*weight_by_target=*/false);
  return width_from_atoms(std::move(atoms), zero_mass);
}

WidthFunction q_width_function(std::span<const double> prior, std::span<const double> target) {
  auto [atoms, zero_mass] = ratio_atoms(prior, target, /*weight_by_target=*/true);
  return width_from_atoms(std::move(atoms), zero_mass);
}

LogWidthSegments to_log_segments(const WidthFunction& w) {
  LogWidthSegments s;
  s.log_levels.reserve(w.breakpoints.size() - 1);
  s.log_tail_mass.reserve(w.breakpoints.size() - 1);
  for (std::size_t j = 1; j < w.breakpoints.size(); ++j) {
    s.log_levels.push_back(std::log(w.breakpoints[j]));
    s.log_tail_mass.push_back(std::log(w.values[j]));
  }
  return s;
}

// The segment sums below evaluate exact antiderivatives over (h_{j-1}, h_j]
// with every product of a huge level and a tiny tail mass formed as
// exp(log_level + log_mass); those exponents are <= 0 up to rounding because
// e^L * w(e^L) <= E[r] = 1.

double lw_integral(const LogWidthSegments& s) {
  KahanSum acc;
  for (std::size_t j = 0; j < s.log_levels.size(); ++j) {
    double hi = std::exp(s.log_levels[j] + s.log_tail_mass[j]);
    double lo = j == 0 ? 0.0 : std::exp(s.log_levels[j - 1] + s.log_tail_mass[j]);
    acc.add(hi - lo);
  }
  return acc.value();
}

double lw_dcs_nats(const LogWidthSegments& s) {
  KahanSum acc;
  for (std::size_t j = 0; j < s.log_levels.size(); ++j) {
    double hi = std::exp(s.log_levels[j] + s.log_tail_mass[j]);
    double lo = j == 0 ? 0.0 : std::exp(s.log_levels[j - 1] + s.log_tail_mass[j]);
    acc.add(-s.log_tail_mass[j] * (hi - lo));
  }
  return acc.value();
}

double lw_dcs_bits(const LogWidthSegments& s) { return lw_dcs_nats(s) * kLbE; }

double lw_kl_integral_bits(const LogWidthSegments& s) {
  // lb(e) + integral of w(h) lb(h) dh, per-segment antiderivative h(ln h - 1).
  KahanSum acc;
  for (std::size_t j = 0; j < s.log_levels.size(); ++j) {
    double hi = std::exp(s.log_levels[j] + s.log_tail_mass[j]) * (s.log_levels[j] - 1.0);
    double lo = 0.0;
    if (j > 0) {
      double e = s.log_levels[j - 1] + s.log_tail_mass[j];
      if (e != kNegInf) lo = std::exp(e) * (s.log_levels[j - 1] - 1.0);
    }
    acc.add(hi - lo);
  }
  return (1.0 + acc.value()) * kLbE;
}

double lw_log_width_entropy_bits(const LogWidthSegments& s) {
  // -integral of f lb f over t = ln h, f(t) = e^t w(e^t);
  // antiderivative of e^{t+W}(t+W) is e^{t+W}(t+W-1).
  KahanSum acc;
  for (std::size_t j = 0; j < s.log_levels.size(); ++j) {
    double ehi = s.log_levels[j] + s.log_tail_mass[j];
    double hi = std::exp(ehi) * (ehi - 1.0);
    double lo = 0.0;
    if (j > 0) {
      double elo = s.log_levels[j - 1] + s.log_tail_mass[j];
      if (elo != kNegInf) lo = std::exp(elo) * (elo - 1.0);
    }
    acc.add(hi - lo);
  }
  return -acc.value() * kLbE;
}

double channel_simulation_divergence(std::span<const double> prior,
                                     std::span<const double> target) {
  return lw_dcs_bits(to_log_segments(width_function(prior, target)));
}

double kl_divergence(std::span<const double> prior, std::span<const double> target,
                     KlMethod method) {
  if (method == KlMethod::direct) {
    if (prior.size() != target.size())
      throw AbsoluteContinuityViolation("prior and target have different alphabet sizes");
    KahanSum s;
    for (std::size_t i = 0; i < prior.size(); ++i) {
      if (target[i] > 0.0) {
        if (prior[i] <= 0.0)
          throw AbsoluteContinuityViolation("target has mass outside the prior support");
        s.add(target[i] * (std::log2(target[i]) - std::log2(prior[i])));
      }
    }
    return s.value();
  }
  return lw_kl_integral_bits(to_log_segments(width_function(prior, target)));
}

DivergenceReport divergence_gap(std::span<const double> prior, std::span<const double> target) {
  auto seg = to_log_segments(width_function(prior, target));
  DivergenceReport r;
  r.d_cs = lw_dcs_bits(seg);
  r.d_kl_direct = kl_divergence(prior, target, KlMethod::direct);
  r.d_kl_integral = lw_kl_integral_bits(seg);
  r.gap = r.d_cs - r.d_kl_direct;
  r.log_width_entropy = lw_log_width_entropy_bits(seg);
  if (std::abs(r.d_kl_direct - r.d_kl_integral) > kIdentityTol)
    throw BoundViolation("KL direct and integral representations disagree");
  if (r.d_cs < r.d_kl_direct - kIdentityTol)
    throw BoundViolation("D_CS fell below D_KL");
  return r;
}

WidthFunction slice_width(const DiscreteJointChannel& ch, std::size_t y) {
  return width_function(ch.marginal_x(), ch.posterior_column(y));
}

DivergenceReport slice_divergence(const DiscreteJointChannel& ch, std::size_t y) {
  return divergence_gap(ch.marginal_x(), ch.posterior_column(y));
}

double expected_dcs_bits(const DiscreteJointChannel& ch) {
  KahanSum s;
  for (std::size_t y = 0; y < ch.ny(); ++y)
    s.add(ch.marginal_y(y) *
          channel_simulation_divergence(ch.marginal_x(), ch.posterior_column(y)));
  return s.value();
}

double expected_dcs_nats(const DiscreteJointChannel& ch) {
  return bits_to_nats(expected_dcs_bits(ch));
}

GaussianWidth gaussian_width(const GaussianChannel& ch, double y) {
  double vx = ch.sigma_x * ch.sigma_x;
  double vp = ch.posterior_var();
  double mu = ch.posterior_mean(y);
  GaussianWidth w;
  w.sigma_x = ch.sigma_x;
  w.a = 1.0 / (2.0 * vp) - 1.0 / (2.0 * vx);
  w.b = -mu / vp;
  w.c = mu * mu / (2.0 * vp) - 0.5 * std::log(vx / vp);
  w.t_max = -(w.c - w.b * w.b / (4.0 * w.a));
  return w;
}

double GaussianWidth::value_at_log(double t) const {
  // r(x) >= e^t is the interval between the roots of a x^2 + b x + (c + t).
  double disc = b * b - 4.0 * a * (c + t);
  if (disc <= 0.0) return 0.0;
  double s = std::sqrt(disc);
  double x_lo = (-b - s) / (2.0 * a);
  double x_hi = (-b + s) / (2.0 * a);
  return normal_cdf(x_hi / sigma_x) - normal_cdf(x_lo / sigma_x);
}

DivergenceReport gaussian_divergence(const GaussianChannel& ch, double y, double quad_tol) {
  GaussianWidth w = gaussian_width(ch, y);
  // Residual width mass below t_lo is at most e^{t_lo} = 1e-10.
  double t_lo = std::log(1e-10);
  double u_max = std::sqrt(w.t_max - t_lo);

  // Substitute t = t_max - u^2; the sqrt vanishing of w at t_max becomes
  // linear in u and Simpson converges at full order.
  auto integrate = [&](auto&& g) {
    return adaptive_simpson(
        [&](double u) {
          double t = w.t_max - u * u;
          double wt = w.value_at_log(t);
          if (wt <= 0.0) return 0.0;
          return 2.0 * u * std::exp(t) * wt * g(t, wt);
        },
        0.0, u_max, quad_tol);
  };

  DivergenceReport r;
  r.d_cs = -kLbE * integrate([](double, double wt) { return std::log(wt); });
  r.d_kl_integral = kLbE * (1.0 + integrate([](double t, double) { return t; }));
  r.log_width_entropy =
      -kLbE * integrate([](double t, double wt) { return t + std::log(wt); });

  double vx = ch.sigma_x * ch.sigma_x;
  double vp = ch.posterior_var();
  double mu = ch.posterior_mean(y);
  r.d_kl_direct = kLbE * 0.5 * (vp / vx + mu * mu / vx - 1.0 + std::log(vx / vp));
  r.gap = r.d_cs - r.d_kl_direct;
  if (std::abs(r.d_kl_direct - r.d_kl_integral) > kGaussIdentityTol)
    throw BoundViolation("Gaussian KL quadrature disagrees with the closed form");
  if (r.d_cs < r.d_kl_direct - kGaussIdentityTol)
    throw BoundViolation("Gaussian D_CS fell below D_KL");
  return r;
}

} // namespace csd
