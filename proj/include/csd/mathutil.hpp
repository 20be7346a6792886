#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <vector>

namespace csd {

inline constexpr double kLbE = 1.4426950408889634;   // lb(e) = 1/ln 2
inline constexpr double kLn2 = 0.6931471805599453;
inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();
inline constexpr double kInf = std::numeric_limits<double>::infinity();

inline double nats_to_bits(double x) { return x * kLbE; }
inline double bits_to_nats(double x) { return x * kLn2; }

// x*lb(x) with the 0*lb(0) := 0 convention, x in [0,1].
inline double xlbx(double x) { return x > 0.0 ? x * std::log2(x) : 0.0; }

// log(sum exp(a_i)) with max subtraction; empty input -> -inf.
inline double log_sum_exp(std::span<const double> a) {
  double m = kNegInf;
  for (double v : a) m = std::max(m, v);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double v : a) s += std::exp(v - m);
  return m + std::log(s);
}

inline double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

// Standard normal CDF.
inline double normal_cdf(double x) { return 0.5 * std::erfc(-x * M_SQRT1_2); }

// Neumaier compensated summation.
class KahanSum {
public:
  void add(double v) {
    double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v))
      c_ += (sum_ - t) + v;
    else
      c_ += (v - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + c_; }

private:
  double sum_ = 0.0;
  double c_ = 0.0;
};

// Composite Simpson rule with `panels` panels (doubled until the estimate
// moves by less than tol, or max_panels is reached).
inline double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                               double tol, std::size_t initial_panels = 64,
                               std::size_t max_panels = (1u << 22)) {
  auto simpson = [&](std::size_t panels) {
    double h = (b - a) / static_cast<double>(panels);
    KahanSum s;
    s.add(f(a));
    s.add(f(b));
    for (std::size_t i = 1; i < panels; ++i) {
      double x = a + h * static_cast<double>(i);
      s.add((i % 2 == 1 ? 4.0 : 2.0) * f(x));
    }
    return s.value() * h / 3.0;
  };
  std::size_t panels = initial_panels;
  double prev = simpson(panels);
  while (panels < max_panels) {
    panels *= 2;
    double cur = simpson(panels);
    if (std::abs(cur - prev) < tol) return cur;
    prev = cur;
  }
  return prev;
}

// Least-squares slope of y against x.
inline double ls_slope(std::span<const double> x, std::span<const double> y) {
  double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) { mx += x[i]; my += y[i]; }
  mx /= n; my /= n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  return sxy / sxx;
}

// Kolmogorov-Smirnov distance between a sample and a reference CDF.
// Sorts a copy of the sample.
inline double ks_distance(std::vector<double> sample, const std::function<double(double)>& cdf) {
  std::sort(sample.begin(), sample.end());
  double n = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    double f = cdf(sample[i]);
    d = std::max(d, std::abs(f - static_cast<double>(i) / n));
    d = std::max(d, std::abs(static_cast<double>(i + 1) / n - f));
  }
  return d;
}

} // namespace csd
