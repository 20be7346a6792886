// Test-only oracles, kept independent of the library implementation paths
// they check.
#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "csd/channel.hpp"
#include "csd/rng.hpp"

namespace oracles {

inline double binary_entropy_bits(double p) {
  auto term = [](double v) { return v > 0.0 ? -v * std::log2(v) : 0.0; };
  return term(p) + term(1.0 - p);
}

// Brute-force D_CS over an explicit level set: sort ratios, sum
// -(h_j - h_{j-1}) w lb w with plain linear arithmetic.
inline double brute_force_dcs_bits(std::vector<double> prior, std::vector<double> target) {
  struct A {
    double r, p;
  };
  std::vector<A> atoms;
  for (std::size_t i = 0; i < prior.size(); ++i)
    if (prior[i] > 0.0 && target[i] > 0.0) atoms.push_back({target[i] / prior[i], prior[i]});
  std::sort(atoms.begin(), atoms.end(), [](const A& a, const A& b) { return a.r < b.r; });
  double dcs = 0.0, prev = 0.0;
  for (std::size_t j = 0; j < atoms.size(); ++j) {
    if (j > 0 && atoms[j].r == atoms[j - 1].r) continue;
    double w = 0.0;
    for (const A& a : atoms)
      if (a.r >= atoms[j].r) w += a.p;
    if (w > 0.0) dcs -= (atoms[j].r - prev) * w * std::log2(w);
    prev = atoms[j].r;
  }
  return dcs;
}

inline std::vector<double> random_pmf(csd::SeqRng& rng, std::size_t k, double floor = 0.0) {
  std::vector<double> p(k);
  double total = 0.0;
  for (auto& v : p) {
    v = floor + rng.unit();
    total += v;
  }
  for (auto& v : p) v /= total;
  return p;
}

inline csd::DiscreteJointChannel random_channel(csd::SeqRng& rng, std::size_t nx,
                                                std::size_t ny, double floor = 0.01) {
  std::vector<std::vector<double>> joint(nx, std::vector<double>(ny));
  double total = 0.0;
  for (auto& row : joint)
    for (auto& v : row) {
      v = floor + rng.unit();
      total += v;
    }
  for (auto& row : joint)
    for (auto& v : row) v /= total;
  return csd::DiscreteJointChannel(std::move(joint));
}

} // namespace oracles
