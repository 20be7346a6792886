#include "csd/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>

#include "csd/errors.hpp"
#include "csd/mathutil.hpp"
#include "csd/parallel.hpp"

namespace csd {

namespace {
// Stream tags inside a proposal stream.
constexpr std::uint64_t kArrivalStream = 0;
constexpr std::uint64_t kSymbolStream = 1;
} // namespace

CommonRandomness::CommonRandomness(std::uint64_t seed, const DiscreteJointChannel& ch)
    : rng_(seed), sample_y_(ch.marginal_y()) {}

std::size_t CommonRandomness::proposal_symbol(std::uint64_t index1) const {
  return sample_y_(rng_.unit_co(index1, kSymbolStream));
}

double CommonRandomness::arrival_gap(std::uint64_t index1) const {
  return -std::log(rng_.unit(index1, kArrivalStream));
}

SimulationResult pfr_encode(const DiscreteJointChannel& ch, std::size_t x,
                            const CommonRandomness& z, std::uint64_t max_proposals) {
  if (x >= ch.nx()) throw ConfigError("pfr_encode: x out of range");
  double r_max = 0.0;
  for (std::size_t y = 0; y < ch.ny(); ++y)
    r_max = std::max(r_max, ch.y_likelihood_ratio(y, x));

  double t = 0.0;
  double best_score = kInf;
  SimulationResult best;
  for (std::uint64_t i = 1; i <= max_proposals; ++i) {
    t += z.arrival_gap(i);
    std::size_t y = z.proposal_symbol(i);
    double ratio = ch.y_likelihood_ratio(y, x);
    if (ratio > 0.0) {
      double score = t / ratio;
      if (score < best_score) {
        best_score = score;
        best.index = i;
        best.y_out = y;
      }
    }
    if (t / r_max >= best_score) {
      // Arrival times only grow, so every later score exceeds the incumbent.
      best.proposals_examined = i;
      return best;
    }
  }
  throw ProposalBudgetExceeded("pfr_encode: argmin not certified within max_proposals");
}

std::size_t pfr_decode(std::uint64_t index, const CommonRandomness& z) {
  if (index < 1) throw ConfigError("pfr_decode: index must be >= 1");
  return z.proposal_symbol(index);
}

EntropyEstimate conditional_index_entropy(const DiscreteJointChannel& ch, std::size_t num_seeds,
                                          std::uint64_t seed0, std::uint64_t max_proposals) {
  if (num_seeds < 100) throw ConfigError("conditional_index_entropy requires num_seeds >= 100");
  std::vector<double> entropy(num_seeds);
  CounterRng master(seed0);
  parallel_for(num_seeds, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t s = lo; s < hi; ++s) {
      CommonRandomness z(master.derive(s).seed(), ch);
      std::map<std::uint64_t, double> pmf;
      for (std::size_t x = 0; x < ch.nx(); ++x)
        pmf[pfr_encode(ch, x, z, max_proposals).index] += ch.marginal_x(x);
      double h = 0.0;
      for (const auto& [idx, p] : pmf) h -= xlbx(p);
      entropy[s] = h;
    }
  });
  EntropyEstimate out;
  out.num_seeds = num_seeds;
  for (double h : entropy) out.mean_bits += h;
  out.mean_bits /= static_cast<double>(num_seeds);
  double var = 0.0;
  for (double h : entropy) var += (h - out.mean_bits) * (h - out.mean_bits);
  var = num_seeds > 1 ? var / static_cast<double>(num_seeds - 1) : 0.0;
  out.stderr_bits = std::sqrt(var / static_cast<double>(num_seeds));
  return out;
}

double exactness_test(const DiscreteJointChannel& ch, std::size_t samples, std::uint64_t seed,
                      std::uint64_t max_proposals) {
  if (samples < 1) throw ConfigError("exactness_test requires samples >= 1");
  CategoricalSampler sample_x(ch.marginal_x());
  CounterRng master(seed);

  std::vector<std::uint64_t> counts(ch.nx() * ch.ny(), 0);
  std::mutex merge_mu;
  parallel_for(samples, [&](std::size_t lo, std::size_t hi) {
    std::vector<std::uint64_t> local(counts.size(), 0);
    for (std::size_t i = lo; i < hi; ++i) {
      CounterRng task = master.derive(i);
      std::size_t x = sample_x(task.unit_co(0, 2));
      CommonRandomness z(task.seed(), ch);
      SimulationResult r = pfr_encode(ch, x, z, max_proposals);
      ++local[x * ch.ny() + r.y_out];
    }
    std::lock_guard<std::mutex> lock(merge_mu);
    for (std::size_t k = 0; k < counts.size(); ++k) counts[k] += local[k];
  });

  double tv = 0.0;
  for (std::size_t x = 0; x < ch.nx(); ++x)
    for (std::size_t y = 0; y < ch.ny(); ++y) {
      double emp = static_cast<double>(counts[x * ch.ny() + y]) / static_cast<double>(samples);
      tv += std::abs(emp - ch.joint(x, y));
    }
  return 0.5 * tv;
}

} // namespace csd
