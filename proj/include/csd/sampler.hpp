#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "csd/channel.hpp"
#include "csd/rng.hpp"

namespace csd {

// Shared proposal stream: proposal i carries an arrival time T_i (unit-rate
// Poisson process, materialized as a cumulative sum on the encoder side) and a
// symbol Y_i ~ P_Y. The Y stream is random-access, so the decoder can fetch
// proposal i without replaying the prefix.
class CommonRandomness {
public:
  CommonRandomness(std::uint64_t seed, const DiscreteJointChannel& ch);

  std::uint64_t seed() const { return rng_.seed(); }
  std::size_t proposal_symbol(std::uint64_t index1) const;  // Y_index, index1 >= 1
  double arrival_gap(std::uint64_t index1) const;           // Exp(1) increment

private:
  CounterRng rng_;
  CategoricalSampler sample_y_;
};

struct SimulationResult {
  std::uint64_t index = 0;            // N*, 1-based
  std::size_t y_out = 0;
  std::uint64_t proposals_examined = 0;
};

// Selects N* = argmin_i T_i / [p(Y_i|x)/p(Y_i)]; stops once T_i / r_max
// certifies that no later proposal can win. Throws ProposalBudgetExceeded if
// certification is not reached within max_proposals.
SimulationResult pfr_encode(const DiscreteJointChannel& ch, std::size_t x,
                            const CommonRandomness& z, std::uint64_t max_proposals = 1'000'000);

std::size_t pfr_decode(std::uint64_t index, const CommonRandomness& z);

struct EntropyEstimate {
  double mean_bits = 0.0;
  double stderr_bits = 0.0;
  std::size_t num_seeds = 0;
};

// H(N* | Z) estimated over seeds; per seed the conditional pmf of N* is exact
// (every x is encoded and weighted by P_X).
EntropyEstimate conditional_index_entropy(const DiscreteJointChannel& ch, std::size_t num_seeds,
                                          std::uint64_t seed0,
                                          std::uint64_t max_proposals = 1'000'000);

// Total-variation distance between the empirical joint of (X, y_out) and the
// channel's joint pmf.
double exactness_test(const DiscreteJointChannel& ch, std::size_t samples, std::uint64_t seed,
                      std::uint64_t max_proposals = 1'000'000);

} // namespace csd
