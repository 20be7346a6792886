#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

namespace csd {

// Counter-based generator: a keyed integer hash evaluated at (counter, stream).
// Any draw is addressable in O(1), so shared proposal streams can be read at a
// random index without replaying the prefix, and parallel workers can consume
// disjoint counters without coordination. The mix is the splitmix64 finalizer
// applied twice with distinct round keys.
class CounterRng {
public:
  explicit CounterRng(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t seed() const { return seed_; }

  std::uint64_t bits(std::uint64_t counter, std::uint64_t stream = 0) const {
    std::uint64_t z = seed_ ^ (0x9E3779B97F4A7C15ULL * (stream + 0x632BE59BD9B4E019ULL));
    z = mix(z + 0x9E3779B97F4A7C15ULL * counter);
    return mix(z ^ 0xD1B54A32D192ED03ULL);
  }

  // Uniform on (0,1], 53 bits. Never returns 0, so log() is safe.
  double unit(std::uint64_t counter, std::uint64_t stream = 0) const {
    return (static_cast<double>(bits(counter, stream) >> 11) + 1.0) * 0x1p-53;
  }

  // Uniform on [0,1).
  double unit_co(std::uint64_t counter, std::uint64_t stream = 0) const {
    return static_cast<double>(bits(counter, stream) >> 11) * 0x1p-53;
  }

  double exponential(std::uint64_t counter, std::uint64_t stream = 0) const {
    return -std::log(unit(counter, stream));
  }

  // Derive an independent generator (e.g. one per Monte-Carlo task).
  CounterRng derive(std::uint64_t salt) const {
    return CounterRng(mix(seed_ ^ mix(salt + 0xA0761D6478BD642FULL)));
  }

  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

private:
  std::uint64_t seed_;
};

// Sequential convenience wrapper over CounterRng.
class SeqRng {
public:
  explicit SeqRng(std::uint64_t seed) : rng_(seed) {}
  explicit SeqRng(const CounterRng& rng) : rng_(rng) {}

  std::uint64_t bits() { return rng_.bits(counter_++); }
  double unit() { return rng_.unit(counter_++); }          // (0,1]
  double unit_co() { return rng_.unit_co(counter_++); }    // [0,1)
  double exponential() { return -std::log(unit()); }

  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u = unit();
    double v = unit_co();
    double r = std::sqrt(-2.0 * std::log(u));
    double a = 2.0 * M_PI * v;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  // Index into a pmf by inverse CDF; pmf need not be exactly normalized
  // (the last bucket absorbs the residual).
  std::size_t categorical(std::span<const double> pmf) {
    double u = unit_co();
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < pmf.size(); ++i) {
      acc += pmf[i];
      if (u < acc) return i;
    }
    return pmf.empty() ? 0 : pmf.size() - 1;
  }

private:
  CounterRng rng_;
  std::uint64_t counter_ = 0;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// Precomputed inverse-CDF sampler for a fixed pmf.
class CategoricalSampler {
public:
  explicit CategoricalSampler(std::span<const double> pmf) {
    cdf_.reserve(pmf.size());
    double acc = 0.0;
    for (double p : pmf) {
      acc += p;
      cdf_.push_back(acc);
    }
    if (!cdf_.empty()) cdf_.back() = 1.0;
  }

  std::size_t operator()(double u01) const {
    std::size_t lo = 0, hi = cdf_.size() - 1;
    while (lo < hi) {
      std::size_t mid = (lo + hi) / 2;
      if (u01 < cdf_[mid])
        hi = mid;
      else
        lo = mid + 1;
    }
    return lo;
  }

private:
  std::vector<double> cdf_;
};

} // namespace csd
