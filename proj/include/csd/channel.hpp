#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace csd {

// Joint pmf of a finite (X, Y) pair. Rows index x, columns index y.
// Construction normalizes total mass (if off by < 1e-9), rejects negative
// entries and zero-mass rows/columns, and caches marginals and posteriors.
// Immutable after construction; all member queries are const.
class DiscreteJointChannel {
public:
  // joint[x][y]; y_symmetric declares that the conditional law of the
  // log-likelihood ratio does not depend on y (see blocks.hpp exact mode).
  explicit DiscreteJointChannel(std::vector<std::vector<double>> joint,
                                bool y_symmetric = false);

  std::size_t nx() const { return nx_; }
  std::size_t ny() const { return ny_; }
  bool y_symmetric_declared() const { return y_symmetric_; }

  double joint(std::size_t x, std::size_t y) const { return joint_[x * ny_ + y]; }
  double marginal_x(std::size_t x) const { return marginal_x_[x]; }
  double marginal_y(std::size_t y) const { return marginal_y_[y]; }
  // p(x|y)
  double posterior(std::size_t x, std::size_t y) const { return posterior_[x * ny_ + y]; }

  const std::vector<double>& marginal_x() const { return marginal_x_; }
  const std::vector<double>& marginal_y() const { return marginal_y_; }
  std::vector<double> posterior_column(std::size_t y) const;

  // ln[p(x|y)/p(x)] in nats; -inf when p(x|y) = 0.
  double log_likelihood_ratio(std::size_t x, std::size_t y) const;
  // p(x|y)/p(x)
  double likelihood_ratio(std::size_t x, std::size_t y) const;
  // p(y|x)/p(y), the ratio driving the proposal sampler.
  double y_likelihood_ratio(std::size_t y, std::size_t x) const;

private:
  std::size_t nx_ = 0, ny_ = 0;
  bool y_symmetric_ = false;
  std::vector<double> joint_;      // row-major nx * ny
  std::vector<double> marginal_x_;
  std::vector<double> marginal_y_;
  std::vector<double> posterior_;  // p(x|y), row-major
};

// X ~ N(0, sigma_x^2), Y = X + N(0, sigma_n^2).
struct GaussianChannel {
  double sigma_x = 1.0;
  double sigma_n = 1.0;

  GaussianChannel(double sx, double sn);

  double posterior_mean(double y) const;  // E[X|Y=y]
  double posterior_var() const;           // Var[X|Y=y], y-independent
  // ln[dP_{X|Y}/dP_X](x|y) in nats.
  double log_likelihood_ratio(double x, double y) const;
  // E_{X|y}[ln r(X|y)] in nats.
  double conditional_mean_llr(double y) const;
  // Var_{X|y}[ln r(X|y)] in nats^2.
  double conditional_var_llr(double y) const;
};

struct LogLikelihoodStats {
  double mean_nats = 0.0;                // E[ln r] under the joint = I in nats
  double var_nats2 = 0.0;                // Var[ln r] under the joint
  std::vector<double> per_y_variance;    // sigma^2_y, discrete channels only
  double mean_conditional_var = 0.0;     // E_Y[sigma^2_Y]
};

struct NonSingularityWitness {
  bool nonsingular = false;
  std::optional<std::size_t> witness_y;  // set when nonsingular (discrete)
};

// I(X;Y) in bits. Exact double sum (discrete) / closed form (Gaussian).
double mutual_information_bits(const DiscreteJointChannel& ch);
double mutual_information_bits(const GaussianChannel& ch);
double mutual_information_nats(const DiscreteJointChannel& ch);
double mutual_information_nats(const GaussianChannel& ch);

// True iff r(.|y) takes at least two distinct values on the support of
// p(.|y) for some y. A channel with r identically 1 is singular.
NonSingularityWitness is_nonsingular(const DiscreteJointChannel& ch);
NonSingularityWitness is_nonsingular(const GaussianChannel& ch);

LogLikelihoodStats llr_stats(const DiscreteJointChannel& ch);
LogLikelihoodStats llr_stats(const GaussianChannel& ch);

// Channel spec files: {"type":"discrete","joint":[[...],...]} or
// {"type":"gaussian","sigma_x":...,"sigma_n":...}.
struct ChannelSpec {
  enum class Kind { discrete, gaussian } kind;
  std::optional<DiscreteJointChannel> discrete;
  std::optional<GaussianChannel> gaussian;
  std::string name;  // label used in reports
};

ChannelSpec parse_channel_json(const std::string& text, const std::string& name = "");
ChannelSpec load_channel_file(const std::string& path);
std::string channel_to_json(const ChannelSpec& spec);

// Bundled fixtures.
DiscreteJointChannel make_independent_channel();        // 2x2, product law
DiscreteJointChannel make_identity_channel();           // uniform X, Y = X
DiscreteJointChannel make_bsc(double crossover);        // uniform input BSC
DiscreteJointChannel make_random4x4_channel();          // fixed literal values
GaussianChannel make_unit_gaussian_channel();           // sigma_x = sigma_n = 1
ChannelSpec bundled_channel(const std::string& name);
std::vector<std::string> bundled_channel_names();

} // namespace csd
