#include "csd/channel.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "csd/errors.hpp"
#include "csd/mathutil.hpp"

#include <json.hpp>

namespace csd {

namespace {
constexpr double kMassTol = 1e-9;       // reject if |total - 1| exceeds this
constexpr double kRelEqTol = 1e-12;     // level equality tolerance

bool nearly_equal(double a, double b) {
  return std::abs(a - b) <= kRelEqTol * std::max({1.0, std::abs(a), std::abs(b)});
}
} // namespace

DiscreteJointChannel::DiscreteJointChannel(std::vector<std::vector<double>> joint,
                                           bool y_symmetric)
    : y_symmetric_(y_symmetric) {
  nx_ = joint.size();
  if (nx_ == 0) throw ChannelParseError("joint matrix is empty");
  ny_ = joint[0].size();
  if (ny_ == 0) throw ChannelParseError("joint matrix has empty rows");

  joint_.resize(nx_ * ny_);
  double total = 0.0;
  for (std::size_t x = 0; x < nx_; ++x) {
    if (joint[x].size() != ny_)
      throw ChannelParseError("joint matrix rows have unequal lengths");
    for (std::size_t y = 0; y < ny_; ++y) {
      double p = joint[x][y];
      if (!(p >= 0.0) || !std::isfinite(p))
        throw ChannelParseError("joint matrix entries must be finite and >= 0");
      joint_[x * ny_ + y] = p;
      total += p;
    }
  }
  if (std::abs(total - 1.0) >= kMassTol)
    throw ChannelParseError("joint matrix mass deviates from 1 by >= 1e-9");
  for (double& p : joint_) p /= total;

  marginal_x_.assign(nx_, 0.0);
  marginal_y_.assign(ny_, 0.0);
  for (std::size_t x = 0; x < nx_; ++x)
    for (std::size_t y = 0; y < ny_; ++y) {
      marginal_x_[x] += joint_[x * ny_ + y];
      marginal_y_[y] += joint_[x * ny_ + y];
    }
  for (std::size_t x = 0; x < nx_; ++x)
    if (marginal_x_[x] <= 0.0)
      throw ChannelParseError("x-row " + std::to_string(x) + " has zero marginal mass");
  for (std::size_t y = 0; y < ny_; ++y)
    if (marginal_y_[y] <= 0.0)
      throw ChannelParseError("y-column " + std::to_string(y) + " has zero marginal mass");

  posterior_.resize(nx_ * ny_);
  for (std::size_t x = 0; x < nx_; ++x)
    for (std::size_t y = 0; y < ny_; ++y)
      posterior_[x * ny_ + y] = joint_[x * ny_ + y] / marginal_y_[y];
}

std::vector<double> DiscreteJointChannel::posterior_column(std::size_t y) const {
  std::vector<double> col(nx_);
  for (std::size_t x = 0; x < nx_; ++x) col[x] = posterior(x, y);
  return col;
}

double DiscreteJointChannel::likelihood_ratio(std::size_t x, std::size_t y) const {
  return posterior(x, y) / marginal_x_[x];
}

double DiscreteJointChannel::log_likelihood_ratio(std::size_t x, std::size_t y) const {
  double p = posterior(x, y);
  if (p == 0.0) return kNegInf;
  return std::log(p) - std::log(marginal_x_[x]);
}

double DiscreteJointChannel::y_likelihood_ratio(std::size_t y, std::size_t x) const {
  // p(y|x)/p(y) = p(x,y)/(p(x)p(y))
  return joint(x, y) / (marginal_x_[x] * marginal_y_[y]);
}

GaussianChannel::GaussianChannel(double sx, double sn) : sigma_x(sx), sigma_n(sn) {
  if (!(sigma_x > 0.0) || !(sigma_n > 0.0))
    throw ChannelParseError("gaussian channel requires sigma_x > 0 and sigma_n > 0");
}

double GaussianChannel::posterior_mean(double y) const {
  double vx = sigma_x * sigma_x, vn = sigma_n * sigma_n;
  return y * vx / (vx + vn);
}

double GaussianChannel::posterior_var() const {
  double vx = sigma_x * sigma_x, vn = sigma_n * sigma_n;
  return vx * vn / (vx + vn);
}

double GaussianChannel::log_likelihood_ratio(double x, double y) const {
  double vx = sigma_x * sigma_x;
  double vp = posterior_var();
  double mu = posterior_mean(y);
  return 0.5 * std::log(vx / vp) - (x - mu) * (x - mu) / (2.0 * vp) + x * x / (2.0 * vx);
}

double GaussianChannel::conditional_mean_llr(double y) const {
  double vx = sigma_x * sigma_x;
  double vp = posterior_var();
  double mu = posterior_mean(y);
  return 0.5 * std::log(vx / vp) - 0.5 + (mu * mu + vp) / (2.0 * vx);
}

double GaussianChannel::conditional_var_llr(double y) const {
  // ln r = const + a*u^2 + b*u with u = x - mu(y) ~ N(0, vp) under the posterior.
  double vx = sigma_x * sigma_x;
  double vp = posterior_var();
  double a = 1.0 / (2.0 * vx) - 1.0 / (2.0 * vp);
  double b = posterior_mean(y) / vx;
  return a * a * 2.0 * vp * vp + b * b * vp;
}

double mutual_information_nats(const DiscreteJointChannel& ch) {
  KahanSum s;
  for (std::size_t x = 0; x < ch.nx(); ++x)
    for (std::size_t y = 0; y < ch.ny(); ++y) {
      double pxy = ch.joint(x, y);
      if (pxy > 0.0) s.add(pxy * ch.log_likelihood_ratio(x, y));
    }
  return s.value();
}

double mutual_information_bits(const DiscreteJointChannel& ch) {
  KahanSum s;
  for (std::size_t x = 0; x < ch.nx(); ++x)
    for (std::size_t y = 0; y < ch.ny(); ++y) {
      double pxy = ch.joint(x, y);
      if (pxy > 0.0)
        s.add(pxy * (std::log2(ch.posterior(x, y)) - std::log2(ch.marginal_x(x))));
    }
  return s.value();
}

double mutual_information_nats(const GaussianChannel& ch) {
  double snr = (ch.sigma_x * ch.sigma_x) / (ch.sigma_n * ch.sigma_n);
  return 0.5 * std::log1p(snr);
}

double mutual_information_bits(const GaussianChannel& ch) {
  return nats_to_bits(mutual_information_nats(ch));
}

NonSingularityWitness is_nonsingular(const DiscreteJointChannel& ch) {
  for (std::size_t y = 0; y < ch.ny(); ++y) {
    double lo = kInf, hi = -kInf;
    for (std::size_t x = 0; x < ch.nx(); ++x) {
      if (ch.posterior(x, y) > 0.0) {
        double r = ch.likelihood_ratio(x, y);
        lo = std::min(lo, r);
        hi = std::max(hi, r);
      }
    }
    if (!nearly_equal(lo, hi)) return {true, y};
  }
  return {false, std::nullopt};
}

NonSingularityWitness is_nonsingular(const GaussianChannel&) {
  // ln r(.|y) is a non-degenerate quadratic in x for every y.
  return {true, std::nullopt};
}

LogLikelihoodStats llr_stats(const DiscreteJointChannel& ch) {
  LogLikelihoodStats out;
  KahanSum mean, second;
  out.per_y_variance.assign(ch.ny(), 0.0);
  for (std::size_t y = 0; y < ch.ny(); ++y) {
    KahanSum m1, m2;
    for (std::size_t x = 0; x < ch.nx(); ++x) {
      double p = ch.posterior(x, y);
      if (p > 0.0) {
        double l = ch.log_likelihood_ratio(x, y);
        m1.add(p * l);
        m2.add(p * l * l);
      }
    }
    double mu = m1.value();
    double var = std::max(0.0, m2.value() - mu * mu);
    out.per_y_variance[y] = var;
    double py = ch.marginal_y(y);
    mean.add(py * mu);
    second.add(py * m2.value());
    out.mean_conditional_var += py * var;
  }
  out.mean_nats = mean.value();
  out.var_nats2 = std::max(0.0, second.value() - out.mean_nats * out.mean_nats);
  return out;
}

LogLikelihoodStats llr_stats(const GaussianChannel& ch) {
  LogLikelihoodStats out;
  double vx = ch.sigma_x * ch.sigma_x, vn = ch.sigma_n * ch.sigma_n;
  double vp = ch.posterior_var();
  double a = 1.0 / (2.0 * vx) - 1.0 / (2.0 * vp);
  double e_mu2 = vx * vx / (vx + vn);  // E[mu(Y)^2], Y ~ N(0, vx+vn)
  out.mean_nats = mutual_information_nats(ch);
  out.mean_conditional_var = 2.0 * a * a * vp * vp + e_mu2 * vp / (vx * vx);
  // kappa_Y is affine in mu(Y)^2; Var[mu(Y)^2] = 2 E[mu^2]^2 for Gaussian mu(Y).
  double var_kappa = 2.0 * e_mu2 * e_mu2 / (4.0 * vx * vx);
  out.var_nats2 = out.mean_conditional_var + var_kappa;
  return out;
}

namespace {

ChannelSpec spec_from_json(const nlohmann::json& j, const std::string& name) {
  ChannelSpec spec;
  spec.name = name;
  std::string type = j.value("type", "");
  if (type == "discrete") {
    if (!j.contains("joint") || !j["joint"].is_array())
      throw ChannelParseError("discrete channel requires a 'joint' matrix");
    std::vector<std::vector<double>> m;
    for (const auto& row : j["joint"]) {
      if (!row.is_array()) throw ChannelParseError("'joint' must be a matrix");
      m.emplace_back();
      for (const auto& v : row) {
        if (!v.is_number()) throw ChannelParseError("'joint' entries must be numbers");
        m.back().push_back(v.get<double>());
      }
    }
    spec.kind = ChannelSpec::Kind::discrete;
    spec.discrete.emplace(std::move(m), j.value("y_symmetric", false));
  } else if (type == "gaussian") {
    if (!j.contains("sigma_x") || !j.contains("sigma_n"))
      throw ChannelParseError("gaussian channel requires sigma_x and sigma_n");
    spec.kind = ChannelSpec::Kind::gaussian;
    spec.gaussian.emplace(j["sigma_x"].get<double>(), j["sigma_n"].get<double>());
  } else {
    throw ChannelParseError("channel 'type' must be \"discrete\" or \"gaussian\"");
  }
  return spec;
}

} // namespace

ChannelSpec parse_channel_json(const std::string& text, const std::string& name) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ChannelParseError(std::string("invalid channel JSON: ") + e.what());
  }
  return spec_from_json(j, name);
}

ChannelSpec load_channel_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ChannelParseError("cannot open channel file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_channel_json(ss.str(), path);
}

std::string channel_to_json(const ChannelSpec& spec) {
  nlohmann::json j;
  if (spec.kind == ChannelSpec::Kind::discrete) {
    j["type"] = "discrete";
    const auto& ch = *spec.discrete;
    auto rows = nlohmann::json::array();
    for (std::size_t x = 0; x < ch.nx(); ++x) {
      auto row = nlohmann::json::array();
      for (std::size_t y = 0; y < ch.ny(); ++y) row.push_back(ch.joint(x, y));
      rows.push_back(row);
    }
    j["joint"] = rows;
    j["y_symmetric"] = ch.y_symmetric_declared();
  } else {
    j["type"] = "gaussian";
    j["sigma_x"] = spec.gaussian->sigma_x;
    j["sigma_n"] = spec.gaussian->sigma_n;
  }
  return j.dump(2);
}

DiscreteJointChannel make_independent_channel() {
  // X uniform on {0,1}, Y ~ (0.3, 0.7) independent of X.
  return DiscreteJointChannel({{0.15, 0.35}, {0.15, 0.35}}, /*y_symmetric=*/true);
}

DiscreteJointChannel make_identity_channel() {
  return DiscreteJointChannel({{0.5, 0.0}, {0.0, 0.5}}, /*y_symmetric=*/true);
}

DiscreteJointChannel make_bsc(double crossover) {
  double p = crossover;
  if (!(p >= 0.0) || !(p <= 1.0)) throw ConfigError("BSC crossover must be in [0,1]");
  return DiscreteJointChannel({{0.5 * (1.0 - p), 0.5 * p}, {0.5 * p, 0.5 * (1.0 - p)}},
                              /*y_symmetric=*/true);
}

DiscreteJointChannel make_random4x4_channel() {
  // Fixed non-singular 4x4 joint pmf (entries sum to 1).
  return DiscreteJointChannel({
      {0.0837, 0.0294, 0.0628, 0.0473},
      {0.0211, 0.0902, 0.0341, 0.0856},
      {0.0714, 0.0189, 0.1036, 0.0422},
      {0.0358, 0.0767, 0.0245, 0.1727},
  });
}

GaussianChannel make_unit_gaussian_channel() { return {1.0, 1.0}; }

ChannelSpec bundled_channel(const std::string& name) {
  ChannelSpec spec;
  spec.name = name;
  if (name == "independent") {
    spec.kind = ChannelSpec::Kind::discrete;
    spec.discrete = make_independent_channel();
  } else if (name == "identity") {
    spec.kind = ChannelSpec::Kind::discrete;
    spec.discrete = make_identity_channel();
  } else if (name == "bsc11") {
    spec.kind = ChannelSpec::Kind::discrete;
    spec.discrete = make_bsc(0.11);
  } else if (name == "bsc25") {
    spec.kind = ChannelSpec::Kind::discrete;
    spec.discrete = make_bsc(0.25);
  } else if (name == "rand4x4") {
    spec.kind = ChannelSpec::Kind::discrete;
    spec.discrete = make_random4x4_channel();
  } else if (name == "gaussian11") {
    spec.kind = ChannelSpec::Kind::gaussian;
    spec.gaussian = make_unit_gaussian_channel();
  } else {
    throw ConfigError("unknown bundled channel: " + name);
  }
  return spec;
}

std::vector<std::string> bundled_channel_names() {
  return {"independent", "identity", "bsc11", "bsc25", "rand4x4", "gaussian11"};
}

} // namespace csd
