#include "csd/experiment.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "csd/blocks.hpp"
#include "csd/channel.hpp"
#include "csd/errors.hpp"
#include "csd/mathutil.hpp"
#include "csd/sampler.hpp"
#include "csd/tilting.hpp"
#include "csd/verify.hpp"
#include "csd/version.hpp"
#include "csd/width.hpp"

namespace csd {

namespace {

using nlohmann::json;

ChannelSpec resolve_channel(const std::string& ref) {
  if (ref.rfind("builtin:", 0) == 0) return bundled_channel(ref.substr(8));
  return load_channel_file(ref);
}

json divergence_report_json(const DivergenceReport& r) {
  return json{{"d_cs_bits", r.d_cs},
              {"d_kl_direct_bits", r.d_kl_direct},
              {"d_kl_integral_bits", r.d_kl_integral},
              {"gap_bits", r.gap},
              {"log_width_entropy_bits", r.log_width_entropy}};
}

json constants_json(const RegularityConstants& c) {
  return json{{"lambda_lo", c.lambda_lo}, {"lambda_hi", c.lambda_hi},
              {"m2_lo", c.m2_lo},         {"m2_hi", c.m2_hi},
              {"m3_hi", c.m3_hi},         {"m_lo", c.m_lo},
              {"log_m_lo", c.log_m_lo},   {"n0", c.n0},
              {"epsilon", c.epsilon}};
}

json run_divergence(const ExperimentConfig& cfg, const ChannelSpec& spec) {
  json results;
  if (spec.kind == ChannelSpec::Kind::discrete) {
    const auto& ch = *spec.discrete;
    json slices = json::array();
    for (std::size_t y = 0; y < ch.ny(); ++y) {
      json s = divergence_report_json(slice_divergence(ch, y));
      s["y"] = y;
      s["p_y"] = ch.marginal_y(y);
      slices.push_back(s);
    }
    results["slices"] = slices;
    results["expected_dcs_bits"] = expected_dcs_bits(ch);
    results["mutual_information_bits"] = mutual_information_bits(ch);
    auto ns = is_nonsingular(ch);
    results["nonsingular"] = ns.nonsingular;
    if (ns.witness_y) results["witness_y"] = *ns.witness_y;
  } else {
    results = divergence_report_json(gaussian_divergence(*spec.gaussian, cfg.y_value));
    results["y"] = cfg.y_value;
    results["mutual_information_bits"] = mutual_information_bits(*spec.gaussian);
  }
  return results;
}

json run_redundancy(const ExperimentConfig& cfg, const ChannelSpec& spec) {
  if (spec.kind != ChannelSpec::Kind::discrete)
    throw ConfigError("redundancy-sweep requires a discrete channel");
  if (cfg.n_list.empty()) throw ConfigError("redundancy-sweep requires n_list");
  RedundancyOptions opts;
  opts.mc.samples = cfg.samples;
  opts.mc.seed = cfg.seed;
  auto curve = redundancy_curve(*spec.discrete, cfg.n_list, opts);
  json rows = json::array();
  for (const auto& p : curve) {
    rows.push_back(json{{"n", p.n},
                        {"expected_dcs_bits", p.expected_dcs},
                        {"block_mi_bits", p.block_mi},
                        {"gap_bits", p.gap},
                        {"gap_over_lbn", p.gap_over_lbn},
                        {"stderr_bits", p.stderr_bits},
                        {"mode", p.mode},
                        {"seed", p.seed}});
  }
  return json{{"curve", rows}};
}

json run_simulate(const ExperimentConfig& cfg, const ChannelSpec& spec, bool* bounds_ok) {
  if (spec.kind != ChannelSpec::Kind::discrete)
    throw ConfigError("simulate requires a discrete channel");
  if (cfg.samples < 1) throw ConfigError("simulate requires samples >= 1");
  const auto& ch = *spec.discrete;
  double edcs = expected_dcs_bits(ch);
  EntropyEstimate est = conditional_index_entropy(ch, cfg.num_seeds, cfg.seed,
                                                  cfg.max_proposals);
  double tv = exactness_test(ch, cfg.samples, CounterRng(cfg.seed).derive(1).seed(),
                             cfg.max_proposals);
  bool bound = est.mean_bits >= edcs - 3.0 * est.stderr_bits;
  *bounds_ok = *bounds_ok && bound;
  return json{{"channel", spec.name},
              {"num_seeds", est.num_seeds},
              {"H_index_bits", est.mean_bits},
              {"stderr", est.stderr_bits},
              {"E_dcs_bits", edcs},
              {"bound_satisfied", bound},
              {"tv_distance", tv},
              {"tv_samples", cfg.samples}};
}

json run_tilt_lab(const ExperimentConfig& cfg, const ChannelSpec& spec, bool* bounds_ok) {
  if (spec.kind != ChannelSpec::Kind::discrete)
    throw ConfigError("tilt-lab requires a discrete channel");
  const auto& ch = *spec.discrete;
  RegularityConstants constants =
      assemble_regularity_constants(ch, cfg.lambda_grid_resolution, cfg.epsilon);
  json results{{"constants", constants_json(constants)}};

  if (cfg.tilt_verb == "cumulant") {
    if (cfg.y >= ch.ny()) throw ConfigError("y out of range");
    CumulantData c = cumulant(ch, cfg.lambda, cfg.y);
    results["cumulant"] = json{{"lambda", c.lambda}, {"y", c.y},      {"value", c.value},
                               {"d1", c.d1},         {"d2", c.d2},   {"d3", c.d3}};
  } else if (cfg.tilt_verb == "dominance") {
    json rows = json::array();
    bool all = true;
    for (std::size_t y = 0; y < ch.ny(); ++y) {
      auto d = stochastic_dominance_check(ch, y, constants.lambda_lo, constants.lambda_hi);
      all = all && d.dominated;
      rows.push_back(json{{"y", y}, {"dominated", d.dominated},
                          {"worst_margin", d.worst_margin}});
    }
    results["dominance"] = rows;
    *bounds_ok = *bounds_ok && all;
  } else if (cfg.tilt_verb == "typicality") {
    std::size_t n = cfg.n_list.empty() ? 256 : cfg.n_list.front();
    auto grid = k_epsilon_grid(constants.lambda_lo, constants.lambda_hi, constants.epsilon);
    TypicalitySweep s = typicality_mc_sweep(ch, n, constants.epsilon, grid,
                                            cfg.samples, cfg.seed);
    results["typicality"] = json{{"n", n},
                                 {"blocks", s.blocks},
                                 {"atypical", s.atypical},
                                 {"atypical_frequency", s.atypical_frequency},
                                 {"chebyshev_c", s.chebyshev_c},
                                 {"holds", s.holds}};
    *bounds_ok = *bounds_ok && s.holds;
  } else if (cfg.tilt_verb == "ball") {
    if (cfg.n_list.empty()) throw ConfigError("tilt-lab ball requires n_list");
    double iota = mutual_information_nats(ch) + cfg.iota_offset_nats;
    json rows = json::array();
    bool all = true;
    SeqRng rng(cfg.seed);
    CategoricalSampler sample_y(ch.marginal_y());
    for (std::size_t n : cfg.n_list) {
      std::vector<std::size_t> block(n);
      for (auto& y : block) y = sample_y(rng.unit_co());
      BallBoundResult b = ball_probability_bound_check(ch, block, constants, iota);
      all = all && b.holds;
      rows.push_back(json{{"n", n},
                          {"iota_nats", iota},
                          {"lambda_star", b.lambda_star},
                          {"log2_p_b", b.log2_p_b},
                          {"log2_bound", b.log2_bound},
                          {"slack_bits", b.slack_bits},
                          {"holds", b.holds}});
    }
    results["ball"] = rows;
    *bounds_ok = *bounds_ok && all;
  } else {
    throw ConfigError("tilt-lab verb must be cumulant | dominance | typicality | ball");
  }
  return results;
}

json run_verify_all(const ExperimentConfig& cfg, bool* bounds_ok) {
  auto results = run_acceptance_suite(cfg.seed);
  json rows = json::array();
  bool all = true;
  for (const auto& r : results) {
    all = all && r.pass;
    rows.push_back(json{{"id", r.id},
                        {"name", r.name},
                        {"pass", r.pass},
                        {"detail", r.detail},
                        {"seconds", r.seconds}});
  }
  *bounds_ok = *bounds_ok && all;
  return json{{"criteria", rows}, {"all_pass", all}};
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string to_csv(const ExperimentConfig& cfg, const json& results) {
  std::ostringstream out;
  out.setf(std::ios::fmtflags(0), std::ios::floatfield);
  out.precision(17);
  if (cfg.experiment == "redundancy-sweep") {
    out << "n,expected_dcs_bits,block_mi_bits,gap_bits,gap_over_lbn,stderr_bits,mode,seed\n";
    for (const auto& row : results.at("curve")) {
      out << row.at("n").get<std::size_t>() << ','
          << row.at("expected_dcs_bits").get<double>() << ','
          << row.at("block_mi_bits").get<double>() << ',' << row.at("gap_bits").get<double>()
          << ',' << row.at("gap_over_lbn").get<double>() << ','
          << row.at("stderr_bits").get<double>() << ','
          << csv_escape(row.at("mode").get<std::string>()) << ','
          << row.at("seed").get<std::uint64_t>() << '\n';
    }
    return out.str();
  }
  if (cfg.experiment == "divergence") {
    out << "y,p_y,d_cs_bits,d_kl_direct_bits,d_kl_integral_bits,gap_bits,"
           "log_width_entropy_bits\n";
    auto emit = [&](const json& s, const std::string& y, double py) {
      out << y << ',' << py << ',' << s.at("d_cs_bits").get<double>() << ','
          << s.at("d_kl_direct_bits").get<double>() << ','
          << s.at("d_kl_integral_bits").get<double>() << ',' << s.at("gap_bits").get<double>()
          << ',' << s.at("log_width_entropy_bits").get<double>() << '\n';
    };
    if (results.contains("slices")) {
      for (const auto& s : results.at("slices"))
        emit(s, std::to_string(s.at("y").get<std::size_t>()), s.at("p_y").get<double>());
    } else {
      emit(results, std::to_string(results.at("y").get<double>()), 0.0);
    }
    return out.str();
  }
  throw ConfigError("csv output is only defined for divergence and redundancy-sweep");
}

} // namespace

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  ExperimentConfig c;
  try {
    c.channel = j.value("channel", std::string{});
    c.experiment = j.value("experiment", std::string{});
    c.seed = j.value("seed", std::uint64_t{1});
    if (j.contains("n_list"))
      for (const auto& v : j.at("n_list")) c.n_list.push_back(v.get<std::size_t>());
    c.samples = j.value("samples", std::size_t{10000});
    c.num_seeds = j.value("num_seeds", std::size_t{500});
    c.epsilon = j.value("epsilon", 0.0);
    c.lambda_grid_resolution = j.value("lambda_grid_resolution", 1e-3);
    c.lambda = j.value("lambda", 0.7);
    c.y = j.value("y", std::size_t{0});
    c.y_value = j.value("y_value", 1.0);
    c.iota_offset_nats = j.value("iota_offset_nats", 0.01);
    c.max_proposals = j.value("max_proposals", std::uint64_t{1'000'000});
    c.tilt_verb = j.value("tilt_verb", std::string{"cumulant"});
    c.output_path = j.value("output_path", std::string{});
    c.output_format = j.value("output_format", std::string{"json"});
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad config field: ") + e.what());
  }
  if (c.experiment.empty()) throw ConfigError("config requires an 'experiment' field");
  if (c.output_format != "json" && c.output_format != "csv")
    throw ConfigError("output_format must be json or csv");
  for (std::size_t i = 1; i < c.n_list.size(); ++i)
    if (c.n_list[i] <= c.n_list[i - 1])
      throw ConfigError("n_list must be strictly increasing");
  if (!(c.epsilon >= 0.0)) throw ConfigError("epsilon must be >= 0");
  return c;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid config JSON: ") + e.what());
  }
  return from_json(j);
}

json ExperimentConfig::to_json() const {
  json j{{"channel", channel},
         {"experiment", experiment},
         {"seed", seed},
         {"samples", samples},
         {"num_seeds", num_seeds},
         {"epsilon", epsilon},
         {"lambda_grid_resolution", lambda_grid_resolution},
         {"lambda", lambda},
         {"y", y},
         {"y_value", y_value},
         {"iota_offset_nats", iota_offset_nats},
         {"max_proposals", max_proposals},
         {"tilt_verb", tilt_verb},
         {"output_path", output_path},
         {"output_format", output_format}};
  j["n_list"] = n_list;
  return j;
}

RunResult run(const ExperimentConfig& cfg) {
  auto t0 = std::chrono::steady_clock::now();
  RunResult out;
  json results;
  std::string channel_name;
  if (cfg.experiment == "verify-all") {
    results = run_verify_all(cfg, &out.bounds_ok);
    channel_name = "bundled";
  } else {
    if (cfg.channel.empty()) throw ConfigError("config requires a 'channel' field");
    ChannelSpec spec = resolve_channel(cfg.channel);
    channel_name = spec.name;
    if (cfg.experiment == "divergence") {
      results = run_divergence(cfg, spec);
    } else if (cfg.experiment == "redundancy-sweep") {
      results = run_redundancy(cfg, spec);
    } else if (cfg.experiment == "simulate") {
      results = run_simulate(cfg, spec, &out.bounds_ok);
    } else if (cfg.experiment == "tilt-lab") {
      results = run_tilt_lab(cfg, spec, &out.bounds_ok);
    } else {
      throw ConfigError("unknown experiment: " + cfg.experiment);
    }
  }
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  out.record = json{{"schema_version", kSchemaVersion},
                    {"library_version", kVersion},
                    {"experiment", cfg.experiment},
                    {"channel", channel_name},
                    {"config", cfg.to_json()},
                    {"results", results},
                    {"wall_seconds", secs}};
  return out;
}

void write_record(const RunResult& result, const ExperimentConfig& cfg) {
  std::string payload = cfg.output_format == "csv"
                            ? to_csv(cfg, result.record.at("results"))
                            : result.record.dump(2) + "\n";
  if (cfg.output_path.empty()) {
    std::cout << payload;
    return;
  }
  namespace fs = std::filesystem;
  fs::path target(cfg.output_path);
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw ConfigError("cannot open output file: " + tmp.string());
    out << payload;
  }
  fs::rename(tmp, target);
}

} // namespace csd
