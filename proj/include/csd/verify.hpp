#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace csd {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
};

// The acceptance suite: every criterion with its pinned tolerances.
// Criteria involving Monte Carlo use streams derived from `seed`.
std::vector<CriterionResult> run_acceptance_suite(std::uint64_t seed = 20250801);

CriterionResult run_criterion(int id, std::uint64_t seed = 20250801);

std::string format_criterion_line(const CriterionResult& r);

} // namespace csd
