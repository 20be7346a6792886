// Acceptance suite runner: one line per criterion, nonzero exit on any failure.
#include <cstdio>
#include <cstdlib>
#include <cstring>

#include "csd/verify.hpp"

int main(int argc, char** argv) {
  std::uint64_t seed = 20250801;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--seed") == 0 && i + 1 < argc)
      seed = std::strtoull(argv[++i], nullptr, 10);
  }
  auto results = csd::run_acceptance_suite(seed);
  bool all = true;
  for (const auto& r : results) {
    std::puts(csd::format_criterion_line(r).c_str());
    all = all && r.pass;
  }
  std::printf("%s: %zu/%zu criteria passed\n", all ? "OK" : "FAILED",
              static_cast<std::size_t>(
                  std::count_if(results.begin(), results.end(),
                                [](const auto& r) { return r.pass; })),
              results.size());
  return all ? 0 : 1;
}
