#pragma once

#include <stdexcept>
#include <string>

namespace csd {

// Exit codes used by the csdlab CLI. Library errors map onto these so scripts
// can distinguish failure modes.
enum class ExitCode : int {
  ok = 0,
  other = 1,
  config = 2,
  parse = 3,
  bound_violation = 4,
  budget_exceeded = 5,
  block_too_large = 6,
  symmetry_required = 7,
  singular_channel = 8,
  absolute_continuity = 9,
  radius_out_of_range = 10,
  empty_set = 11,
};

class Error : public std::runtime_error {
public:
  Error(ExitCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ExitCode code() const { return code_; }

private:
  ExitCode code_;
};

#define CSD_DEFINE_ERROR(Name, code)                                          \
  class Name : public Error {                                                 \
  public:                                                                     \
    explicit Name(const std::string& what) : Error(code, what) {}             \
  }

CSD_DEFINE_ERROR(ConfigError, ExitCode::config);
CSD_DEFINE_ERROR(ChannelParseError, ExitCode::parse);
CSD_DEFINE_ERROR(BoundViolation, ExitCode::bound_violation);
CSD_DEFINE_ERROR(ProposalBudgetExceeded, ExitCode::budget_exceeded);
CSD_DEFINE_ERROR(BlockTooLarge, ExitCode::block_too_large);
CSD_DEFINE_ERROR(SymmetryRequired, ExitCode::symmetry_required);
CSD_DEFINE_ERROR(SingularChannel, ExitCode::singular_channel);
CSD_DEFINE_ERROR(AbsoluteContinuityViolation, ExitCode::absolute_continuity);
CSD_DEFINE_ERROR(RadiusOutOfRange, ExitCode::radius_out_of_range);
CSD_DEFINE_ERROR(EmptySet, ExitCode::empty_set);

#undef CSD_DEFINE_ERROR

} // namespace csd
