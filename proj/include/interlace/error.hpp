#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace interlace {

enum class ErrorCode {
  EmptySet,
  UnboundedStop,
  RangeOverrun,
  EmptyEnsemble,
  DpBudget,
  QuadBudget,
  SolveFailed,
  NegativeMass,
  ChainBudget,
  NotConnected,
  KillBudget,
  NotInSet,
  RayEmpty,
  OutOfRange,
  SparseRange,
  SlabBudget,
  Clobber,
  MixedConfig,
  ConfigError,
  FormatError,
};

std::string_view error_name(ErrorCode code);

// Every failure the library reports carries one of the codes above so callers
// (and the CLI) can branch on the kind without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(error_name(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace interlace
