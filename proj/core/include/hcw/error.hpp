#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hcw {

enum class ErrorKind {
  InvalidArgument,
  ParseError,
  // cell
  EmptySet,
  StructuralViolation,
  DisconnectedBulk,
  EpsilonTooLarge,
  // corrector
  SolvabilityViolated,
  SingularSystem,
  NegativeRate,
  NotPositiveDefinite,
  // macromodel
  StepTooCoarse,
  CFLViolation,
  GridTooCoarse,
  DegenerateProblem,
  DomainTooShort,
  // validation
  InconclusiveStatistics,
};

std::string_view to_string(ErrorKind kind);

/// Every failure raised by the library carries a kind so callers (and the CLI
/// exit-code mapping) can branch without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what);

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void raise(ErrorKind kind, const std::string& what);

}  // namespace hcw
