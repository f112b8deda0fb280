#include "hcw/error.hpp"

namespace hcw {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::EmptySet: return "EmptySet";
    case ErrorKind::StructuralViolation: return "StructuralViolation";
    case ErrorKind::DisconnectedBulk: return "DisconnectedBulk";
    case ErrorKind::EpsilonTooLarge: return "EpsilonTooLarge";
    case ErrorKind::SolvabilityViolated: return "SolvabilityViolated";
    case ErrorKind::SingularSystem: return "SingularSystem";
    case ErrorKind::NegativeRate: return "NegativeRate";
    case ErrorKind::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorKind::StepTooCoarse: return "StepTooCoarse";
    case ErrorKind::CFLViolation: return "CFLViolation";
    case ErrorKind::GridTooCoarse: return "GridTooCoarse";
    case ErrorKind::DegenerateProblem: return "DegenerateProblem";
    case ErrorKind::DomainTooShort: return "DomainTooShort";
    case ErrorKind::InconclusiveStatistics: return "InconclusiveStatistics";
  }
  return "Unknown";
}

Error::Error(ErrorKind kind, const std::string& what)
    : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

void raise(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace hcw
