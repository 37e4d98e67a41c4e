#include "digame/error.hpp"

namespace digame {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::NonFiniteState: return "NonFiniteState";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::SingularJacobian: return "SingularJacobian";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::LeftLocalBranch: return "LeftLocalBranch";
    case ErrorCode::UnknownScenario: return "UnknownScenario";
    case ErrorCode::BadParams: return "BadParams";
    case ErrorCode::InvalidProbeSet: return "InvalidProbeSet";
    case ErrorCode::ExhaustedDraws: return "ExhaustedDraws";
    case ErrorCode::AnchorTooEarly: return "AnchorTooEarly";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::AllCandidatesFailed: return "AllCandidatesFailed";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::UnknownSession: return "UnknownSession";
    case ErrorCode::SessionTerminated: return "SessionTerminated";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message,
             std::optional<long> index, std::optional<std::string> field)
    : std::runtime_error(std::string(to_string(code)) + ": " + message),
      code_(code),
      index_(index),
      field_(std::move(field)) {}

}  // namespace digame
