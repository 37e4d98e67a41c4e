#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace digame {

enum class ErrorCode {
  NonFiniteState,
  NonFiniteValue,
  SingularJacobian,
  NoConvergence,
  LeftLocalBranch,
  UnknownScenario,
  BadParams,
  InvalidProbeSet,
  ExhaustedDraws,
  AnchorTooEarly,
  InvalidSpec,
  AllCandidatesFailed,
  ParseError,
  ConfigError,
  UnknownSession,
  SessionTerminated,
  IoError,
};

std::string_view to_string(ErrorCode code) noexcept;

// Single exception type for the library. `index` carries a step, line or
// grid index when one is meaningful; `field` a config field path.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message,
        std::optional<long> index = std::nullopt,
        std::optional<std::string> field = std::nullopt);

  ErrorCode code() const noexcept { return code_; }
  const std::optional<long>& index() const noexcept { return index_; }
  const std::optional<std::string>& field() const noexcept { return field_; }

 private:
  ErrorCode code_;
  std::optional<long> index_;
  std::optional<std::string> field_;
};

}  // namespace digame
