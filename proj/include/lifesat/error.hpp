#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace lifesat {

enum class ErrorCode {
  ContractViolation,
  Validation,
  IncompleteInput,
  Sequencing,
  SessionComplete,
  EmptyHistory,
  NotEstimable,
  EstimationFailure,
  Domain,
  Range,
  ZeroVariance,
  UndefinedStatistic,
  Version,
  NotFound,
  Parse,
  Io,
};

std::string_view to_string(ErrorCode code) noexcept;

// Single exception type for the library; `code()` is stable and is what the
// HTTP layer and CLI map to status codes / exit codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace lifesat
