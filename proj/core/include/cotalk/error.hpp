#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace cotalk {

enum class ErrorCode {
  InvalidArgument,
  UnknownUnit,
  ProviderUnavailable,
  ProviderTimeout,
  MalformedResponse,
  UnsupportedFormat,
  SessionNotFinalized,
  MissingReference,
  ZeroTime,
  InvalidMode,
  OutOfOrderRound,
  SessionClosed,
  GatewayFailure,
  IncompleteParallelSession,
  EmptySession,
  LedgerIncomplete,
  NothingToRead,
  PriorNotServed,
  MergePending,
  RoundLimitReached,
  NonMonotoneTiming,
  NotFound,
  InvalidScenario,
  PremiseViolation,
  CorruptLog,
  InvalidConfig,
  Io,
};

std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Raised while replaying an event log; `line()` is 1-based.
class CorruptLogError : public Error {
 public:
  CorruptLogError(std::size_t line, const std::string& detail)
      : Error(ErrorCode::CorruptLog,
              "corrupt event log at line " + std::to_string(line) + ": " + detail),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace cotalk
