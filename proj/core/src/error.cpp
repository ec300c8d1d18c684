#include "cotalk/error.hpp"

namespace cotalk {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::UnknownUnit: return "UnknownUnit";
    case ErrorCode::ProviderUnavailable: return "ProviderUnavailable";
    case ErrorCode::ProviderTimeout: return "ProviderTimeout";
    case ErrorCode::MalformedResponse: return "MalformedResponse";
    case ErrorCode::UnsupportedFormat: return "UnsupportedFormat";
    case ErrorCode::SessionNotFinalized: return "SessionNotFinalized";
    case ErrorCode::MissingReference: return "MissingReference";
    case ErrorCode::ZeroTime: return "ZeroTime";
    case ErrorCode::InvalidMode: return "InvalidMode";
    case ErrorCode::OutOfOrderRound: return "OutOfOrderRound";
    case ErrorCode::SessionClosed: return "SessionClosed";
    case ErrorCode::GatewayFailure: return "GatewayFailure";
    case ErrorCode::IncompleteParallelSession: return "IncompleteParallelSession";
    case ErrorCode::EmptySession: return "EmptySession";
    case ErrorCode::LedgerIncomplete: return "LedgerIncomplete";
    case ErrorCode::NothingToRead: return "NothingToRead";
    case ErrorCode::PriorNotServed: return "PriorNotServed";
    case ErrorCode::MergePending: return "MergePending";
    case ErrorCode::RoundLimitReached: return "RoundLimitReached";
    case ErrorCode::NonMonotoneTiming: return "NonMonotoneTiming";
    case ErrorCode::NotFound: return "NotFound";
    case ErrorCode::InvalidScenario: return "InvalidScenario";
    case ErrorCode::PremiseViolation: return "PremiseViolation";
    case ErrorCode::CorruptLog: return "CorruptLog";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

}  // namespace cotalk
