#include "ctxeng/error.hpp"

namespace ctxeng {

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::IoError: return "IoError";
        case ErrorCode::ConfigError: return "ConfigError";
        case ErrorCode::MissingField: return "MissingField";
        case ErrorCode::UnknownHeaderKey: return "UnknownHeaderKey";
        case ErrorCode::EmptyPrompt: return "EmptyPrompt";
        case ErrorCode::UnknownTool: return "UnknownTool";
        case ErrorCode::InvalidField: return "InvalidField";
        case ErrorCode::DuplicateAgentName: return "DuplicateAgentName";
        case ErrorCode::NotFound: return "NotFound";
        case ErrorCode::BudgetTooSmall: return "BudgetTooSmall";
        case ErrorCode::UnsupportedLanguage: return "UnsupportedLanguage";
        case ErrorCode::ProviderUnavailable: return "ProviderUnavailable";
        case ErrorCode::EmptyIndex: return "EmptyIndex";
        case ErrorCode::InvalidPattern: return "InvalidPattern";
        case ErrorCode::MalformedIndex: return "MalformedIndex";
        case ErrorCode::EmptyCorpus: return "EmptyCorpus";
        case ErrorCode::NoRelevantDoc: return "NoRelevantDoc";
        case ErrorCode::NoFixtureMatch: return "NoFixtureMatch";
        case ErrorCode::MalformedFixture: return "MalformedFixture";
        case ErrorCode::PathEscapesSandbox: return "PathEscapesSandbox";
        case ErrorCode::LockNotHeld: return "LockNotHeld";
        case ErrorCode::LockConflict: return "LockConflict";
        case ErrorCode::FindNotFound: return "FindNotFound";
        case ErrorCode::AmbiguousMatch: return "AmbiguousMatch";
        case ErrorCode::CommandNotFound: return "CommandNotFound";
        case ErrorCode::CommandNotAllowed: return "CommandNotAllowed";
        case ErrorCode::Timeout: return "Timeout";
        case ErrorCode::PermissionDenied: return "PermissionDenied";
        case ErrorCode::SpecValidationFailed: return "SpecValidationFailed";
        case ErrorCode::PlanValidationFailed: return "PlanValidationFailed";
        case ErrorCode::ActionCapExceeded: return "ActionCapExceeded";
        case ErrorCode::AgentBlocked: return "AgentBlocked";
        case ErrorCode::ReviewerUnavailable: return "ReviewerUnavailable";
        case ErrorCode::DiffReplayMismatch: return "DiffReplayMismatch";
        case ErrorCode::MalformedTranscript: return "MalformedTranscript";
    }
    return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message),
      code_(code),
      detail_(message) {}

Error Error::with_context(std::string_view context) const {
    return Error(code_, std::string(context) + ": " + detail_);
}

}  // namespace ctxeng
