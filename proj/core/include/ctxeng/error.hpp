#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ctxeng {

/// Every failure the library reports carries one of these codes. The names
/// are part of the user-visible surface: CLI diagnostics and transcript notes
/// print them verbatim.
enum class ErrorCode {
    InvalidArgument,
    IoError,
    ConfigError,
    // agent profiles
    MissingField,
    UnknownHeaderKey,
    EmptyPrompt,
    UnknownTool,
    InvalidField,
    DuplicateAgentName,
    NotFound,
    // context assembly
    BudgetTooSmall,
    // retrieval
    UnsupportedLanguage,
    ProviderUnavailable,
    EmptyIndex,
    InvalidPattern,
    MalformedIndex,
    // knowledge
    EmptyCorpus,
    NoRelevantDoc,
    // provider and tools
    NoFixtureMatch,
    MalformedFixture,
    PathEscapesSandbox,
    LockNotHeld,
    LockConflict,
    FindNotFound,
    AmbiguousMatch,
    CommandNotFound,
    CommandNotAllowed,
    Timeout,
    PermissionDenied,
    // orchestration
    SpecValidationFailed,
    PlanValidationFailed,
    ActionCapExceeded,
    AgentBlocked,
    ReviewerUnavailable,
    DiffReplayMismatch,
    MalformedTranscript,
};

std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message);

    ErrorCode code() const noexcept { return code_; }
    /// Message without the leading code name.
    const std::string& detail() const noexcept { return detail_; }

    /// Same code, message prefixed with `context: `.
    Error with_context(std::string_view context) const;

private:
    ErrorCode code_;
    std::string detail_;
};

}  // namespace ctxeng
