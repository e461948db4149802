#pragma once

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace ctxeng::provider {

struct ToolInvocation {
    std::string tool_name;
    std::map<std::string, std::string> args;

    bool operator==(const ToolInvocation&) const = default;
};

struct Message {
    std::string content;

    bool operator==(const Message&) const = default;
};

enum class DoneStatus { complete, blocked };
std::string_view to_string(DoneStatus status) noexcept;

struct Done {
    DoneStatus status = DoneStatus::complete;
    std::string note;

    bool operator==(const Done&) const = default;
};

using AgentAction = std::variant<ToolInvocation, Message, Done>;

struct Usage {
    std::size_t input_tokens = 0;
    std::size_t output_tokens = 0;

    Usage& operator+=(const Usage& o) {
        input_tokens += o.input_tokens;
        output_tokens += o.output_tokens;
        return *this;
    }
    bool operator==(const Usage&) const = default;
};

struct ProviderRequest {
    std::string agent_name;
    std::string prompt;
    std::size_t max_output_tokens = 4096;
};

struct ProviderResponse {
    std::vector<AgentAction> actions;
    Usage usage;

    bool operator==(const ProviderResponse&) const = default;
};

/// Compact JSON for one action / a list of actions, as used in fixtures.
std::string action_to_json(const AgentAction& action);
std::string actions_to_json(const std::vector<AgentAction>& actions);

/// short_digest of the prompt text.
std::string prompt_digest(std::string_view prompt);

/// Estimator-based usage: input from the prompt, output from the serialized
/// actions.
Usage estimate_usage(std::string_view prompt, const std::vector<AgentAction>& actions);

class Provider {
public:
    virtual ~Provider() = default;
    /// Throws NoFixtureMatch (scripted) or ProviderUnavailable (live).
    virtual ProviderResponse complete(const ProviderRequest& request) = 0;
};

/// Matches when every non-empty field matches: agent name exactly, prompt
/// substring contained, prompt digest equal.
struct FixtureMatcher {
    std::string agent_name;
    std::string prompt_substring;
    std::string prompt_digest;

    bool matches(const ProviderRequest& request, std::string_view digest) const;
    bool operator==(const FixtureMatcher&) const = default;
};

struct FixtureEntry {
    FixtureMatcher match;
    ProviderResponse response;
    bool has_usage = false;  // usage given explicitly in the fixture

    bool operator==(const FixtureEntry&) const = default;
};

/// One JSON object per line:
///   {"match":{"agent":...,"contains":...,"digest":...},
///    "response":{"actions":[...],"usage":{"input_tokens":N,"output_tokens":N}}}
/// Actions are {"type":"tool","tool":NAME,"args":{...}}, {"type":"message",
/// "content":...} or {"type":"done","status":"complete"|"blocked","note":...}.
/// Blank lines and lines starting with '#' are ignored. Throws
/// MalformedFixture naming the line.
std::vector<FixtureEntry> parse_fixture(std::string_view text);
std::vector<FixtureEntry> load_fixture(const std::filesystem::path& path);
std::string serialize_fixture_entry(const FixtureEntry& entry);

/// Returns the first unconsumed entry whose matcher accepts the request. In
/// strict mode only the next unconsumed entry is considered, which is how
/// recordings are replayed.
class ScriptedProvider final : public Provider {
public:
    enum class Mode { first_match, strict };

    explicit ScriptedProvider(std::vector<FixtureEntry> entries, Mode mode = Mode::first_match);

    ProviderResponse complete(const ProviderRequest& request) override;

    std::size_t remaining() const;
    std::size_t consumed() const;

private:
    std::vector<FixtureEntry> entries_;
    std::vector<bool> used_;
    Mode mode_;
    std::size_t cursor_ = 0;
    mutable std::mutex mutex_;
};

/// Forwards to `inner` and appends each (request digest, response) pair to
/// `path` in fixture format, matched by agent and digest.
class RecordingProvider final : public Provider {
public:
    RecordingProvider(Provider& inner, const std::filesystem::path& path);

    ProviderResponse complete(const ProviderRequest& request) override;

private:
    Provider& inner_;
    std::ofstream out_;
    std::mutex mutex_;
};

}  // namespace ctxeng::provider
