#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace ctxeng::agents {

enum class ModelTier { fast, balanced, powerful };

std::string_view to_string(ModelTier tier) noexcept;

using TierAliases = std::map<std::string, ModelTier, std::less<>>;
using ToolSet = std::set<std::string, std::less<>>;

/// haiku -> fast, sonnet -> balanced, opus -> powerful.
TierAliases default_tier_aliases();

/// Read, Write, Edit, Grep, Bash, RunTests.
ToolSet default_toolset();

/// A named sub-agent role loaded from a profile file.
///
/// A profile file is a block of `key: value` header lines (name, description,
/// model, tools) terminated by the first blank line; everything after that
/// blank line is the system prompt, verbatim. A header value ending in ','
/// continues onto the next non-key line.
struct AgentProfile {
    std::string name;
    std::string description;
    ModelTier model_tier = ModelTier::balanced;
    std::vector<std::string> tools;  // ordered set, first occurrence wins
    std::string system_prompt;

    bool allows(std::string_view tool) const;
    bool operator==(const AgentProfile&) const = default;
};

struct ParseOptions {
    ToolSet toolset = default_toolset();
    TierAliases tier_aliases = default_tier_aliases();
};

/// Throws Error with MissingField, UnknownHeaderKey, EmptyPrompt, UnknownTool
/// or InvalidField; every message starts with `line N:`.
AgentProfile parse_agent_file(std::string_view text, const ParseOptions& options = {});

/// Inverse of parse_agent_file up to field equality.
std::string serialize_profile(const AgentProfile& profile,
                              const TierAliases& aliases = default_tier_aliases());

/// Immutable after load; iteration is lexicographic by name.
class Registry {
public:
    Registry() = default;
    Registry(std::map<std::string, AgentProfile, std::less<>> profiles,
             std::filesystem::path source_dir);

    /// Throws Error{NotFound} listing every known name.
    const AgentProfile& get(std::string_view name) const;
    const AgentProfile* find(std::string_view name) const;
    bool contains(std::string_view name) const { return find(name) != nullptr; }

    std::vector<std::string> names() const;
    std::size_t size() const noexcept { return profiles_.size(); }
    bool empty() const noexcept { return profiles_.empty(); }
    const std::filesystem::path& source_dir() const noexcept { return source_dir_; }

    auto begin() const { return profiles_.begin(); }
    auto end() const { return profiles_.end(); }

    bool operator==(const Registry&) const = default;

private:
    std::map<std::string, AgentProfile, std::less<>> profiles_;
    std::filesystem::path source_dir_;
};

struct LoadOptions {
    ParseOptions parse;
    std::string extension = ".agent";
};

/// Parses every regular file in `dir` carrying the configured extension.
/// Parse errors are rethrown with the file path prepended; two files naming
/// the same agent raise DuplicateAgentName.
Registry load_registry(const std::filesystem::path& dir, const LoadOptions& options = {});

}  // namespace ctxeng::agents
