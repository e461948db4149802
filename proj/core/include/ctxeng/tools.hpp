#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ctxeng/agent_registry.hpp"
#include "ctxeng/error.hpp"
#include "ctxeng/provider.hpp"

namespace ctxeng::tools {

struct ToolResult {
    bool ok = true;
    std::string content;  // file content, match list, output, or a diagnostic
    std::optional<int> exit_code;
    std::optional<ErrorCode> error;

    bool operator==(const ToolResult&) const = default;
};

// ---------------------------------------------------------------------------

struct LockEvent {
    enum class Kind { acquire, release };
    Kind kind;
    std::string path;
    std::string holder;
};

/// Path -> holding agent. At most one holder per path.
class FileLockTable {
public:
    using Observer = std::function<void(const LockEvent&)>;

    /// Re-acquiring a lock already held by `holder` is a no-op returning
    /// false; a lock held by someone else raises LockConflict naming them.
    /// Returns true when the lock was newly taken.
    bool acquire(const std::string& path, const std::string& holder);
    /// Throws LockNotHeld unless `holder` holds `path`.
    void release(const std::string& path, const std::string& holder);
    /// Releases every lock of `holder`, in path order.
    void release_all(const std::string& holder);

    std::optional<std::string> holder(const std::string& path) const;
    bool held_by(const std::string& path, std::string_view holder) const;
    std::size_t size() const;
    std::map<std::string, std::string> entries() const;

    void set_observer(Observer observer);

private:
    mutable std::mutex mutex_;
    std::map<std::string, std::string> locks_;
    Observer observer_;
};

/// Holds locks for one agent and releases them on destruction.
class LockScope {
public:
    LockScope(FileLockTable& table, std::string holder) : table_(table), holder_(std::move(holder)) {}
    ~LockScope() { table_.release_all(holder_); }
    LockScope(const LockScope&) = delete;
    LockScope& operator=(const LockScope&) = delete;

    bool acquire(const std::string& path) { return table_.acquire(path, holder_); }

private:
    FileLockTable& table_;
    std::string holder_;
};

// ---------------------------------------------------------------------------

struct ProcessResult {
    int exit_code = 0;  // 128 + signal when killed by one
    std::string output;  // stdout and stderr interleaved
    bool timed_out = false;
};

/// Runs `sh -c command` in `cwd` in its own process group; on timeout the
/// whole group is killed.
ProcessResult run_shell(const std::string& command, const std::filesystem::path& cwd,
                        std::chrono::milliseconds timeout);

// ---------------------------------------------------------------------------

struct Occurrence {
    enum class Kind { single, nth, all };
    Kind kind = Kind::single;
    std::size_t n = 0;  // 1-based, for nth

    /// "" -> single, "all" -> all, "3" -> nth(3). Throws InvalidArgument.
    static Occurrence parse(std::string_view text);
};

/// File operations confined to a root directory. Paths are relative; after
/// lexical normalization and symlink resolution they must stay under the
/// root, otherwise PathEscapesSandbox is raised before any I/O happens.
class Workspace {
public:
    using AccessObserver = std::function<void(const std::filesystem::path&)>;

    explicit Workspace(const std::filesystem::path& root);

    const std::filesystem::path& root() const noexcept { return root_; }
    std::filesystem::path resolve(std::string_view relative) const;
    /// Resolved path as a '/'-separated root-relative string.
    std::string normalize(std::string_view relative) const;

    /// Called with every absolute path right before it is read or written.
    void set_access_observer(AccessObserver observer) { observer_ = std::move(observer); }

    ToolResult read(std::string_view path) const;
    ToolResult write(std::string_view path, std::string_view content, const FileLockTable& locks,
                     std::string_view agent) const;
    ToolResult edit(std::string_view path, std::string_view find, std::string_view replace, Occurrence occurrence,
                    const FileLockTable& locks, std::string_view agent) const;
    /// "path:line:text" per match, ordered by path then line.
    ToolResult grep(std::string_view pattern, std::string_view glob, bool regex) const;
    /// Entries of a directory ('/' suffix for directories), sorted.
    ToolResult list(std::string_view path) const;

private:
    void touch(const std::filesystem::path& p) const;
    void require_lock(const std::string& rel, const FileLockTable& locks, std::string_view agent) const;

    std::filesystem::path root_;
    AccessObserver observer_;
};

// ---------------------------------------------------------------------------

struct SandboxConfig {
    std::string test_command;
    std::chrono::milliseconds test_timeout{std::chrono::seconds(300)};
    std::vector<std::string> read_only_commands = {"ls", "cat", "pwd"};
};

/// Dispatches agent tool invocations: checks the profile's permissions, maps
/// arguments to Workspace calls, and reports tool failures as ToolResult with
/// ok=false and the error code set.
///
/// Tools: Read{path}, Write{path, content}, Edit{path, find, replace,
/// occurrence?}, Grep{pattern, glob?, regex?}, RunTests{}, Bash{command}.
/// Bash runs the configured test command verbatim or an allowlisted
/// read-only command; anything else is CommandNotAllowed.
class Sandbox {
public:
    Sandbox(Workspace& workspace, FileLockTable& locks, SandboxConfig config);

    /// Throws PermissionDenied when the profile lacks the tool.
    ToolResult invoke(const agents::AgentProfile& profile, const provider::ToolInvocation& call);
    ToolResult invoke_as(std::string_view agent, const provider::ToolInvocation& call);

    /// Runs the configured test command. Timeouts and a missing command come
    /// back as ok=false with error Timeout / CommandNotFound.
    ToolResult run_tests() const;

    Workspace& workspace() noexcept { return workspace_; }
    const SandboxConfig& config() const noexcept { return config_; }

private:
    ToolResult bash(const std::string& command) const;

    Workspace& workspace_;
    FileLockTable& locks_;
    SandboxConfig config_;
};

/// Tool names that modify files, with the argument naming the target path.
bool is_write_tool(std::string_view tool) noexcept;

}  // namespace ctxeng::tools
