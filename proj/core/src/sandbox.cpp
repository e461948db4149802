#include <algorithm>
#include <charconv>

#include "ctxeng/code_index.hpp"
#include "ctxeng/text.hpp"
#include "ctxeng/tools.hpp"

namespace ctxeng::tools {

namespace fs = std::filesystem;

Occurrence Occurrence::parse(std::string_view text) {
    const auto t = trim(text);
    if (t.empty() || t == "single") return {};
    if (t == "all") return {Kind::all, 0};
    std::size_t n = 0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), n);
    if (ec != std::errc{} || ptr != t.data() + t.size() || n == 0) {
        throw Error(ErrorCode::InvalidArgument, "occurrence must be a positive index or \"all\", got \"" + std::string(t) + "\"");
    }
    return {Kind::nth, n};
}

namespace {

bool within(const fs::path& root, const fs::path& p) {
    const auto rel = p.lexically_relative(root);
    return !rel.empty() && *rel.begin() != "..";
}

std::string arg(const provider::ToolInvocation& call, const char* key, bool required = true) {
    auto it = call.args.find(key);
    if (it == call.args.end()) {
        if (required) throw Error(ErrorCode::InvalidArgument, call.tool_name + " needs argument \"" + key + "\"");
        return {};
    }
    return it->second;
}

ToolResult failure(const Error& e) { return {false, e.what(), std::nullopt, e.code()}; }

}  // namespace

Workspace::Workspace(const fs::path& root) {
    std::error_code ec;
    root_ = fs::canonical(root, ec);
    if (ec || !fs::is_directory(root_)) throw Error(ErrorCode::NotFound, "workspace root " + root.string() + " is not a directory");
}

fs::path Workspace::resolve(std::string_view relative) const {
    if (relative.find('\0') != std::string_view::npos) {
        throw Error(ErrorCode::PathEscapesSandbox, "path contains a NUL byte");
    }
    const fs::path p(relative.empty() ? std::string_view(".") : relative);
    if (p.has_root_path()) throw Error(ErrorCode::PathEscapesSandbox, std::string(relative) + " is absolute");
    const auto joined = (root_ / p).lexically_normal();
    if (!within(root_, joined)) throw Error(ErrorCode::PathEscapesSandbox, std::string(relative) + " leaves the workspace");
    std::error_code ec;
    auto real = fs::weakly_canonical(joined, ec);
    if (ec) throw Error(ErrorCode::PathEscapesSandbox, std::string(relative) + ": " + ec.message());
    if (!within(root_, real)) {
        throw Error(ErrorCode::PathEscapesSandbox, std::string(relative) + " resolves outside the workspace");
    }
    return real;
}

std::string Workspace::normalize(std::string_view relative) const {
    return resolve(relative).lexically_relative(root_).generic_string();
}

void Workspace::touch(const fs::path& p) const {
    if (observer_) observer_(p);
}

void Workspace::require_lock(const std::string& rel, const FileLockTable& locks, std::string_view agent) const {
    if (!locks.held_by(rel, agent)) {
        throw Error(ErrorCode::LockNotHeld, std::string(agent) + " must hold the lock on " + rel + " to modify it");
    }
}

ToolResult Workspace::read(std::string_view path) const {
    const auto p = resolve(path);
    std::error_code ec;
    if (!fs::is_regular_file(p, ec)) throw Error(ErrorCode::NotFound, std::string(path) + " is not a file");
    touch(p);
    return {true, read_file(p), std::nullopt, std::nullopt};
}

ToolResult Workspace::write(std::string_view path, std::string_view content, const FileLockTable& locks,
                            std::string_view agent) const {
    const auto p = resolve(path);
    const auto rel = p.lexically_relative(root_).generic_string();
    if (rel == ".") throw Error(ErrorCode::InvalidArgument, "cannot write the workspace root");
    require_lock(rel, locks, agent);
    std::error_code ec;
    if (fs::is_directory(p, ec)) throw Error(ErrorCode::InvalidArgument, rel + " is a directory");
    touch(p.parent_path());
    fs::create_directories(p.parent_path(), ec);
    if (ec) throw Error(ErrorCode::IoError, "cannot create directories for " + rel + ": " + ec.message());
    touch(p);
    write_file_atomic(p, content);
    return {true, "wrote " + std::to_string(content.size()) + " bytes to " + rel, std::nullopt, std::nullopt};
}

ToolResult Workspace::edit(std::string_view path, std::string_view find, std::string_view replace,
                           Occurrence occurrence, const FileLockTable& locks, std::string_view agent) const {
    if (find.empty()) throw Error(ErrorCode::InvalidArgument, "find text is empty");
    const auto p = resolve(path);
    const auto rel = p.lexically_relative(root_).generic_string();
    require_lock(rel, locks, agent);
    std::error_code ec;
    if (!fs::is_regular_file(p, ec)) throw Error(ErrorCode::NotFound, rel + " is not a file");
    touch(p);
    const auto content = read_file(p);

    std::vector<std::size_t> hits;
    for (auto pos = content.find(find); pos != std::string::npos; pos = content.find(find, pos + find.size())) {
        hits.push_back(pos);
    }
    if (hits.empty()) throw Error(ErrorCode::FindNotFound, "text to replace not found in " + rel);
    std::vector<std::size_t> chosen;
    switch (occurrence.kind) {
        case Occurrence::Kind::single:
            if (hits.size() > 1) {
                throw Error(ErrorCode::AmbiguousMatch,
                            "text to replace occurs " + std::to_string(hits.size()) + " times in " + rel);
            }
            chosen = hits;
            break;
        case Occurrence::Kind::nth:
            if (occurrence.n > hits.size()) {
                throw Error(ErrorCode::FindNotFound, "occurrence " + std::to_string(occurrence.n) + " requested, " +
                                                         rel + " has " + std::to_string(hits.size()));
            }
            chosen = {hits[occurrence.n - 1]};
            break;
        case Occurrence::Kind::all: chosen = hits; break;
    }

    std::string out;
    out.reserve(content.size() + chosen.size() * replace.size());
    std::size_t last = 0;
    for (auto pos : chosen) {
        out.append(content, last, pos - last);
        out.append(replace);
        last = pos + find.size();
    }
    out.append(content, last);
    touch(p);
    write_file_atomic(p, out);
    return {true, "replacements=" + std::to_string(chosen.size()) + " in " + rel, std::nullopt, std::nullopt};
}

ToolResult Workspace::grep(std::string_view pattern, std::string_view glob, bool regex) const {
    touch(root_);
    retrieval::LexicalOptions opts;
    opts.regex = regex;
    opts.glob = glob.empty() ? "*" : std::string(glob);
    std::string out;
    for (const auto& m : retrieval::lexical_search(root_, pattern, opts)) {
        out += m.path + ":" + std::to_string(m.line_number) + ":" + m.line + "\n";
    }
    return {true, std::move(out), std::nullopt, std::nullopt};
}

ToolResult Workspace::list(std::string_view path) const {
    const auto p = resolve(path);
    std::error_code ec;
    if (!fs::is_directory(p, ec)) throw Error(ErrorCode::NotFound, std::string(path) + " is not a directory");
    touch(p);
    std::vector<std::string> names;
    for (const auto& e : fs::directory_iterator(p)) {
        auto name = e.path().filename().string();
        if (e.is_directory(ec) && !e.is_symlink(ec)) name += '/';
        names.push_back(std::move(name));
    }
    std::sort(names.begin(), names.end());
    std::string out;
    for (const auto& n : names) out += n + "\n";
    return {true, std::move(out), std::nullopt, std::nullopt};
}

// ---------------------------------------------------------------------------

bool is_write_tool(std::string_view tool) noexcept { return tool == "Write" || tool == "Edit"; }

Sandbox::Sandbox(Workspace& workspace, FileLockTable& locks, SandboxConfig config)
    : workspace_(workspace), locks_(locks), config_(std::move(config)) {}

ToolResult Sandbox::invoke(const agents::AgentProfile& profile, const provider::ToolInvocation& call) {
    if (!profile.allows(call.tool_name)) {
        throw Error(ErrorCode::PermissionDenied, "agent " + profile.name + " may not use " + call.tool_name);
    }
    return invoke_as(profile.name, call);
}

ToolResult Sandbox::invoke_as(std::string_view agent, const provider::ToolInvocation& call) {
    try {
        const auto& t = call.tool_name;
        if (t == "Read") return workspace_.read(arg(call, "path"));
        if (t == "Write") return workspace_.write(arg(call, "path"), arg(call, "content"), locks_, agent);
        if (t == "Edit") {
            return workspace_.edit(arg(call, "path"), arg(call, "find"), arg(call, "replace"),
                                   Occurrence::parse(arg(call, "occurrence", false)), locks_, agent);
        }
        if (t == "Grep") return workspace_.grep(arg(call, "pattern"), arg(call, "glob", false), arg(call, "regex", false) == "true");
        if (t == "RunTests") return run_tests();
        if (t == "Bash") return bash(arg(call, "command"));
        throw Error(ErrorCode::UnknownTool, "no tool named " + t);
    } catch (const Error& e) {
        if (e.code() == ErrorCode::PermissionDenied) throw;
        return failure(e);
    }
}

ToolResult Sandbox::bash(const std::string& command) const {
    const auto cmd = std::string(trim(command));
    if (!config_.test_command.empty() && cmd == trim(config_.test_command)) return run_tests();
    if (cmd.find_first_of(";|&$`<>(){}\\\n'\"*?") != std::string::npos) {
        throw Error(ErrorCode::CommandNotAllowed, "shell syntax is not allowed: " + cmd);
    }
    std::vector<std::string> words;
    for (auto& w : split(cmd, ' ')) {
        if (!w.empty()) words.push_back(std::move(w));
    }
    if (words.empty()) throw Error(ErrorCode::CommandNotAllowed, "empty command");
    const auto& prog = words.front();
    if (std::find(config_.read_only_commands.begin(), config_.read_only_commands.end(), prog) ==
        config_.read_only_commands.end()) {
        throw Error(ErrorCode::CommandNotAllowed, prog + " is not the test command or an allowed read-only command");
    }
    ToolResult r{true, {}, 0, std::nullopt};
    if (prog == "pwd") {
        r.content = ".\n";
    } else if (prog == "ls") {
        r.content = workspace_.list(words.size() > 1 ? words[1] : ".").content;
    } else if (prog == "cat") {
        for (std::size_t i = 1; i < words.size(); ++i) r.content += workspace_.read(words[i]).content;
    } else {
        throw Error(ErrorCode::CommandNotAllowed, prog + " has no sandboxed implementation");
    }
    return r;
}

ToolResult Sandbox::run_tests() const {
    if (is_blank(config_.test_command)) {
        return {false, "ConfigError: no test command configured", std::nullopt, ErrorCode::ConfigError};
    }
    const auto r = run_shell(config_.test_command, workspace_.root(), config_.test_timeout);
    ToolResult out{r.exit_code == 0 && !r.timed_out, r.output, r.exit_code, std::nullopt};
    if (r.timed_out) {
        out.ok = false;
        out.error = ErrorCode::Timeout;
        out.exit_code.reset();
        out.content += "\nTimeout: test command did not finish within " +
                       std::to_string(config_.test_timeout.count()) + " ms\n";
    } else if (r.exit_code == 127) {
        out.error = ErrorCode::CommandNotFound;
        out.content += "\nCommandNotFound: " + config_.test_command + "\n";
    }
    return out;
}

}  // namespace ctxeng::tools
