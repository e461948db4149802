#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ctxeng::orchestrator {

/// Relative path -> content of every text file in a workspace.
using Snapshot = std::map<std::string, std::string>;

/// Reads every regular, non-binary file under `root`, skipping the named
/// directories.
Snapshot take_snapshot(const std::filesystem::path& root,
                       const std::vector<std::string>& skip_dirs = {".git"});

/// Rewrites `root` so that its text files equal `target`: files that differ
/// are rewritten, files missing from `target` but present in `current` are
/// removed.
void restore_snapshot(const std::filesystem::path& root, const Snapshot& current, const Snapshot& target);

/// Unified diff of one file with `context` lines of context. A missing side
/// is std::nullopt and is written as /dev/null. A last line without a
/// trailing newline gets the "\ No newline at end of file" marker. Empty when
/// both sides are equal.
std::string unified_diff(std::string_view path, const std::optional<std::string>& before,
                         const std::optional<std::string>& after, std::size_t context = 3);

/// Concatenated unified diffs for every path whose content differs, in path
/// order, with "a/" and "b/" prefixes (apply with `patch -p1`).
std::string diff_snapshots(const Snapshot& before, const Snapshot& after, std::size_t context = 3);

/// Paths whose content differs between the snapshots, sorted.
std::vector<std::string> changed_paths(const Snapshot& before, const Snapshot& after);

/// Applies a patch produced by diff_snapshots. Every context and removed line
/// must match exactly at the stated position; throws DiffReplayMismatch
/// otherwise.
Snapshot apply_patch(const Snapshot& before, std::string_view patch);

}  // namespace ctxeng::orchestrator
