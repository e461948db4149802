#pragma once

#include <filesystem>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace ctxeng {

/// Lines without terminators. A trailing '\n' does not produce an empty last
/// line; "" yields no lines.
std::vector<std::string_view> split_lines(std::string_view text);

/// Replaces every "\r\n" with "\n".
std::string normalize_newlines(std::string_view text);

std::string_view trim(std::string_view s) noexcept;
bool is_blank(std::string_view s) noexcept;
std::string to_lower(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);
std::string join(const std::vector<std::string>& parts, std::string_view sep);

/// Identifier-like tokens (`[A-Za-z_][A-Za-z0-9_]*`, at least two characters),
/// lowercased, as a set.
std::set<std::string> identifier_set(std::string_view text);

/// Lowercased alphanumeric words of two or more characters with common English
/// stop words removed, as a set.
std::set<std::string> content_terms(std::string_view text);

/// Longest prefix of `text` that is at most `max_bytes` long and does not end
/// inside a UTF-8 multi-byte sequence.
std::string_view utf8_prefix(std::string_view text, std::size_t max_bytes) noexcept;

/// fnmatch(3) without FNM_PATHNAME, so `*` also matches '/'.
bool glob_match(std::string_view pattern, std::string_view path);

/// True when the first 8 KiB contain a NUL byte.
bool looks_binary(std::string_view content) noexcept;

std::string read_file(const std::filesystem::path& path);
/// Writes to a sibling temporary file, then renames over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

/// Regular files under `root` as sorted '/'-separated relative paths.
/// Symbolic links are not followed; directories whose name is in
/// `skip_dirs` are not entered.
std::vector<std::string> list_files(const std::filesystem::path& root,
                                    const std::vector<std::string>& skip_dirs = {".git"});

}  // namespace ctxeng
