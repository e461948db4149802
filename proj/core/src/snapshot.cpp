#include "ctxeng/diff.hpp"
#include "ctxeng/error.hpp"
#include "ctxeng/text.hpp"

namespace ctxeng::orchestrator {

namespace fs = std::filesystem;

Snapshot take_snapshot(const fs::path& root, const std::vector<std::string>& skip_dirs) {
    Snapshot snap;
    for (const auto& rel : list_files(root, skip_dirs)) {
        auto content = read_file(root / rel);
        if (looks_binary(content)) continue;
        snap.emplace(rel, std::move(content));
    }
    return snap;
}

void restore_snapshot(const fs::path& root, const Snapshot& current, const Snapshot& target) {
    for (const auto& [path, content] : current) {
        if (target.contains(path)) continue;
        std::error_code ec;
        fs::remove(root / path, ec);
        if (ec) throw Error(ErrorCode::IoError, "cannot remove " + path + ": " + ec.message());
    }
    for (const auto& [path, content] : target) {
        auto it = current.find(path);
        if (it != current.end() && it->second == content) continue;
        std::error_code ec;
        fs::create_directories((root / path).parent_path(), ec);
        write_file_atomic(root / path, content);
    }
}

}  // namespace ctxeng::orchestrator
