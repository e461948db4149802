#include "ctxeng/tools.hpp"

namespace ctxeng::tools {

bool FileLockTable::acquire(const std::string& path, const std::string& holder) {
    std::lock_guard lock(mutex_);
    if (auto it = locks_.find(path); it != locks_.end()) {
        if (it->second == holder) return false;
        throw Error(ErrorCode::LockConflict, path + " is locked by " + it->second);
    }
    locks_.emplace(path, holder);
    if (observer_) observer_({LockEvent::Kind::acquire, path, holder});
    return true;
}

void FileLockTable::release(const std::string& path, const std::string& holder) {
    std::lock_guard lock(mutex_);
    auto it = locks_.find(path);
    if (it == locks_.end() || it->second != holder) {
        throw Error(ErrorCode::LockNotHeld, holder + " does not hold " + path);
    }
    locks_.erase(it);
    if (observer_) observer_({LockEvent::Kind::release, path, holder});
}

void FileLockTable::release_all(const std::string& holder) {
    std::lock_guard lock(mutex_);
    for (auto it = locks_.begin(); it != locks_.end();) {
        if (it->second != holder) {
            ++it;
            continue;
        }
        const auto path = it->first;
        it = locks_.erase(it);
        if (observer_) observer_({LockEvent::Kind::release, path, holder});
    }
}

std::optional<std::string> FileLockTable::holder(const std::string& path) const {
    std::lock_guard lock(mutex_);
    if (auto it = locks_.find(path); it != locks_.end()) return it->second;
    return std::nullopt;
}

bool FileLockTable::held_by(const std::string& path, std::string_view holder) const {
    std::lock_guard lock(mutex_);
    auto it = locks_.find(path);
    return it != locks_.end() && it->second == holder;
}

std::size_t FileLockTable::size() const {
    std::lock_guard lock(mutex_);
    return locks_.size();
}

std::map<std::string, std::string> FileLockTable::entries() const {
    std::lock_guard lock(mutex_);
    return locks_;
}

void FileLockTable::set_observer(Observer observer) {
    std::lock_guard lock(mutex_);
    observer_ = std::move(observer);
}

}  // namespace ctxeng::tools
