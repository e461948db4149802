#include "ctxeng/diff.hpp"

#include <algorithm>

#include "ctxeng/error.hpp"

namespace ctxeng::orchestrator {

namespace {

/// Lines including their '\n' (the last one may lack it).
std::vector<std::string_view> lines_of(std::string_view text) {
    std::vector<std::string_view> out;
    std::size_t pos = 0;
    while (pos < text.size()) {
        const auto nl = text.find('\n', pos);
        const auto end = nl == std::string_view::npos ? text.size() : nl + 1;
        out.push_back(text.substr(pos, end - pos));
        pos = end;
    }
    return out;
}

enum class OpKind { equal, remove, insert };

struct Op {
    OpKind kind;
    std::size_t a = 0;  // index into old lines (equal/remove)
    std::size_t b = 0;  // index into new lines (equal/insert)
};

/// Myers' O(ND) shortest edit script.
std::vector<Op> shortest_edit(const std::vector<std::string_view>& a, const std::vector<std::string_view>& b) {
    const auto n = static_cast<long>(a.size());
    const auto m = static_cast<long>(b.size());
    const long max = n + m;
    std::vector<long> v(static_cast<std::size_t>(2 * max + 2), 0);
    auto at = [&](std::vector<long>& vec, long k) -> long& { return vec[static_cast<std::size_t>(k + max)]; };
    std::vector<std::vector<long>> trace;

    bool done = max == 0;
    for (long d = 0; d <= max && !done; ++d) {
        // Backtracking only reads diagonals -d-1..d+1 of this round.
        const long lo = std::max(-d - 1, -max);
        const long hi = std::min(d + 1, max);
        trace.emplace_back(v.begin() + (lo + max), v.begin() + (hi + max) + 1);
        for (long k = -d; k <= d; k += 2) {
            long x = (k == -d || (k != d && at(v, k - 1) < at(v, k + 1))) ? at(v, k + 1) : at(v, k - 1) + 1;
            long y = x - k;
            while (x < n && y < m && a[static_cast<std::size_t>(x)] == b[static_cast<std::size_t>(y)]) {
                ++x;
                ++y;
            }
            at(v, k) = x;
            if (x >= n && y >= m) {
                done = true;
                break;
            }
        }
    }

    std::vector<Op> ops;
    long x = n;
    long y = m;
    for (long d = static_cast<long>(trace.size()) - 1; d >= 0; --d) {
        const auto& vd = trace[static_cast<std::size_t>(d)];
        const long lo = std::max(-d - 1, -max);
        auto old = [&](long k) { return vd[static_cast<std::size_t>(k - lo)]; };
        const long k = x - y;
        const long prev_k = (k == -d || (k != d && old(k - 1) < old(k + 1))) ? k + 1 : k - 1;
        const long prev_x = old(prev_k);
        const long prev_y = prev_x - prev_k;
        while (x > prev_x && y > prev_y) {
            --x;
            --y;
            ops.push_back({OpKind::equal, static_cast<std::size_t>(x), static_cast<std::size_t>(y)});
        }
        if (d > 0) {
            if (x == prev_x) {
                ops.push_back({OpKind::insert, static_cast<std::size_t>(x), static_cast<std::size_t>(prev_y)});
            } else {
                ops.push_back({OpKind::remove, static_cast<std::size_t>(prev_x), static_cast<std::size_t>(y)});
            }
        }
        x = prev_x;
        y = prev_y;
    }
    std::reverse(ops.begin(), ops.end());
    return ops;
}

void emit_line(std::string& out, char prefix, std::string_view line) {
    out += prefix;
    if (!line.empty() && line.back() == '\n') {
        out += line;
    } else {
        out += line;
        out += "\n\\ No newline at end of file\n";
    }
}

std::string range(std::size_t start, std::size_t len) {
    return std::to_string(len == 0 ? start : start + 1) + "," + std::to_string(len);
}

}  // namespace

std::string unified_diff(std::string_view path, const std::optional<std::string>& before,
                         const std::optional<std::string>& after, std::size_t context) {
    if (before == after) return {};
    const auto a = lines_of(before ? std::string_view(*before) : std::string_view{});
    const auto b = lines_of(after ? std::string_view(*after) : std::string_view{});

    std::string out;
    out += before ? "--- a/" + std::string(path) + "\n" : std::string("--- /dev/null\n");
    out += after ? "+++ b/" + std::string(path) + "\n" : std::string("+++ /dev/null\n");

    const auto ops = shortest_edit(a, b);
    std::vector<std::size_t> changes;
    for (std::size_t i = 0; i < ops.size(); ++i) {
        if (ops[i].kind != OpKind::equal) changes.push_back(i);
    }
    // Old/new positions before each op.
    std::vector<std::size_t> apos(ops.size() + 1, 0);
    std::vector<std::size_t> bpos(ops.size() + 1, 0);
    for (std::size_t i = 0; i < ops.size(); ++i) {
        apos[i + 1] = apos[i] + (ops[i].kind != OpKind::insert ? 1 : 0);
        bpos[i + 1] = bpos[i] + (ops[i].kind != OpKind::remove ? 1 : 0);
    }

    std::size_t c = 0;
    while (c < changes.size()) {
        const std::size_t first = changes[c];
        std::size_t last = first;
        while (c + 1 < changes.size() && changes[c + 1] - last <= 2 * context + 1) last = changes[++c];
        ++c;
        const std::size_t s = first >= context ? first - context : 0;
        const std::size_t e = std::min(ops.size(), last + 1 + context);
        out += "@@ -" + range(apos[s], apos[e] - apos[s]) + " +" + range(bpos[s], bpos[e] - bpos[s]) + " @@\n";
        for (std::size_t i = s; i < e; ++i) {
            switch (ops[i].kind) {
                case OpKind::equal: emit_line(out, ' ', a[ops[i].a]); break;
                case OpKind::remove: emit_line(out, '-', a[ops[i].a]); break;
                case OpKind::insert: emit_line(out, '+', b[ops[i].b]); break;
            }
        }
    }
    return out;
}

std::vector<std::string> changed_paths(const Snapshot& before, const Snapshot& after) {
    std::vector<std::string> out;
    for (const auto& [path, content] : before) {
        auto it = after.find(path);
        if (it == after.end() || it->second != content) out.push_back(path);
    }
    for (const auto& [path, content] : after) {
        if (!before.contains(path)) out.push_back(path);
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::string diff_snapshots(const Snapshot& before, const Snapshot& after, std::size_t context) {
    std::string out;
    for (const auto& path : changed_paths(before, after)) {
        std::optional<std::string> a;
        std::optional<std::string> b;
        if (auto it = before.find(path); it != before.end()) a = it->second;
        if (auto it = after.find(path); it != after.end()) b = it->second;
        out += unified_diff(path, a, b, context);
    }
    return out;
}

namespace {

[[noreturn]] void mismatch(std::size_t lineno, const std::string& what) {
    throw Error(ErrorCode::DiffReplayMismatch, "patch line " + std::to_string(lineno) + ": " + what);
}

struct HunkLine {
    char kind;
    std::string text;
};

bool parse_range(std::string_view s, std::size_t& start, std::size_t& len) {
    const auto comma = s.find(',');
    try {
        start = std::stoul(std::string(s.substr(0, comma)));
        len = comma == std::string_view::npos ? 1 : std::stoul(std::string(s.substr(comma + 1)));
    } catch (const std::exception&) {
        return false;
    }
    return true;
}

}  // namespace

Snapshot apply_patch(const Snapshot& before, std::string_view patch) {
    Snapshot after = before;
    const auto lines = lines_of(patch);
    std::size_t i = 0;
    auto strip = [](std::string_view l) {
        if (!l.empty() && l.back() == '\n') l.remove_suffix(1);
        return l;
    };
    while (i < lines.size()) {
        const auto minus = strip(lines[i]);
        if (!minus.starts_with("--- ") || i + 1 >= lines.size() || !strip(lines[i + 1]).starts_with("+++ ")) {
            mismatch(i + 1, "expected a file header");
        }
        const auto plus = strip(lines[i + 1]);
        const auto old_name = minus.substr(4);
        const auto new_name = plus.substr(4);
        const bool created = old_name == "/dev/null";
        const bool deleted = new_name == "/dev/null";
        if (created && deleted) mismatch(i + 1, "both sides are /dev/null");
        const auto named = created ? new_name : old_name;
        if (!named.starts_with("a/") && !named.starts_with("b/")) mismatch(i + 1, "path lacks a/ or b/ prefix");
        const std::string path(named.substr(2));
        i += 2;

        std::string old_text;
        if (created) {
            if (before.contains(path)) mismatch(i, path + " already exists");
        } else {
            auto it = before.find(path);
            if (it == before.end()) mismatch(i, path + " does not exist");
            old_text = it->second;
        }
        const auto old_lines = lines_of(old_text);
        std::string result;
        std::size_t cursor = 0;  // next unconsumed old line

        while (i < lines.size() && strip(lines[i]).starts_with("@@ ")) {
            const auto header = strip(lines[i]);
            const auto minus_pos = header.find('-');
            const auto plus_pos = header.find(" +");
            const auto end_pos = header.find(" @@", plus_pos == std::string_view::npos ? 0 : plus_pos + 2);
            std::size_t a_start = 0, a_len = 0, b_start = 0, b_len = 0;
            if (minus_pos == std::string_view::npos || plus_pos == std::string_view::npos ||
                end_pos == std::string_view::npos ||
                !parse_range(header.substr(minus_pos + 1, plus_pos - minus_pos - 1), a_start, a_len) ||
                !parse_range(header.substr(plus_pos + 2, end_pos - plus_pos - 2), b_start, b_len)) {
                mismatch(i + 1, "malformed hunk header");
            }
            const std::size_t hunk_line = i + 1;
            ++i;
            std::vector<HunkLine> body;
            std::size_t olds = 0, news = 0;
            while (i < lines.size()) {
                const auto l = lines[i];
                if (!l.empty() && l[0] == '\\') {
                    if (body.empty() || body.back().text.empty() || body.back().text.back() != '\n') {
                        mismatch(i + 1, "stray no-newline marker");
                    }
                    body.back().text.pop_back();
                    ++i;
                    continue;
                }
                if (olds == a_len && news == b_len) break;
                if (l.empty() || (l[0] != ' ' && l[0] != '-' && l[0] != '+')) break;
                body.push_back({l[0], std::string(l.substr(1))});
                olds += l[0] != '+';
                news += l[0] != '-';
                ++i;
            }
            if (olds != a_len || news != b_len) mismatch(hunk_line, "hunk line counts disagree with its header");

            const std::size_t start = a_len == 0 ? a_start : a_start - 1;
            if (start < cursor || start > old_lines.size()) mismatch(hunk_line, "hunk out of order or out of range");
            for (; cursor < start; ++cursor) result += old_lines[cursor];
            for (const auto& h : body) {
                if (h.kind != '+') {
                    if (cursor >= old_lines.size() || old_lines[cursor] != h.text) {
                        mismatch(hunk_line, "context does not match " + path + " at line " + std::to_string(cursor + 1));
                    }
                    ++cursor;
                }
                if (h.kind != '-') result += h.text;
            }
        }
        for (; cursor < old_lines.size(); ++cursor) result += old_lines[cursor];

        if (deleted) {
            if (!result.empty()) mismatch(i, "deletion of " + path + " leaves content behind");
            after.erase(path);
        } else {
            after[path] = std::move(result);
        }
    }
    return after;
}

}  // namespace ctxeng::orchestrator
