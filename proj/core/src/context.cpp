#include "ctxeng/context.hpp"

#include <algorithm>
#include <numeric>

#include "ctxeng/error.hpp"
#include "ctxeng/text.hpp"

namespace ctxeng::context {

namespace fs = std::filesystem;

std::string_view layer_banner(LayerId id) noexcept {
    switch (id) {
        case LayerId::L1: return "== L1: Task Specification ==";
        case LayerId::L2: return "== L2: External Knowledge ==";
        case LayerId::L3: return "== L3: Project Memory ==";
        case LayerId::L4: return "== L4: Retrieved Code Context ==";
        case LayerId::L5: return "== L5: Execution Artifacts ==";
    }
    return "";
}

ContextEntry ContextEntry::make(std::string source_tag, std::string content, std::size_t priority) {
    ContextEntry e;
    e.token_estimate = estimate_tokens(content);
    e.source_tag = std::move(source_tag);
    e.content = std::move(content);
    e.priority = priority;
    return e;
}

ProjectMemory ProjectMemory::load(const fs::path& root, const std::string& relative_path) {
    ProjectMemory memory;
    memory.path = relative_path;
    std::error_code ec;
    const auto file = root / relative_path;
    if (fs::is_regular_file(file, ec)) memory.content = read_file(file);
    return memory;
}

ContextStack& ContextStack::add(LayerId layer, ContextEntry entry) {
    layers_[index(layer)].push_back(std::move(entry));
    return *this;
}

std::size_t ContextStack::total_entries() const noexcept {
    std::size_t n = 0;
    for (const auto& l : layers_) n += l.size();
    return n;
}

ContextStack new_stack(const TaskSpec& spec, const ProjectMemory& memory) {
    ContextStack stack;
    stack.add(LayerId::L1, ContextEntry::make("task-spec", render_task_spec(spec)));
    if (!memory.content.empty()) {
        stack.add(LayerId::L3, ContextEntry::make("project-memory", memory.content));
    }
    return stack;
}

namespace {

constexpr std::array<LayerId, 4> kDropOrder = {LayerId::L5, LayerId::L4, LayerId::L2, LayerId::L3};

bool needs_newline(std::string_view s) { return !s.empty() && s.back() != '\n'; }

std::size_t entry_bytes(const ContextEntry& e) {
    return 1 + e.source_tag.size() + 2 + e.content.size() + (needs_newline(e.content) ? 1 : 0);
}

std::string elision_marker(std::size_t n) { return "[" + std::to_string(n) + " entries elided]\n"; }

std::size_t role_bytes(std::string_view role) { return role.size() + (needs_newline(role) ? 1 : 0); }

/// Entries of the droppable layers in the order they are removed.
std::vector<std::pair<LayerId, std::size_t>> drop_sequence(const ContextStack& stack) {
    std::vector<std::pair<LayerId, std::size_t>> seq;
    for (LayerId layer : kDropOrder) {
        const auto& entries = stack.layer(layer);
        std::vector<std::size_t> idx(entries.size());
        std::iota(idx.begin(), idx.end(), 0);
        std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
            if (entries[a].priority != entries[b].priority) return entries[a].priority < entries[b].priority;
            return a > b;
        });
        for (auto i : idx) seq.emplace_back(layer, i);
    }
    return seq;
}

std::size_t fixed_bytes(const ContextStack& stack, std::string_view role) {
    std::size_t n = role_bytes(role);
    for (LayerId layer : kAllLayers) n += 2 + layer_banner(layer).size();
    for (const auto& e : stack.layer(LayerId::L1)) n += entry_bytes(e);
    return n;
}

std::size_t tokens_for_bytes(std::size_t bytes) { return (bytes + 3) / 4; }

}  // namespace

std::size_t minimum_prompt_tokens(const ContextStack& stack, std::string_view role_prompt) {
    std::size_t bytes = fixed_bytes(stack, role_prompt);
    for (LayerId layer : kDropOrder) {
        const auto n = stack.layer(layer).size();
        if (n > 0) bytes += elision_marker(n).size();
    }
    return tokens_for_bytes(bytes);
}

AssembledPrompt assemble_prompt(const ContextStack& stack, std::string_view role_prompt, std::size_t budget) {
    const auto minimum = minimum_prompt_tokens(stack, role_prompt);
    if (minimum > budget) {
        throw Error(ErrorCode::BudgetTooSmall, "role prompt and L1 need " + std::to_string(minimum) +
                                                   " tokens; budget is " + std::to_string(budget));
    }

    const auto sequence = drop_sequence(stack);
    std::array<std::vector<bool>, kLayerCount> dropped;
    std::array<std::size_t, kLayerCount> dropped_count{};
    std::size_t bytes = fixed_bytes(stack, role_prompt);
    for (LayerId layer : kDropOrder) {
        const auto& entries = stack.layer(layer);
        dropped[static_cast<std::size_t>(layer)].assign(entries.size(), false);
        for (const auto& e : entries) bytes += entry_bytes(e);
    }

    // Shortest prefix of the drop sequence that fits. Not monotone step by
    // step (a marker can outweigh a tiny entry), so keep scanning.
    auto marker_bytes = [&] {
        std::size_t n = 0;
        for (auto c : dropped_count) {
            if (c > 0) n += elision_marker(c).size();
        }
        return n;
    };
    std::size_t step = 0;
    while (tokens_for_bytes(bytes + marker_bytes()) > budget) {
        // Guaranteed to terminate: dropping everything yields `minimum`.
        const auto [layer, i] = sequence[step++];
        const auto li = static_cast<std::size_t>(layer);
        dropped[li][i] = true;
        ++dropped_count[li];
        bytes -= entry_bytes(stack.layer(layer)[i]);
    }

    AssembledPrompt out;
    auto& text = out.text;
    text.reserve(bytes + marker_bytes());
    text += role_prompt;
    if (needs_newline(role_prompt)) text += '\n';
    for (LayerId layer : kAllLayers) {
        const auto li = static_cast<std::size_t>(layer);
        text += '\n';
        text += layer_banner(layer);
        text += '\n';
        const auto& entries = stack.layer(layer);
        for (std::size_t i = 0; i < entries.size(); ++i) {
            if (layer != LayerId::L1 && dropped[li][i]) continue;
            text += '[';
            text += entries[i].source_tag;
            text += "]\n";
            text += entries[i].content;
            if (needs_newline(entries[i].content)) text += '\n';
        }
        if (dropped_count[li] > 0) text += elision_marker(dropped_count[li]);
    }
    out.tokens = estimate_tokens(text);
    out.elided = dropped_count;
    return out;
}

}  // namespace ctxeng::context
