#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace ctxeng::context {

struct SubtaskSpec {
    int id = 0;
    std::string description;
    std::string suggested_role;  // empty = unassigned
    std::vector<std::string> target_hints;
    std::vector<int> depends_on;

    bool operator==(const SubtaskSpec&) const = default;
};

/// The structured task specification produced by intent translation.
struct TaskSpec {
    std::string title;
    std::string clarified_goal;
    std::vector<SubtaskSpec> subtasks;
    std::vector<std::string> acceptance_checks;
    std::vector<std::string> search_terms;

    bool operator==(const TaskSpec&) const = default;
};

/// Human-readable invariant violations; empty when the spec is valid.
std::vector<std::string> validate_task_spec(const TaskSpec& spec);

/// Throws Error{SpecValidationFailed} naming missing or mistyped fields.
/// Does not check the cross-field invariants; see validate_task_spec.
TaskSpec task_spec_from_json(std::string_view json);
std::string task_spec_to_json(const TaskSpec& spec);

/// "Title: ..." / "Goal: ..." / numbered steps / acceptance checks.
std::string render_task_spec(const TaskSpec& spec);

/// ceil(byte_length / 4). Deterministic and monotone in length.
constexpr std::size_t estimate_tokens(std::string_view text) noexcept {
    return (text.size() + 3) / 4;
}

enum class LayerId { L1 = 0, L2, L3, L4, L5 };
inline constexpr std::size_t kLayerCount = 5;
inline constexpr std::array<LayerId, kLayerCount> kAllLayers = {LayerId::L1, LayerId::L2, LayerId::L3,
                                                                 LayerId::L4, LayerId::L5};

/// "== L4: Retrieved Code Context ==" etc.
std::string_view layer_banner(LayerId id) noexcept;

struct ContextEntry {
    std::string source_tag;
    std::string content;
    std::size_t token_estimate = 0;
    std::size_t priority = 0;  // lower is dropped first within a layer

    static ContextEntry make(std::string source_tag, std::string content, std::size_t priority = 0);
    bool operator==(const ContextEntry&) const = default;
};

struct ProjectMemory {
    std::string path = "PROJECT.md";
    std::string content;

    /// Reads `root / relative_path` verbatim; a missing file yields empty content.
    static ProjectMemory load(const std::filesystem::path& root, const std::string& relative_path);
};

/// Five fixed-order layers: task specification, external knowledge, project
/// memory, retrieved code context, execution artifacts.
class ContextStack {
public:
    ContextStack& add(LayerId layer, ContextEntry entry);
    const std::vector<ContextEntry>& layer(LayerId id) const { return layers_[index(id)]; }
    std::size_t total_entries() const noexcept;

    bool operator==(const ContextStack&) const = default;

private:
    static constexpr std::size_t index(LayerId id) { return static_cast<std::size_t>(id); }
    std::array<std::vector<ContextEntry>, kLayerCount> layers_;
};

/// L1 holds the rendered spec (tag "task-spec"); L3 holds the memory content
/// (tag "project-memory") when non-empty.
ContextStack new_stack(const TaskSpec& spec, const ProjectMemory& memory);

struct AssembledPrompt {
    std::string text;
    std::size_t tokens = 0;
    std::array<std::size_t, kLayerCount> elided{};  // dropped entries per layer
};

/// Role prompt followed by every layer under its banner. When the result
/// would exceed `budget` tokens, entries are dropped from L5, then L4, L2, L3
/// (lowest priority first, later insertions before earlier ones on ties) and
/// an "[N entries elided]" line closes each affected layer. L1 and the role
/// prompt are never dropped: if they alone do not fit, throws BudgetTooSmall.
AssembledPrompt assemble_prompt(const ContextStack& stack, std::string_view role_prompt,
                                std::size_t budget);

/// Token size of the smallest prompt assemble_prompt can produce: every
/// droppable entry elided.
std::size_t minimum_prompt_tokens(const ContextStack& stack, std::string_view role_prompt);

}  // namespace ctxeng::context
