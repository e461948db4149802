#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ctxeng/agent_registry.hpp"
#include "ctxeng/code_index.hpp"
#include "ctxeng/context.hpp"
#include "ctxeng/diff.hpp"
#include "ctxeng/embedder.hpp"
#include "ctxeng/error.hpp"
#include "ctxeng/knowledge.hpp"
#include "ctxeng/provider.hpp"
#include "ctxeng/run_config.hpp"
#include "ctxeng/state_machine.hpp"
#include "ctxeng/tools.hpp"
#include "ctxeng/transcript.hpp"

namespace ctxeng::orchestrator {

enum class StepStatus { pending, in_progress, done, failed };
std::string_view to_string(StepStatus s) noexcept;

struct PlanStep {
    int id = 0;
    std::string description;
    std::string assigned_role;
    std::vector<int> depends_on;
    std::vector<std::string> target_hints;
    StepStatus status = StepStatus::pending;
    bool operator==(const PlanStep&) const = default;
};

struct Plan {
    std::vector<PlanStep> steps;
    const PlanStep* find(int id) const;
    PlanStep* find(int id);
    bool operator==(const Plan&) const = default;
};

/// {"steps":[{"id":1,"description":...,"role":...,"depends_on":[...],
/// "targets":[...]}]}. Throws PlanValidationFailed on malformed JSON or
/// missing fields.
Plan plan_from_json(std::string_view json);
std::string plan_to_json(const Plan& plan);

/// Problems with a parsed plan: no steps, duplicate or non-positive ids,
/// roles missing from the registry, unknown or cyclic dependencies.
std::vector<std::string> validate_plan(const Plan& plan, const agents::Registry& registry);

/// Step ids in dependency order; among ready steps the one listed first goes
/// first. Requires an acyclic plan.
std::vector<int> execution_order(const Plan& plan);

/// "1. [role] description (targets: ...; after: ...) - status" per line.
std::string render_plan(const Plan& plan, bool with_status = false);

struct StepOutcome {
    std::vector<std::string> edits;  // paths written, in first-write order
    std::vector<std::string> messages;
    provider::DoneStatus status = provider::DoneStatus::complete;
    std::string note;
    std::size_t actions = 0;
};

struct TestReport {
    bool passed = false;
    std::string output;
    std::optional<int> exit_code;
    std::optional<ErrorCode> error;
};

/// The agent that should repair a failing test run: the role of the first
/// plan step whose edited or targeted files appear in `output`, else the role
/// of the last completed step in `order`. Returns the chosen step id.
int attribute_failure(const Plan& plan, const std::vector<int>& order,
                      const std::vector<std::vector<std::string>>& edits_by_step, std::string_view output);

enum class Severity { minor, major, blocking };
std::string_view to_string(Severity s) noexcept;

struct ProposedEdit {
    std::string find;
    std::string replace;
    bool operator==(const ProposedEdit&) const = default;
};

struct ReviewSuggestion {
    Severity severity = Severity::minor;
    std::string path;
    std::string anchor;
    std::string suggestion;
    std::optional<ProposedEdit> proposed_edit;
    bool operator==(const ReviewSuggestion&) const = default;
};

/// {"suggestions":[{"severity":...,"path":...,"anchor":...,"suggestion":...,
/// "proposed_edit":{"find":...,"replace":...}}]} or a bare array. Throws
/// InvalidArgument.
std::vector<ReviewSuggestion> suggestions_from_json(std::string_view json);

/// Minor suggestions with a proposed edit, when the config allows minor
/// auto-application. Blocking and major suggestions never qualify.
bool auto_applicable(const ReviewSuggestion& s, AutoApply max_severity) noexcept;

struct ChangeSet {
    std::string summary;
    std::string unified_diff;
    std::vector<std::string> files_touched;
};

/// Diff between the snapshots plus the replay check: applying the diff to
/// `pre` must reproduce `post` byte for byte (DiffReplayMismatch otherwise).
ChangeSet build_change_set(const Snapshot& pre, const Snapshot& post, std::string summary);

/// Record of one agent hand-off, for auditing what the agent was shown.
struct Delegation {
    int step_id = 0;  // 0 for a repair hand-off
    std::string agent;
    std::vector<std::string> snippet_paths;
    std::vector<std::string> prompt_digests;
};

struct RunResult {
    OrchestrationState final_state = OrchestrationState::Plan;
    bool paused = false;
    std::optional<ChangeSet> change_set;
    Transcript transcript;
    std::optional<context::TaskSpec> spec;
    Plan plan;
    std::string failure;  // error text when Failed
    std::optional<ErrorCode> failure_code;
    std::uint64_t failure_seq = 0;  // transcript event that caused the failure
    std::vector<TestReport> test_runs;
    std::vector<ReviewSuggestion> suggestions;
    std::size_t applied_suggestions = 0;
    std::vector<Delegation> delegations;

    /// 0 for Done, 3 when paused at Review, 2 otherwise.
    int exit_code() const noexcept;
};

/// Answers whether a run may integrate despite blocking review suggestions.
using ConfirmFn = std::function<bool(const std::vector<ReviewSuggestion>& blocking)>;

struct RunEnvironment {
    std::filesystem::path repo_root;
    RunConfig config;
    provider::Provider* provider = nullptr;
    const retrieval::Embedder* embedder = nullptr;  // null: NgramEmbedder
    ConfirmFn confirm;                              // null: decline
    Transcript::Clock clock;
};

/// Drives one task through Plan, RetrieveContext, Delegate, Edit, Test,
/// Review and IntegratePR. Steps run one at a time in dependency order. A
/// failing test run goes back to Delegate with the output appended to L5,
/// at most max_test_retries times. Every error ends the run in Failed with
/// the causing transcript event recorded.
class Orchestrator {
public:
    explicit Orchestrator(RunEnvironment env);

    RunResult run_task(std::string_view user_request);
    /// Skips intent translation.
    RunResult run_spec(const context::TaskSpec& spec);
    /// Stops after make_plan; final_state stays Plan on success.
    RunResult plan_only(std::string_view user_request);
    RunResult plan_only(const context::TaskSpec& spec);

    const RunEnvironment& environment() const noexcept { return env_; }

private:
    RunResult run(std::string_view request, const context::TaskSpec* spec, bool stop_after_plan);

    RunEnvironment env_;
    retrieval::NgramEmbedder default_embedder_;
};

}  // namespace ctxeng::orchestrator
