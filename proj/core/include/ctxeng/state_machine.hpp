#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ctxeng::orchestrator {

enum class OrchestrationState { Plan, RetrieveContext, Delegate, Edit, Test, Review, IntegratePR, Done, Failed };

std::string_view to_string(OrchestrationState s) noexcept;
std::optional<OrchestrationState> state_from_string(std::string_view name) noexcept;
bool is_terminal(OrchestrationState s) noexcept;

/// The transition relation:
///   Plan -> RetrieveContext -> Delegate -> Edit -> Test
///   Test -> Review | Delegate | Failed
///   Review -> IntegratePR | Edit
///   Edit -> IntegratePR, only for an Edit entered from Review
///   IntegratePR -> Done
///   any non-terminal state -> Failed
/// `edit_from_review` says whether the current Edit was entered from Review.
bool transition_allowed(OrchestrationState from, OrchestrationState to, bool edit_from_review = false) noexcept;

struct PathCheck {
    bool valid = true;
    std::string problem;  // first violation, empty when valid
    std::size_t test_to_delegate = 0;
};

/// Validates a sequence of entered states: it must start at Plan, follow the
/// relation, and end in Done, Failed, or (when `paused`) Review.
PathCheck check_state_path(const std::vector<OrchestrationState>& path, bool paused = false);

/// Enforces the relation as states are entered.
class StateMachine {
public:
    OrchestrationState current() const noexcept { return current_; }
    bool started() const noexcept { return started_; }
    /// Throws InvalidArgument on a forbidden transition.
    void enter(OrchestrationState next);
    const std::vector<OrchestrationState>& path() const noexcept { return path_; }

private:
    OrchestrationState current_ = OrchestrationState::Plan;
    bool started_ = false;
    bool edit_from_review_ = false;
    std::vector<OrchestrationState> path_;
};

}  // namespace ctxeng::orchestrator
