#include "ctxeng/state_machine.hpp"

#include <array>

#include "ctxeng/error.hpp"

namespace ctxeng::orchestrator {

using S = OrchestrationState;

namespace {

constexpr std::array<std::pair<S, std::string_view>, 9> kNames = {{
    {S::Plan, "Plan"},
    {S::RetrieveContext, "RetrieveContext"},
    {S::Delegate, "Delegate"},
    {S::Edit, "Edit"},
    {S::Test, "Test"},
    {S::Review, "Review"},
    {S::IntegratePR, "IntegratePR"},
    {S::Done, "Done"},
    {S::Failed, "Failed"},
}};

}  // namespace

std::string_view to_string(S s) noexcept {
    for (const auto& [state, name] : kNames) {
        if (state == s) return name;
    }
    return "";
}

std::optional<S> state_from_string(std::string_view name) noexcept {
    for (const auto& [state, n] : kNames) {
        if (n == name) return state;
    }
    return std::nullopt;
}

bool is_terminal(S s) noexcept { return s == S::Done || s == S::Failed; }

bool transition_allowed(S from, S to, bool edit_from_review) noexcept {
    if (is_terminal(from)) return false;
    if (to == S::Failed) return true;
    switch (from) {
        case S::Plan: return to == S::RetrieveContext;
        case S::RetrieveContext: return to == S::Delegate;
        case S::Delegate: return to == S::Edit;
        case S::Edit: return edit_from_review ? to == S::IntegratePR : to == S::Test;
        case S::Test: return to == S::Review || to == S::Delegate;
        case S::Review: return to == S::IntegratePR || to == S::Edit;
        case S::IntegratePR: return to == S::Done;
        default: return false;
    }
}

PathCheck check_state_path(const std::vector<S>& path, bool paused) {
    PathCheck check;
    auto fail = [&](std::string why) {
        check.valid = false;
        check.problem = std::move(why);
        return check;
    };
    if (path.empty()) return fail("empty state path");
    if (path.front() != S::Plan) return fail("path starts at " + std::string(to_string(path.front())));
    bool edit_from_review = false;
    for (std::size_t i = 1; i < path.size(); ++i) {
        const auto from = path[i - 1];
        const auto to = path[i];
        if (!transition_allowed(from, to, edit_from_review)) {
            return fail("step " + std::to_string(i) + ": " + std::string(to_string(from)) + " -> " +
                        std::string(to_string(to)) + " is not a valid transition");
        }
        if (from == S::Test && to == S::Delegate) ++check.test_to_delegate;
        if (to == S::Edit) edit_from_review = from == S::Review;
    }
    const auto last = path.back();
    if (paused) {
        if (last != S::Review) return fail("a paused run must end at Review");
    } else if (!is_terminal(last)) {
        return fail("path ends at non-terminal " + std::string(to_string(last)));
    }
    return check;
}

void StateMachine::enter(S next) {
    if (!started_) {
        if (next != S::Plan) throw Error(ErrorCode::InvalidArgument, "a run starts at Plan");
        started_ = true;
    } else if (!transition_allowed(current_, next, edit_from_review_)) {
        throw Error(ErrorCode::InvalidArgument, "transition " + std::string(to_string(current_)) + " -> " +
                                                    std::string(to_string(next)) + " is not allowed");
    } else if (next == S::Edit) {
        edit_from_review_ = current_ == S::Review;
    }
    current_ = next;
    path_.push_back(next);
}

}  // namespace ctxeng::orchestrator
