#include <gtest/gtest.h>

#include <nlohmann/json.hpp>

#include "ctxeng/error.hpp"
#include "ctxeng/orchestrator.hpp"
#include "ctxeng/report.hpp"
#include "ctxeng/text.hpp"
#include "support.hpp"

namespace tst = ctxeng::testing;
namespace fs = std::filesystem;

using namespace ctxeng;
using namespace ctxeng::orchestrator;
using ctxeng::testing::TempDir;
using S = OrchestrationState;

namespace {

std::map<std::string, std::string> small_repo() {
    return {
        {"PROJECT.md", "# Demo\nKeep functions small.\n"},
        {"src/app.py", "def main():\n    return helper(1)\n\n\ndef helper(x):\n    return x + 1\n"},
        {"agents/dev-a.agent", tst::agent_file("dev-a", "Application features", "Read, Write, Edit")},
        {"agents/dev-b.agent", tst::agent_file("dev-b", "Data layer", "Read, Write, Edit")},
        {"agents/planner.agent", tst::agent_file("planner", "Plans work", "Read")},
        {"agents/code-reviewer.agent", tst::agent_file("code-reviewer", "Reviews diffs", "Read, Grep")},
        {"agents/intent-translator.agent", tst::agent_file("intent-translator", "Translates", "Read")},
    };
}

context::TaskSpec one_step_spec() {
    context::TaskSpec s;
    s.title = "Tweak helper";
    s.clarified_goal = "Change the helper increment.";
    s.subtasks = {{1, "Change helper", "dev-a", {"src/app.py"}, {}}};
    s.acceptance_checks = {"tests pass"};
    s.search_terms = {"helper"};
    return s;
}

std::string plan_of(const std::vector<std::tuple<int, std::string, std::vector<int>>>& steps) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& [id, role, deps] : steps) {
        arr.push_back({{"id", id}, {"description", "step " + std::to_string(id)}, {"role", role},
                       {"depends_on", deps}, {"targets", nlohmann::json::array()}});
    }
    return nlohmann::json{{"steps", arr}}.dump();
}

std::string review_of(const std::vector<ReviewSuggestion>& list) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& s : list) {
        nlohmann::json j = {{"severity", std::string(to_string(s.severity))}, {"path", s.path},
                            {"anchor", s.anchor}, {"suggestion", s.suggestion}};
        if (s.proposed_edit) j["proposed_edit"] = {{"find", s.proposed_edit->find}, {"replace", s.proposed_edit->replace}};
        arr.push_back(j);
    }
    return nlohmann::json{{"suggestions", arr}}.dump();
}

struct Harness {
    TempDir dir;
    fs::path repo = dir / "repo";
    std::vector<provider::FixtureEntry> entries;
    RunConfig config;
    ConfirmFn confirm;

    Harness() {
        tst::write_files(repo, small_repo());
        config.test_command = "true";
        config.test_timeout_seconds = 10;
        config.k_retrieval = 2;
    }

    void add(std::string agent, std::string contains, std::vector<provider::AgentAction> actions) {
        entries.push_back(tst::fixture(std::move(agent), std::move(contains), std::move(actions)));
    }

    RunResult run_spec(const context::TaskSpec& spec) {
        provider::ScriptedProvider p(entries);
        return Orchestrator(env(p)).run_spec(spec);
    }
    RunResult run_task(std::string_view request) {
        provider::ScriptedProvider p(entries);
        return Orchestrator(env(p)).run_task(request);
    }

private:
    RunEnvironment env(provider::Provider& p) {
        RunEnvironment e;
        e.repo_root = repo;
        e.config = config;
        e.provider = &p;
        e.confirm = confirm;
        return e;
    }
};

std::vector<S> path_of(const RunResult& r) { return r.transcript.state_path(); }

}  // namespace

// --- state machine ---------------------------------------------------------

TEST(StateMachine, Relation) {
    EXPECT_TRUE(transition_allowed(S::Plan, S::RetrieveContext));
    EXPECT_TRUE(transition_allowed(S::Test, S::Delegate));
    EXPECT_TRUE(transition_allowed(S::Review, S::Edit));
    EXPECT_FALSE(transition_allowed(S::Edit, S::IntegratePR));
    EXPECT_TRUE(transition_allowed(S::Edit, S::IntegratePR, true));
    EXPECT_FALSE(transition_allowed(S::Plan, S::Delegate));
    EXPECT_FALSE(transition_allowed(S::Done, S::Failed));
    EXPECT_TRUE(transition_allowed(S::Review, S::Failed));
    EXPECT_TRUE(is_terminal(S::Done));
    EXPECT_EQ(state_from_string("IntegratePR"), S::IntegratePR);
    EXPECT_FALSE(state_from_string("Deploy").has_value());
}

TEST(StateMachine, PathCheck) {
    const std::vector<S> good = {S::Plan, S::RetrieveContext, S::Delegate, S::Edit, S::Test, S::Delegate,
                                 S::Edit, S::Test, S::Review, S::Edit, S::IntegratePR, S::Done};
    const auto c = check_state_path(good);
    EXPECT_TRUE(c.valid) << c.problem;
    EXPECT_EQ(c.test_to_delegate, 1u);
    EXPECT_FALSE(check_state_path({S::Plan, S::RetrieveContext}).valid);
    EXPECT_TRUE(check_state_path({S::Plan, S::RetrieveContext, S::Delegate, S::Edit, S::Test, S::Review}, true).valid);
    EXPECT_FALSE(check_state_path({S::RetrieveContext, S::Failed}).valid);
    EXPECT_FALSE(check_state_path({}).valid);
}

TEST(StateMachine, EnforcesOnEnter) {
    StateMachine sm;
    sm.enter(S::Plan);
    EXPECT_THROW(sm.enter(S::Edit), Error);
    sm.enter(S::Failed);
    EXPECT_THROW(sm.enter(S::Plan), Error);
}

// --- plan --------------------------------------------------------------------

TEST(Plan, ValidationAndOrder) {
    TempDir dir;
    tst::write_files(dir.path(), small_repo());
    const auto reg = agents::load_registry(dir / "agents");
    auto plan = plan_from_json(plan_of({{1, "dev-a", {}}, {2, "dev-b", {3}}, {3, "dev-a", {1}}}));
    EXPECT_TRUE(validate_plan(plan, reg).empty());
    EXPECT_EQ(execution_order(plan), (std::vector<int>{1, 3, 2}));
    EXPECT_EQ(plan_from_json(plan_to_json(plan)), plan);

    EXPECT_FALSE(validate_plan(plan_from_json(plan_of({{1, "nonexistent", {}}})), reg).empty());
    EXPECT_FALSE(validate_plan(plan_from_json(plan_of({{1, "dev-a", {2}}, {2, "dev-a", {1}}})), reg).empty());
    EXPECT_FALSE(validate_plan(plan_from_json(plan_of({{1, "dev-a", {}}, {1, "dev-b", {}}})), reg).empty());
    EXPECT_FALSE(validate_plan(plan_from_json(R"({"steps":[]})"), reg).empty());
    EXPECT_THROW(plan_from_json("{not json"), Error);
}

TEST(Plan, FailureAttribution) {
    const auto plan = plan_from_json(plan_of({{1, "dev-a", {}}, {2, "dev-b", {}}}));
    const std::vector<int> order = {1, 2};
    const std::vector<std::vector<std::string>> edits = {{"src/ui.ts"}, {"src/db.ts"}};
    EXPECT_EQ(attribute_failure(plan, order, edits, "FAIL in src/db.ts line 3"), 2);
    EXPECT_EQ(attribute_failure(plan, order, edits, "FAIL in src/ui.ts"), 1);
    EXPECT_EQ(attribute_failure(plan, order, edits, "no paths here"), 2);
}

TEST(Review, ParseAndAutoApply) {
    const auto list = suggestions_from_json(
        R"([{"severity":"minor","path":"a","anchor":"x","suggestion":"s","proposed_edit":{"find":"x","replace":"y"}},
            {"severity":"blocking","path":"a","anchor":"x","suggestion":"stop"}])");
    ASSERT_EQ(list.size(), 2u);
    EXPECT_TRUE(auto_applicable(list[0], AutoApply::minor));
    EXPECT_FALSE(auto_applicable(list[0], AutoApply::none));
    EXPECT_FALSE(auto_applicable(list[1], AutoApply::minor));
    EXPECT_THROW(suggestions_from_json(R"([{"severity":"catastrophic","path":"a"}])"), Error);
}

// --- diff and change sets ---------------------------------------------------

TEST(ChangeSet, NoOpIsEmpty) {
    const Snapshot s = {{"a.txt", "x\n"}};
    const auto cs = build_change_set(s, s, "nothing");
    EXPECT_TRUE(cs.unified_diff.empty());
    EXPECT_TRUE(cs.files_touched.empty());
}

TEST(ChangeSet, SingleLineEditIsOneHunk) {
    std::string before;
    for (int i = 1; i <= 30; ++i) before += "line " + std::to_string(i) + "\n";
    std::string after = before;
    after.replace(after.find("line 15\n"), 8, "line fifteen\n");
    const Snapshot pre = {{"f.txt", before}};
    const Snapshot post = {{"f.txt", after}};
    const auto cs = build_change_set(pre, post, "edit");
    EXPECT_EQ(cs.files_touched, std::vector<std::string>{"f.txt"});
    std::size_t hunks = 0;
    for (auto line : split_lines(cs.unified_diff)) hunks += line.starts_with("@@") ? 1 : 0;
    EXPECT_EQ(hunks, 1u);
    EXPECT_NE(cs.unified_diff.find("@@ -12,7 +12,7 @@"), std::string::npos) << cs.unified_diff;
    EXPECT_EQ(tst::gnu_patch_check(pre, cs.unified_diff, post), "");
}

TEST(ChangeSet, NoNewlineMarkerAndDeletion) {
    const Snapshot pre = {{"a.txt", "one\ntwo"}, {"gone.txt", "bye\n"}};
    const Snapshot post = {{"a.txt", "one\ntwo\n"}, {"new.txt", "hi"}};
    const auto diff = diff_snapshots(pre, post);
    EXPECT_NE(diff.find("\\ No newline at end of file"), std::string::npos);
    EXPECT_NE(diff.find("+++ /dev/null"), std::string::npos);
    EXPECT_EQ(apply_patch(pre, diff), post);
    EXPECT_EQ(tst::gnu_patch_check(pre, diff, post), "");
    EXPECT_EQ(changed_paths(pre, post), (std::vector<std::string>{"a.txt", "gone.txt", "new.txt"}));
}

TEST(ChangeSet, ReplayMismatchDetected) {
    const Snapshot pre = {{"a.txt", "one\ntwo\n"}};
    const auto diff = diff_snapshots(pre, {{"a.txt", "one\nthree\n"}});
    try {
        apply_patch({{"a.txt", "one\nTWO\n"}}, diff);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::DiffReplayMismatch);
    }
}

// --- transcript and report --------------------------------------------------

TEST(Transcript, RoundTripAndTotals) {
    Transcript t("run1");
    t.append("Plan", "planner", EventKind::provider_call, "p", {10, 5});
    t.append("Edit", "dev", EventKind::provider_call, "q", {10, 5});
    t.append("Edit", "dev", EventKind::tool_call, "Write a.txt");
    t.set_outcome("Done");
    EXPECT_EQ(t.totals(), (Totals{2, 20, 10}));
    EXPECT_EQ(t.totals().total_tokens(), 30u);
    const auto parsed = Transcript::parse(t.serialize());
    EXPECT_EQ(parsed.events(), t.events());
    EXPECT_EQ(parsed.totals(), t.totals());
    EXPECT_EQ(parsed.outcome(), "Done");
    const auto report = build_report(parsed);
    EXPECT_TRUE(report.consistent());
    ASSERT_EQ(report.per_agent.size(), 2u);
    EXPECT_EQ(report.per_agent[0], (AgentUsage{"dev", 1, 10, 5}));
    EXPECT_EQ(render_report(report), render_report(build_report(Transcript::parse(t.serialize()))));
}

TEST(Transcript, TruncatedNamesTheLine) {
    Transcript t("run1");
    for (int i = 0; i < 4; ++i) t.append("Plan", "a", EventKind::note, "n");
    auto text = t.serialize();
    const auto lines = split_lines(text);
    std::string cut;
    for (std::size_t i = 0; i < 3; ++i) cut += std::string(lines[i]) + "\n";
    cut += std::string(lines[3].substr(0, lines[3].size() / 2));
    try {
        Transcript::parse(cut);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::MalformedTranscript);
        EXPECT_NE(std::string(e.what()).find("line 4"), std::string::npos) << e.what();
    }
}

TEST(Report, Ratio) {
    EXPECT_EQ(format_ratio(30000, 10000), "3.00x");
    EXPECT_EQ(format_ratio(5, 0), "inf");
}

TEST(RunConfig, ParseAndReject) {
    const auto c = parse_run_config("max_test_retries: 3\ntest_command: make test\nauto_apply_max_severity: none\n");
    EXPECT_EQ(c.max_test_retries, 3u);
    EXPECT_EQ(c.test_command, "make test");
    EXPECT_EQ(c.auto_apply_max_severity, AutoApply::none);
    EXPECT_THROW(parse_run_config("bogus_key: 1\n"), Error);
    EXPECT_THROW(parse_run_config("k_retrieval: 0\n"), Error);
    EXPECT_THROW(parse_run_config("max_test_retries: many\n"), Error);
}

// --- end to end ---------------------------------------------------------------

TEST(RunTask, CustomBlockScenario) {
    TempDir work;
    const auto run = tst::run_customblock(work.path());
    const auto& r = run.result;
    ASSERT_EQ(r.final_state, S::Done) << r.failure;
    EXPECT_EQ(r.exit_code(), 0);
    EXPECT_EQ(r.plan.steps.size(), 4u);
    EXPECT_EQ(path_of(r), (std::vector<S>{S::Plan, S::RetrieveContext, S::Delegate, S::Edit, S::Test, S::Delegate,
                                          S::Edit, S::Test, S::Review, S::Edit, S::IntegratePR, S::Done}));
    EXPECT_EQ(r.test_runs.size(), 2u);
    EXPECT_EQ(r.applied_suggestions, 1u);
    ASSERT_EQ(r.suggestions.size(), 1u);
    EXPECT_EQ(r.suggestions[0].severity, Severity::minor);
    ASSERT_TRUE(r.change_set.has_value());
    EXPECT_EQ(tst::gnu_patch_check(run.pre, r.change_set->unified_diff, run.post), "");
    EXPECT_NE(run.post.at("src/blocks/CustomBlock.tsx").find("CUSTOM_BLOCK_TITLE"), std::string::npos);
    EXPECT_EQ(tst::lock_problem(r.transcript), "");
    for (const auto& d : r.delegations) {
        for (const auto& p : d.snippet_paths) EXPECT_TRUE(run.pre.count(p) || run.post.count(p)) << p;
    }
}

TEST(RunTask, TranslatorRejectsDuplicateIds) {
    Harness h;
    auto spec = one_step_spec();
    spec.subtasks.push_back(spec.subtasks[0]);
    for (int i = 0; i < 2; ++i) {
        h.add("intent-translator", "== Request ==", {tst::message_action(context::task_spec_to_json(spec))});
    }
    const auto r = h.run_task("Change the helper");
    EXPECT_EQ(r.final_state, S::Failed);
    EXPECT_EQ(r.failure_code, ErrorCode::SpecValidationFailed);
    EXPECT_EQ(r.exit_code(), 2);
    EXPECT_GT(r.failure_seq, 0u);
}

TEST(RunTask, CalendarRequestTranslated) {
    Harness h;
    context::TaskSpec spec;
    spec.title = "Calendar view";
    spec.clarified_goal = "Add a calendar view to the scheduling page.";
    spec.subtasks = {{1, "Update UI component to include a calendar widget", "dev-a", {}, {}},
                     {2, "Fetch schedule data for the visible month", "dev-b", {}, {}}};
    spec.acceptance_checks = {"calendar renders"};
    spec.search_terms = {"calendar"};
    h.add("intent-translator", "Add a calendar view", {tst::message_action(context::task_spec_to_json(spec))});
    h.add("planner", "available-roles", {tst::message_action(plan_of({{1, "dev-a", {}}, {2, "dev-b", {1}}}))});
    provider::ScriptedProvider p(h.entries);
    RunEnvironment env;
    env.repo_root = h.repo;
    env.config = h.config;
    env.provider = &p;
    const auto r = Orchestrator(env).plan_only("Add a calendar view to the scheduling page");
    ASSERT_TRUE(r.spec.has_value()) << r.failure;
    EXPECT_EQ(r.spec->subtasks.size(), 2u);
    EXPECT_EQ(r.plan.steps.size(), 2u);
    EXPECT_EQ(r.final_state, S::Plan);
}

TEST(RunTask, EmptyRequestFails) {
    Harness h;
    const auto r = h.run_task("   ");
    EXPECT_EQ(r.final_state, S::Failed);
    EXPECT_EQ(r.failure_code, ErrorCode::InvalidArgument);
}

TEST(RunTask, UnknownRoleFailsAfterOneRetry) {
    Harness h;
    h.add("planner", "available-roles", {tst::message_action(plan_of({{1, "nonexistent", {}}}))});
    h.add("planner", "PLAN REMINDER", {tst::message_action(plan_of({{1, "nonexistent", {}}}))});
    const auto r = h.run_spec(one_step_spec());
    EXPECT_EQ(r.final_state, S::Failed);
    EXPECT_EQ(r.failure_code, ErrorCode::PlanValidationFailed);
    std::size_t planner_calls = 0;
    for (const auto& e : r.transcript.events()) {
        planner_calls += e.kind == EventKind::provider_call && e.agent_name == "planner";
    }
    EXPECT_EQ(planner_calls, 2u);
    EXPECT_EQ(path_of(r), (std::vector<S>{S::Plan, S::Failed}));
}

TEST(RunTask, EmptyPlanFailsAtPlan) {
    Harness h;
    h.add("planner", "", {tst::message_action(R"({"steps":[]})")});
    h.add("planner", "", {tst::message_action(R"({"steps":[]})")});
    const auto r = h.run_spec(one_step_spec());
    EXPECT_EQ(r.failure_code, ErrorCode::PlanValidationFailed);
    EXPECT_EQ(path_of(r), (std::vector<S>{S::Plan, S::Failed}));
}

TEST(RunTask, SingleStepPlanEndsDone) {
    Harness h;
    h.add("planner", "available-roles", {tst::message_action(plan_of({{1, "dev-a", {}}}))});
    h.add("dev-a", "Step 1 of 1",
          {tst::edit_action("src/app.py", "return x + 1", "return x + 2"), tst::done_action()});
    h.add("code-reviewer", "review-format", {tst::message_action(review_of({}))});
    const auto r = h.run_spec(one_step_spec());
    ASSERT_EQ(r.final_state, S::Done) << r.failure;
    EXPECT_TRUE(r.plan.steps[0].depends_on.empty());
    ASSERT_TRUE(r.change_set.has_value());
    EXPECT_EQ(r.change_set->files_touched, std::vector<std::string>{"src/app.py"});
    EXPECT_EQ(path_of(r), (std::vector<S>{S::Plan, S::RetrieveContext, S::Delegate, S::Edit, S::Test, S::Review,
                                          S::IntegratePR, S::Done}));
}

TEST(RunTask, NoEditsSkipsReview) {
    Harness h;
    h.add("planner", "available-roles", {tst::message_action(plan_of({{1, "dev-a", {}}}))});
    h.add("dev-a", "Step 1 of 1", {tst::message_action("nothing to change"), tst::done_action()});
    const auto r = h.run_spec(one_step_spec());
    ASSERT_EQ(r.final_state, S::Done) << r.failure;
    EXPECT_TRUE(r.suggestions.empty());
    EXPECT_TRUE(r.change_set->unified_diff.empty());
}

TEST(RunTask, BlockedAgentFails) {
    Harness h;
    h.add("planner", "available-roles", {tst::message_action(plan_of({{1, "dev-a", {}}}))});
    h.add("dev-a", "Step 1 of 1", {tst::done_action(true, "missing credentials")});
    const auto r = h.run_spec(one_step_spec());
    EXPECT_EQ(r.final_state, S::Failed);
    EXPECT_EQ(r.failure_code, ErrorCode::AgentBlocked);
    EXPECT_EQ(r.plan.steps[0].status, StepStatus::failed);
    EXPECT_EQ(tst::read_tree(h.repo), small_repo());
}

TEST(RunTask, RetriesExhausted) {
    Harness h;
    h.config.test_command = "echo 'FAIL src/app.py: helper wrong'; exit 1";
    h.config.max_test_retries = 2;
    h.add("planner", "available-roles", {tst::message_action(plan_of({{1, "dev-a", {}}}))});
    h.add("dev-a", "Step 1 of 1", {tst::write_action("src/extra.py", "x = 1\n"), tst::done_action()});
    h.add("dev-a", "Repair after test run 1", {tst::write_action("src/extra.py", "x = 2\n"), tst::done_action()});
    h.add("dev-a", "Repair after test run 2", {tst::write_action("src/extra.py", "x = 3\n"), tst::done_action()});
    const auto r = h.run_spec(one_step_spec());
    EXPECT_EQ(r.final_state, S::Failed);
    EXPECT_EQ(r.test_runs.size(), 3u);
    const auto c = check_state_path(path_of(r));
    EXPECT_TRUE(c.valid) << c.problem;
    EXPECT_EQ(c.test_to_delegate, 2u);
    for (const auto& t : r.test_runs) EXPECT_NE(t.output.find("FAIL src/app.py"), std::string::npos);
    ASSERT_GE(r.delegations.size(), 3u);
    EXPECT_EQ(r.delegations.back().agent, "dev-a");
}

TEST(RunTask, BlockingReviewPausesAndRestores) {
    Harness h;
    h.add("planner", "available-roles", {tst::message_action(plan_of({{1, "dev-a", {}}}))});
    h.add("dev-a", "Step 1 of 1",
          {tst::edit_action("src/app.py", "return x + 1", "return x + 2"), tst::done_action()});
    h.add("code-reviewer", "review-format",
          {tst::message_action(review_of({{Severity::blocking, "src/app.py", "helper", "breaks callers",
                                               std::nullopt},
                                              {Severity::minor, "src/app.py", "helper", "rename",
                                               ProposedEdit{"def helper", "def helper_fn"}}}))});
    bool asked = false;
    h.confirm = [&](const std::vector<ReviewSuggestion>& blocking) {
        asked = true;
        EXPECT_EQ(blocking.size(), 1u);
        return false;
    };
    const auto r = h.run_spec(one_step_spec());
    EXPECT_TRUE(asked);
    EXPECT_TRUE(r.paused);
    EXPECT_EQ(r.final_state, S::Review);
    EXPECT_EQ(r.exit_code(), 3);
    EXPECT_EQ(r.applied_suggestions, 0u);
    const auto post = tst::read_tree(h.repo);
    EXPECT_NE(post.at("src/app.py").find("return x + 2"), std::string::npos);
    EXPECT_EQ(post.at("src/app.py").find("helper_fn"), std::string::npos);
}

TEST(RunTask, SharedFileLocksSerialize) {
    TempDir work;
    const auto out = tst::run_shared_file_scenario(work.path());
    EXPECT_EQ(out.problem, "");
    EXPECT_EQ(tst::forced_unlocked_write(work / "forced"), "");
}

TEST(RunTask, Deterministic) {
    auto once = [] {
        Harness h;
        h.add("planner", "available-roles", {tst::message_action(plan_of({{1, "dev-a", {}}}))});
        h.add("dev-a", "Step 1 of 1",
              {tst::edit_action("src/app.py", "return x + 1", "return x + 2"), tst::done_action()});
        h.add("code-reviewer", "review-format", {tst::message_action(review_of({}))});
        const auto r = h.run_spec(one_step_spec());
        return std::make_pair(without_wall_times(r.transcript), tst::read_tree(h.repo));
    };
    EXPECT_EQ(once(), once());
}
