#include "ctxeng/orchestrator.hpp"

#include <algorithm>
#include <map>
#include <memory>
#include <nlohmann/json.hpp>
#include <set>

#include "ctxeng/digest.hpp"
#include "ctxeng/text.hpp"
#include "ctxeng/vector_index.hpp"

namespace ctxeng::orchestrator {

namespace fs = std::filesystem;
using json = nlohmann::json;
using context::ContextEntry;
using context::ContextStack;
using context::LayerId;
using context::TaskSpec;

// ---------------------------------------------------------------------------
// Plans

std::string_view to_string(StepStatus s) noexcept {
    switch (s) {
        case StepStatus::pending: return "pending";
        case StepStatus::in_progress: return "in_progress";
        case StepStatus::done: return "done";
        case StepStatus::failed: return "failed";
    }
    return "";
}

const PlanStep* Plan::find(int id) const {
    for (const auto& s : steps) {
        if (s.id == id) return &s;
    }
    return nullptr;
}

PlanStep* Plan::find(int id) {
    for (auto& s : steps) {
        if (s.id == id) return &s;
    }
    return nullptr;
}

Plan plan_from_json(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::PlanValidationFailed, std::string("plan is not valid JSON: ") + e.what());
    }
    const json* items = nullptr;
    if (doc.is_array()) {
        items = &doc;
    } else if (doc.is_object() && doc.contains("steps") && doc.at("steps").is_array()) {
        items = &doc.at("steps");
    } else {
        throw Error(ErrorCode::PlanValidationFailed, "plan needs a \"steps\" array");
    }

    Plan plan;
    std::vector<std::string> bad;
    for (std::size_t i = 0; i < items->size(); ++i) {
        const auto& item = (*items)[i];
        const std::string where = "steps[" + std::to_string(i) + "].";
        if (!item.is_object()) {
            bad.push_back("steps[" + std::to_string(i) + "]");
            continue;
        }
        PlanStep step;
        if (item.contains("id") && item.at("id").is_number_integer()) step.id = item.at("id").get<int>();
        else bad.push_back(where + "id");
        if (item.contains("description") && item.at("description").is_string()) {
            step.description = item.at("description").get<std::string>();
        } else {
            bad.push_back(where + "description");
        }
        const char* role_key = item.contains("role") ? "role" : "assigned_role";
        if (item.contains(role_key) && item.at(role_key).is_string()) {
            step.assigned_role = item.at(role_key).get<std::string>();
        } else {
            bad.push_back(where + "role");
        }
        if (item.contains("depends_on")) {
            const auto& deps = item.at("depends_on");
            if (!deps.is_array()) bad.push_back(where + "depends_on");
            else {
                for (const auto& d : deps) {
                    if (d.is_number_integer()) step.depends_on.push_back(d.get<int>());
                    else bad.push_back(where + "depends_on");
                }
            }
        }
        if (item.contains("targets")) {
            const auto& ts = item.at("targets");
            if (!ts.is_array()) bad.push_back(where + "targets");
            else {
                for (const auto& t : ts) {
                    if (t.is_string()) step.target_hints.push_back(t.get<std::string>());
                    else bad.push_back(where + "targets");
                }
            }
        }
        plan.steps.push_back(std::move(step));
    }
    if (!bad.empty()) throw Error(ErrorCode::PlanValidationFailed, "missing or mistyped fields: " + join(bad, ", "));
    return plan;
}

std::string plan_to_json(const Plan& plan) {
    json steps = json::array();
    for (const auto& s : plan.steps) {
        steps.push_back({{"id", s.id},
                         {"description", s.description},
                         {"role", s.assigned_role},
                         {"depends_on", s.depends_on},
                         {"targets", s.target_hints}});
    }
    return json{{"steps", steps}}.dump();
}

std::vector<std::string> validate_plan(const Plan& plan, const agents::Registry& registry) {
    std::vector<std::string> problems;
    if (plan.steps.empty()) {
        problems.push_back("the plan has no steps");
        return problems;
    }
    std::set<int> ids;
    for (const auto& s : plan.steps) {
        const std::string name = "step " + std::to_string(s.id);
        if (s.id <= 0) problems.push_back(name + ": id must be positive");
        if (!ids.insert(s.id).second) problems.push_back(name + ": duplicate id");
        if (is_blank(s.description)) problems.push_back(name + ": empty description");
        if (!registry.contains(s.assigned_role)) {
            problems.push_back(name + ": unknown role \"" + s.assigned_role + "\" (known: " + join(registry.names(), ", ") + ")");
        }
    }
    bool deps_known = true;
    for (const auto& s : plan.steps) {
        for (int d : s.depends_on) {
            if (d == s.id) {
                problems.push_back("step " + std::to_string(s.id) + " depends on itself");
                deps_known = false;
            } else if (!ids.contains(d)) {
                problems.push_back("step " + std::to_string(s.id) + " depends on unknown step " + std::to_string(d));
                deps_known = false;
            }
        }
    }
    if (deps_known && problems.empty() && execution_order(plan).size() != plan.steps.size()) {
        problems.push_back("step dependencies form a cycle");
    }
    return problems;
}

std::vector<int> execution_order(const Plan& plan) {
    std::vector<int> order;
    std::set<int> placed;
    bool progress = true;
    while (progress && order.size() < plan.steps.size()) {
        progress = false;
        for (const auto& s : plan.steps) {
            if (placed.contains(s.id)) continue;
            const bool ready = std::all_of(s.depends_on.begin(), s.depends_on.end(),
                                           [&](int d) { return placed.contains(d); });
            if (!ready) continue;
            placed.insert(s.id);
            order.push_back(s.id);
            progress = true;
            break;
        }
    }
    return order;
}

std::string render_plan(const Plan& plan, bool with_status) {
    std::string out;
    for (const auto& s : plan.steps) {
        out += std::to_string(s.id) + ". [" + s.assigned_role + "] " + s.description;
        std::vector<std::string> notes;
        if (!s.target_hints.empty()) notes.push_back("targets: " + join(s.target_hints, ", "));
        if (!s.depends_on.empty()) {
            std::vector<std::string> deps;
            for (int d : s.depends_on) deps.push_back(std::to_string(d));
            notes.push_back("after: " + join(deps, ", "));
        }
        if (!notes.empty()) out += " (" + join(notes, "; ") + ")";
        if (with_status) out += " - " + std::string(to_string(s.status));
        out += "\n";
    }
    return out;
}

int attribute_failure(const Plan& plan, const std::vector<int>& order,
                      const std::vector<std::vector<std::string>>& edits_by_step, std::string_view output) {
    for (std::size_t i = 0; i < plan.steps.size(); ++i) {
        std::vector<std::string> files = plan.steps[i].target_hints;
        if (i < edits_by_step.size()) files.insert(files.end(), edits_by_step[i].begin(), edits_by_step[i].end());
        for (const auto& f : files) {
            if (!f.empty() && output.find(f) != std::string_view::npos) return plan.steps[i].id;
        }
    }
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        const auto* s = plan.find(*it);
        if (s && s->status == StepStatus::done) return s->id;
    }
    if (!order.empty()) return order.back();
    return plan.steps.empty() ? 0 : plan.steps.back().id;
}

// ---------------------------------------------------------------------------
// Review

std::string_view to_string(Severity s) noexcept {
    switch (s) {
        case Severity::minor: return "minor";
        case Severity::major: return "major";
        case Severity::blocking: return "blocking";
    }
    return "";
}

std::vector<ReviewSuggestion> suggestions_from_json(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidArgument, std::string("review is not valid JSON: ") + e.what());
    }
    const json* items = nullptr;
    if (doc.is_array()) items = &doc;
    else if (doc.is_object() && doc.contains("suggestions") && doc.at("suggestions").is_array()) items = &doc.at("suggestions");
    else throw Error(ErrorCode::InvalidArgument, "review needs a \"suggestions\" array");

    std::vector<ReviewSuggestion> out;
    for (std::size_t i = 0; i < items->size(); ++i) {
        const auto& item = (*items)[i];
        const std::string where = "suggestions[" + std::to_string(i) + "]";
        auto text_field = [&](const char* key, bool required) -> std::string {
            if (item.contains(key) && item.at(key).is_string()) return item.at(key).get<std::string>();
            if (required) throw Error(ErrorCode::InvalidArgument, where + "." + key + " is missing");
            return {};
        };
        if (!item.is_object()) throw Error(ErrorCode::InvalidArgument, where + " is not an object");
        ReviewSuggestion s;
        const auto severity = text_field("severity", true);
        if (severity == "minor") s.severity = Severity::minor;
        else if (severity == "major") s.severity = Severity::major;
        else if (severity == "blocking") s.severity = Severity::blocking;
        else throw Error(ErrorCode::InvalidArgument, where + ".severity \"" + severity + "\" is not minor, major or blocking");
        s.path = text_field("path", true);
        s.anchor = text_field("anchor", false);
        s.suggestion = text_field("suggestion", true);
        if (item.contains("proposed_edit") && !item.at("proposed_edit").is_null()) {
            const auto& pe = item.at("proposed_edit");
            if (!pe.is_object() || !pe.contains("find") || !pe.at("find").is_string() || !pe.contains("replace") ||
                !pe.at("replace").is_string()) {
                throw Error(ErrorCode::InvalidArgument, where + ".proposed_edit needs find and replace strings");
            }
            s.proposed_edit = ProposedEdit{pe.at("find").get<std::string>(), pe.at("replace").get<std::string>()};
        }
        out.push_back(std::move(s));
    }
    return out;
}

bool auto_applicable(const ReviewSuggestion& s, AutoApply max_severity) noexcept {
    return max_severity == AutoApply::minor && s.severity == Severity::minor && s.proposed_edit &&
           !s.proposed_edit->find.empty();
}

// ---------------------------------------------------------------------------
// Integration

ChangeSet build_change_set(const Snapshot& pre, const Snapshot& post, std::string summary) {
    ChangeSet cs;
    cs.summary = std::move(summary);
    cs.unified_diff = diff_snapshots(pre, post);
    cs.files_touched = changed_paths(pre, post);
    if (apply_patch(pre, cs.unified_diff) != post) {
        throw Error(ErrorCode::DiffReplayMismatch, "applying the change set to the pre-run snapshot does not reproduce the workspace");
    }
    return cs;
}

int RunResult::exit_code() const noexcept {
    if (final_state == OrchestrationState::Done) return 0;
    if (paused) return 3;
    return 2;
}

// ---------------------------------------------------------------------------
// The run

namespace {

constexpr std::string_view kTranslatorPrompt =
    "You are an intent translator. Rewrite the user's request into a structured task specification: "
    "a short title, the clarified goal, numbered subtasks with the files they likely touch, acceptance "
    "checks, and search terms for documentation lookup.\n";

constexpr std::string_view kSpecFormat =
    "Reply with one message whose content is a JSON object with the fields title (string), "
    "clarified_goal (string), subtasks (array of {id, description, suggested_role, target_hints, "
    "depends_on}), acceptance_checks (array of strings) and search_terms (array of strings). Subtask ids "
    "are unique positive integers.\n";

constexpr std::string_view kPlannerPrompt =
    "You are the planner. Turn the task specification into a concrete implementation plan: an ordered "
    "list of steps, each assigned to exactly one of the available roles and mapped to the files it "
    "changes.\n";

constexpr std::string_view kPlanFormat =
    "Reply with one message whose content is a JSON object {\"steps\": [{\"id\": 1, \"description\": "
    "\"...\", \"role\": \"<available role>\", \"depends_on\": [], \"targets\": [\"path\"]}]}.\n";

constexpr std::string_view kReviewFormat =
    "Reply with one message whose content is a JSON object {\"suggestions\": [{\"severity\": "
    "\"minor|major|blocking\", \"path\": \"...\", \"anchor\": \"...\", \"suggestion\": \"...\", "
    "\"proposed_edit\": {\"find\": \"...\", \"replace\": \"...\"}}]}. Use an empty list when the change "
    "needs nothing.\n";

const std::vector<std::string> kSkipDirs = {".git", "node_modules"};

std::optional<std::string> first_message(const provider::ProviderResponse& r) {
    for (const auto& a : r.actions) {
        if (const auto* m = std::get_if<provider::Message>(&a)) return m->content;
    }
    return std::nullopt;
}

std::string snapshot_digest(const Snapshot& snap) {
    std::string acc;
    for (const auto& [path, content] : snap) acc += path + "\n" + sha256_hex(content) + "\n";
    return short_digest(acc);
}

std::string arg_or(const provider::ToolInvocation& call, const std::string& key) {
    auto it = call.args.find(key);
    return it == call.args.end() ? std::string{} : it->second;
}

std::string describe_call(const provider::ToolInvocation& call) {
    for (const char* key : {"path", "pattern", "command"}) {
        auto v = arg_or(call, key);
        if (!v.empty()) return call.tool_name + " " + v;
    }
    return call.tool_name;
}

std::string describe_result(const tools::ToolResult& r) {
    if (r.ok) return "ok";
    return r.error ? "failed (" + std::string(to_string(*r.error)) + ")" : "failed";
}

class Run {
public:
    Run(const RunEnvironment& env, const retrieval::Embedder& embedder, RunResult& result)
        : env_(env), cfg_(env.config), embedder_(embedder), r_(result) {
        r_.transcript = Transcript("", env.clock);
        locks_.set_observer([this](const tools::LockEvent& e) {
            const std::string what =
                std::string(e.kind == tools::LockEvent::Kind::acquire ? "acquire " : "release ") + e.path;
            r_.transcript.append(state_name(), e.holder, EventKind::lock, what, {}, what);
        });
    }

    void execute(std::string_view request, const TaskSpec* given, bool stop_after_plan) {
        try {
            enter(OrchestrationState::Plan);
            setup(request, given);
            spec_ = given ? *given : translate_intent(request);
            if (given) {
                auto problems = context::validate_task_spec(spec_);
                if (!problems.empty()) throw Error(ErrorCode::SpecValidationFailed, join(problems, "; "));
            }
            r_.spec = spec_;
            gather_knowledge();
            build_index();
            initial_snippets_ = retrieve(spec_.clarified_goal + " " + join(spec_.search_terms, " "));
            make_plan();
            if (stop_after_plan) {
                r_.transcript.set_outcome("planned");
                return;
            }

            enter(OrchestrationState::RetrieveContext);
            for (const auto& s : r_.plan.steps) {
                step_snippets_[s.id] = retrieve(s.description + " " + join(s.target_hints, " "));
                note("step " + std::to_string(s.id) + ": " + std::to_string(step_snippets_[s.id].size()) + " snippets");
            }

            enter(OrchestrationState::Delegate);
            for (int id : order_) {
                note("step " + std::to_string(id) + " -> " + r_.plan.find(id)->assigned_role);
            }
            enter(OrchestrationState::Edit);
            for (int id : order_) run_step(id);

            std::size_t repairs = 0;
            while (true) {
                enter(OrchestrationState::Test);
                const auto report = run_validation();
                if (report.passed) break;
                if (repairs >= cfg_.max_test_retries) {
                    fail_plain("tests still failing after " + std::to_string(repairs) + " repair attempt(s)",
                               report.error);
                    return;
                }
                ++repairs;
                enter(OrchestrationState::Delegate);
                repair(repairs);
            }

            enter(OrchestrationState::Review);
            if (!review()) {
                r_.paused = true;
                r_.final_state = OrchestrationState::Review;
                r_.transcript.set_outcome("paused");
                return;
            }

            enter(OrchestrationState::IntegratePR);
            integrate();
            enter(OrchestrationState::Done);
            r_.final_state = OrchestrationState::Done;
            r_.transcript.set_outcome("Done");
        } catch (const Error& e) {
            fail_plain(e.what(), e.code());
        } catch (const std::exception& e) {
            fail_plain(e.what(), std::nullopt);
        }
    }

private:
    std::string state_name() const {
        return sm_.started() ? std::string(to_string(sm_.current())) : std::string("Plan");
    }

    void enter(OrchestrationState s) {
        sm_.enter(s);
        r_.final_state = s;
        const std::string name(to_string(s));
        r_.transcript.append(name, "orchestrator", EventKind::state_enter, name);
    }

    std::uint64_t note(const std::string& text, const std::string& agent = "orchestrator") {
        return r_.transcript.append(state_name(), agent, EventKind::note, text, {}, text);
    }

    void fail_plain(const std::string& message, std::optional<ErrorCode> code) {
        r_.failure = message;
        r_.failure_code = code;
        r_.failure_seq = note(message);
        if (!sm_.started()) enter(OrchestrationState::Plan);
        if (!is_terminal(sm_.current())) enter(OrchestrationState::Failed);
        r_.final_state = OrchestrationState::Failed;
        r_.paused = false;
        r_.transcript.set_outcome("Failed");
    }

    fs::path config_path(const std::string& p) const {
        fs::path path(p);
        return path.is_absolute() ? path : root_ / path;
    }

    void setup(std::string_view request, const TaskSpec* given) {
        if (!env_.provider) throw Error(ErrorCode::ConfigError, "no provider configured");
        workspace_.emplace(env_.repo_root);
        root_ = workspace_->root();
        sandbox_.emplace(*workspace_, locks_,
                         tools::SandboxConfig{cfg_.test_command, std::chrono::seconds(cfg_.test_timeout_seconds)});
        pre_ = take_snapshot(root_, kSkipDirs);
        const std::string basis = given ? context::task_spec_to_json(*given) : std::string(request);
        r_.transcript.set_run_id(short_digest(basis + "\n" + snapshot_digest(pre_)));

        agents::LoadOptions opts;
        opts.extension = cfg_.agent_extension;
        registry_ = agents::load_registry(config_path(cfg_.agents_dir), opts);
        if (registry_.empty()) throw Error(ErrorCode::ConfigError, "no agent profiles in " + cfg_.agents_dir);
        memory_ = context::ProjectMemory::load(root_, cfg_.memory_path);
        note("registry: " + join(registry_.names(), ", "));
    }

    provider::ProviderResponse call(const std::string& agent, const std::string& prompt) {
        const provider::ProviderRequest req{agent, prompt, cfg_.max_output_tokens};
        auto resp = env_.provider->complete(req);
        r_.transcript.append(state_name(), agent, EventKind::provider_call, prompt, resp.usage,
                             "actions=" + std::to_string(resp.actions.size()));
        return resp;
    }

    std::string assemble(const ContextStack& stack, std::string_view role_prompt) const {
        return context::assemble_prompt(stack, role_prompt, cfg_.token_budget_per_agent).text;
    }

    ContextStack base_stack(bool with_knowledge = true) const {
        auto stack = context::new_stack(spec_, memory_);
        if (with_knowledge) {
            const auto docs = knowledge::render_summary(knowledge_);
            for (std::size_t i = 0; i < docs.size(); ++i) {
                stack.add(LayerId::L2, ContextEntry::make(docs[i].tag, docs[i].content, docs.size() - i));
            }
        }
        return stack;
    }

    /// Only snippets whose file still exists are handed out.
    std::vector<retrieval::ScoredSnippet> grounded(const std::vector<retrieval::ScoredSnippet>& in) const {
        std::vector<retrieval::ScoredSnippet> out;
        for (const auto& s : in) {
            std::error_code ec;
            if (fs::is_regular_file(root_ / s.chunk.repo_rel_path, ec)) out.push_back(s);
        }
        return out;
    }

    static void add_snippets(ContextStack& stack, const std::vector<retrieval::ScoredSnippet>& snippets) {
        for (std::size_t i = 0; i < snippets.size(); ++i) {
            const auto& c = snippets[i].chunk;
            const auto range = std::to_string(c.start_line) + "-" + std::to_string(c.end_line);
            std::string header = "// " + c.repo_rel_path + " lines " + range;
            if (!c.symbol_name.empty()) header += " (" + c.symbol_name + ")";
            stack.add(LayerId::L4,
                      ContextEntry::make(c.repo_rel_path + ":" + range, header + "\n" + c.text, snippets.size() - i));
        }
    }

    // -- Plan --------------------------------------------------------------

    TaskSpec translate_intent(std::string_view request) {
        if (is_blank(request)) throw Error(ErrorCode::InvalidArgument, "the request is empty");
        const auto* profile = registry_.find(cfg_.translator_agent);
        const std::string system = profile ? profile->system_prompt : std::string(kTranslatorPrompt);
        const std::string base = system + "\n== Request ==\n" + std::string(request) + "\n\n== Output Format ==\n" +
                                 std::string(kSpecFormat);
        std::vector<std::string> problems;
        for (int attempt = 0; attempt < 2; ++attempt) {
            std::string prompt = base;
            if (attempt > 0) {
                prompt = "SCHEMA REMINDER: the previous reply was rejected: " + join(problems, "; ") +
                         ". Reply with only the JSON object described under Output Format.\n\n" + base;
            }
            const auto resp = call(cfg_.translator_agent, prompt);
            const auto msg = first_message(resp);
            if (!msg) {
                problems = {"the reply contained no message"};
                continue;
            }
            TaskSpec spec;
            try {
                spec = context::task_spec_from_json(*msg);
            } catch (const Error& e) {
                if (e.code() != ErrorCode::SpecValidationFailed) throw;
                problems = {e.detail()};
                continue;
            }
            problems = context::validate_task_spec(spec);
            if (problems.empty()) return spec;
        }
        throw Error(ErrorCode::SpecValidationFailed, join(problems, "; "));
    }

    void gather_knowledge() {
        if (cfg_.corpus_dir.empty()) return;
        auto terms = spec_.search_terms;
        if (terms.empty()) terms.push_back(spec_.title);
        std::vector<knowledge::ExternalDoc> docs;
        try {
            docs = knowledge::search_corpus(config_path(cfg_.corpus_dir), terms, cfg_.knowledge_k, embedder_);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::EmptyCorpus) throw;
            note(e.what());
            return;
        }
        std::vector<std::string> questions;
        for (const auto& t : spec_.search_terms) questions.push_back("What do the documents say about " + t + "?");
        questions.push_back("What are the steps to implement " + spec_.title + "?");
        questions.push_back("What pitfalls or edge cases are noted?");
        knowledge_ = knowledge::synthesize(docs, questions);
        note("knowledge: docs=" + std::to_string(knowledge_.docs.size()) +
             " qa=" + std::to_string(knowledge_.qa_pairs.size()));
    }

    void build_index() {
        index_ = std::make_unique<retrieval::MemoryIndex>(embedder_.dims());
        retrieval::IndexOptions opts;
        opts.skip_dirs = kSkipDirs;
        const auto stats = retrieval::index_repository(root_, *index_, embedder_, opts);
        note("index: files=" + std::to_string(stats.files) + " chunks=" + std::to_string(stats.chunks) +
             " skipped=" + std::to_string(stats.skipped));
    }

    std::vector<retrieval::ScoredSnippet> retrieve(const std::string& text) const {
        if (!index_ || index_->count() == 0 || is_blank(text)) return {};
        const retrieval::RetrievalQuery q{text, cfg_.k_retrieval, retrieval::QueryMode::hybrid};
        return grounded(retrieval::rerank(retrieval::query_index(*index_, embedder_, root_, q), q));
    }

    void make_plan() {
        const auto* planner = registry_.find(cfg_.planner_role);
        const std::string system = planner ? planner->system_prompt : std::string(kPlannerPrompt);
        auto stack = base_stack();
        std::string roles = "Available roles:\n";
        for (const auto& [name, profile] : registry_) {
            if (name == cfg_.planner_role || name == cfg_.reviewer_role || name == cfg_.translator_agent) continue;
            roles += "- " + name + ": " + profile.description + "\n";
        }
        stack.add(LayerId::L1, ContextEntry::make("available-roles", roles));
        stack.add(LayerId::L1, ContextEntry::make("plan-format", std::string(kPlanFormat)));
        add_snippets(stack, grounded(initial_snippets_));

        std::vector<std::string> problems;
        for (int attempt = 0; attempt < 2; ++attempt) {
            std::string role_prompt = system;
            if (attempt > 0) {
                role_prompt += "\nPLAN REMINDER: the previous plan was rejected: " + join(problems, "; ") +
                               ". Assign every step to one of the available roles.\n";
            }
            const auto resp = call(cfg_.planner_role, assemble(stack, role_prompt));
            const auto msg = first_message(resp);
            if (!msg) {
                problems = {"the reply contained no message"};
                continue;
            }
            Plan plan;
            try {
                plan = plan_from_json(*msg);
            } catch (const Error& e) {
                if (e.code() != ErrorCode::PlanValidationFailed) throw;
                problems = {e.detail()};
                continue;
            }
            problems = validate_plan(plan, registry_);
            if (problems.empty()) {
                r_.plan = std::move(plan);
                order_ = execution_order(r_.plan);
                edits_by_step_.assign(r_.plan.steps.size(), {});
                note("plan: " + std::to_string(r_.plan.steps.size()) + " steps");
                return;
            }
        }
        throw Error(ErrorCode::PlanValidationFailed, join(problems, "; "));
    }

    // -- Delegate / Edit ---------------------------------------------------

    std::size_t step_index(int id) const {
        for (std::size_t i = 0; i < r_.plan.steps.size(); ++i) {
            if (r_.plan.steps[i].id == id) return i;
        }
        throw Error(ErrorCode::InvalidArgument, "no step " + std::to_string(id));
    }

    void run_step(int id) {
        auto& step = r_.plan.steps[step_index(id)];
        for (int d : step.depends_on) {
            if (r_.plan.find(d)->status != StepStatus::done) {
                throw Error(ErrorCode::PlanValidationFailed,
                            "step " + std::to_string(id) + " depends on unfinished step " + std::to_string(d));
            }
        }
        step.status = StepStatus::in_progress;
        const auto& profile = registry_.get(step.assigned_role);

        auto stack = base_stack();
        stack.add(LayerId::L1, ContextEntry::make("plan", "Plan:\n" + render_plan(r_.plan)));
        std::string instructions = "Step " + std::to_string(step.id) + " of " +
                                   std::to_string(r_.plan.steps.size()) + " (" + step.assigned_role +
                                   "): " + step.description + "\n";
        if (!step.target_hints.empty()) instructions += "Target files: " + join(step.target_hints, ", ") + "\n";
        instructions += "Work only on this step. Use the tools to read and change files, then finish with done.\n";
        stack.add(LayerId::L1, ContextEntry::make("step", instructions));
        const auto snippets = grounded(step_snippets_[id]);
        add_snippets(stack, snippets);

        const auto outcome = delegate(profile, stack, id, snippets);
        auto& edits = edits_by_step_[step_index(id)];
        for (const auto& e : outcome.edits) {
            if (std::find(edits.begin(), edits.end(), e) == edits.end()) edits.push_back(e);
        }
        if (outcome.status == provider::DoneStatus::blocked) {
            step.status = StepStatus::failed;
            throw Error(ErrorCode::AgentBlocked, "step " + std::to_string(id) + ": " + profile.name +
                                                     " is blocked" + (outcome.note.empty() ? "" : ": " + outcome.note));
        }
        step.status = StepStatus::done;
    }

    StepOutcome delegate(const agents::AgentProfile& profile, ContextStack& stack, int step_id,
                         const std::vector<retrieval::ScoredSnippet>& snippets) {
        r_.delegations.push_back({step_id, profile.name, {}, {}});
        const std::size_t slot = r_.delegations.size() - 1;
        for (const auto& s : snippets) r_.delegations[slot].snippet_paths.push_back(s.chunk.repo_rel_path);

        StepOutcome out;
        tools::LockScope scope(locks_, profile.name);
        auto count_action = [&] {
            if (++out.actions > cfg_.action_cap) {
                throw Error(ErrorCode::ActionCapExceeded, profile.name + " exceeded " + std::to_string(cfg_.action_cap) +
                                                              " actions in step " + std::to_string(step_id));
            }
        };
        while (true) {
            const auto prompt = assemble(stack, profile.system_prompt);
            r_.delegations[slot].prompt_digests.push_back(provider::prompt_digest(prompt));
            const auto resp = call(profile.name, prompt);
            if (resp.actions.empty()) {
                count_action();
                stack.add(LayerId::L5, ContextEntry::make("empty-reply:" + std::to_string(out.actions),
                                                          "(no actions)", out.actions));
                continue;
            }
            for (const auto& action : resp.actions) {
                count_action();
                if (const auto* tool = std::get_if<provider::ToolInvocation>(&action)) {
                    const auto result = invoke_tool(profile, *tool, scope, out);
                    stack.add(LayerId::L5,
                              ContextEntry::make("tool:" + std::to_string(out.actions) + ":" + tool->tool_name,
                                                 describe_call(*tool) + ": " + describe_result(result) + "\n" +
                                                     result.content,
                                                 out.actions));
                } else if (const auto* msg = std::get_if<provider::Message>(&action)) {
                    out.messages.push_back(msg->content);
                    stack.add(LayerId::L5, ContextEntry::make("message:" + std::to_string(out.actions), msg->content,
                                                              out.actions));
                } else {
                    const auto& done = std::get<provider::Done>(action);
                    out.status = done.status;
                    out.note = done.note;
                    note(std::string("done ") + std::string(provider::to_string(done.status)) +
                             (done.note.empty() ? "" : ": " + done.note),
                         profile.name);
                    return out;
                }
            }
        }
    }

    tools::ToolResult invoke_tool(const agents::AgentProfile& profile, const provider::ToolInvocation& call,
                                  tools::LockScope& scope, StepOutcome& out) {
        std::string rel;
        if (tools::is_write_tool(call.tool_name) && profile.allows(call.tool_name)) {
            const auto path = arg_or(call, "path");
            try {
                rel = workspace_->normalize(path);
            } catch (const Error&) {
                rel.clear();  // the sandbox reports the bad path
            }
            if (!rel.empty()) scope.acquire(rel);
        }
        const auto result = sandbox_->invoke(profile, call);
        r_.transcript.append(state_name(), profile.name, EventKind::tool_call, provider::action_to_json(call), {},
                             describe_call(call) + " " + describe_result(result));
        if (result.ok && !rel.empty() && std::find(out.edits.begin(), out.edits.end(), rel) == out.edits.end()) {
            out.edits.push_back(rel);
        }
        return result;
    }

    // -- Test --------------------------------------------------------------

    TestReport run_validation() {
        if (is_blank(cfg_.test_command)) throw Error(ErrorCode::ConfigError, "no test_command configured");
        const auto result = sandbox_->run_tests();
        TestReport rep{result.ok, result.content, result.exit_code, result.error};
        std::string detail = "RunTests ";
        if (rep.exit_code) detail += "exit=" + std::to_string(*rep.exit_code);
        if (rep.error) detail += std::string(rep.exit_code ? " " : "") + std::string(to_string(*rep.error));
        r_.transcript.append(state_name(), "orchestrator", EventKind::tool_call, rep.output, {}, detail);
        r_.test_runs.push_back(rep);
        return rep;
    }

    void repair(std::size_t attempt) {
        const auto& failing = r_.test_runs.back();
        const int owner = attribute_failure(r_.plan, order_, edits_by_step_, failing.output);
        const auto& step = r_.plan.steps[step_index(owner)];
        const auto& profile = registry_.get(step.assigned_role);
        note("test run " + std::to_string(r_.test_runs.size()) + " failed; repair by " + profile.name +
             " (step " + std::to_string(owner) + ")");

        enter(OrchestrationState::Edit);
        auto stack = base_stack();
        stack.add(LayerId::L1, ContextEntry::make("plan", "Plan:\n" + render_plan(r_.plan, true)));
        std::string instructions = "Repair after test run " + std::to_string(r_.test_runs.size()) + " (attempt " +
                                   std::to_string(attempt) + " of " + std::to_string(cfg_.max_test_retries) +
                                   "): the test suite failed. Fix the failure shown in the execution artifacts.\n" +
                                   "Related step " + std::to_string(step.id) + " (" + step.assigned_role +
                                   "): " + step.description + "\n";
        if (!step.target_hints.empty()) instructions += "Target files: " + join(step.target_hints, ", ") + "\n";
        stack.add(LayerId::L1, ContextEntry::make("repair", instructions));
        const auto snippets = grounded(step_snippets_[owner]);
        add_snippets(stack, snippets);
        for (std::size_t i = 0; i < r_.test_runs.size(); ++i) {
            stack.add(LayerId::L5, ContextEntry::make("test-run:" + std::to_string(i + 1),
                                                      "Test run " + std::to_string(i + 1) + " output:\n" +
                                                          r_.test_runs[i].output,
                                                      1000 + i));
        }
        const auto outcome = delegate(profile, stack, 0, snippets);
        auto& edits = edits_by_step_[step_index(owner)];
        for (const auto& e : outcome.edits) {
            if (std::find(edits.begin(), edits.end(), e) == edits.end()) edits.push_back(e);
        }
        if (outcome.status == provider::DoneStatus::blocked) {
            throw Error(ErrorCode::AgentBlocked, "repair by " + profile.name + " is blocked" +
                                                     (outcome.note.empty() ? "" : ": " + outcome.note));
        }
    }

    // -- Review ------------------------------------------------------------

    /// False when blocking suggestions were declined and the run pauses.
    bool review() {
        const auto pre_review = take_snapshot(root_, kSkipDirs);
        const auto diff = diff_snapshots(pre_, pre_review);
        if (diff.empty()) {
            note("empty diff; review skipped");
            return true;
        }
        const auto* reviewer = registry_.find(cfg_.reviewer_role);
        if (!reviewer) {
            const Error e(ErrorCode::ReviewerUnavailable, "no agent profile named " + cfg_.reviewer_role);
            if (!cfg_.skip_review_if_missing) throw e;
            note(std::string(e.what()) + "; review skipped");
            return true;
        }

        auto stack = base_stack(false);
        stack.add(LayerId::L1, ContextEntry::make("plan", "Plan:\n" + render_plan(r_.plan, true)));
        stack.add(LayerId::L1, ContextEntry::make("diff", "Unified diff under review:\n" + diff));
        stack.add(LayerId::L1, ContextEntry::make("review-format", std::string(kReviewFormat)));
        const auto resp = call(reviewer->name, assemble(stack, reviewer->system_prompt));
        const auto msg = first_message(resp);
        if (msg) {
            try {
                r_.suggestions = suggestions_from_json(*msg);
            } catch (const Error& e) {
                throw e.with_context("reviewer reply");
            }
        }
        std::size_t counts[3] = {0, 0, 0};
        for (const auto& s : r_.suggestions) ++counts[static_cast<int>(s.severity)];
        note("suggestions: minor=" + std::to_string(counts[0]) + " major=" + std::to_string(counts[1]) +
                 " blocking=" + std::to_string(counts[2]),
             reviewer->name);

        std::vector<ReviewSuggestion> blocking;
        for (const auto& s : r_.suggestions) {
            if (s.severity == Severity::blocking) blocking.push_back(s);
        }
        if (!blocking.empty()) {
            const bool confirmed = env_.confirm && env_.confirm(blocking);
            if (!confirmed) {
                restore_snapshot(root_, take_snapshot(root_, kSkipDirs), pre_review);
                note("blocking suggestions declined; awaiting confirmation");
                return false;
            }
            note("blocking suggestions acknowledged; continuing");
        }

        std::vector<const ReviewSuggestion*> applicable;
        for (const auto& s : r_.suggestions) {
            if (auto_applicable(s, cfg_.auto_apply_max_severity)) applicable.push_back(&s);
        }
        if (applicable.empty()) return true;

        enter(OrchestrationState::Edit);
        tools::LockScope scope(locks_, "orchestrator");
        for (const auto* s : applicable) {
            const provider::ToolInvocation edit{"Edit",
                                                {{"path", s->path},
                                                 {"find", s->proposed_edit->find},
                                                 {"replace", s->proposed_edit->replace}}};
            tools::ToolResult result;
            try {
                scope.acquire(workspace_->normalize(s->path));
                result = sandbox_->invoke_as("orchestrator", edit);
            } catch (const Error& e) {
                result = {false, e.what(), std::nullopt, e.code()};
            }
            r_.transcript.append(state_name(), "orchestrator", EventKind::tool_call, provider::action_to_json(edit),
                                 {}, describe_call(edit) + " " + describe_result(result));
            if (result.ok) ++r_.applied_suggestions;
            else note("suggestion for " + s->path + " not applied: " + result.content);
        }
        return true;
    }

    // -- IntegratePR -------------------------------------------------------

    void integrate() {
        const auto post = take_snapshot(root_, kSkipDirs);
        const auto files = changed_paths(pre_, post);
        std::string summary = spec_.title + "\n\nSteps:\n" + render_plan(r_.plan, true);
        std::size_t passed = 0;
        for (const auto& t : r_.test_runs) passed += t.passed ? 1 : 0;
        summary += "\nTest runs: " + std::to_string(r_.test_runs.size()) + " (" + std::to_string(passed) + " passed)\n";
        summary += "Review suggestions: " + std::to_string(r_.suggestions.size()) + " (" +
                   std::to_string(r_.applied_suggestions) + " applied)\n";
        for (const auto& s : r_.suggestions) {
            summary += "- [" + std::string(to_string(s.severity)) + "] " + s.path + ": " + s.suggestion + "\n";
        }
        summary += "\nFiles touched:\n";
        for (const auto& f : files) summary += "- " + f + "\n";
        r_.change_set = build_change_set(pre_, post, std::move(summary));
        note("change set: files=" + std::to_string(r_.change_set->files_touched.size()));
        if (locks_.size() != 0) {
            throw Error(ErrorCode::LockConflict, std::to_string(locks_.size()) + " lock(s) still held at integration");
        }
    }

    const RunEnvironment& env_;
    const RunConfig& cfg_;
    const retrieval::Embedder& embedder_;
    RunResult& r_;

    StateMachine sm_;
    fs::path root_;
    tools::FileLockTable locks_;
    std::optional<tools::Workspace> workspace_;
    std::optional<tools::Sandbox> sandbox_;
    agents::Registry registry_;
    context::ProjectMemory memory_;
    TaskSpec spec_;
    knowledge::KnowledgeSummary knowledge_;
    std::unique_ptr<retrieval::MemoryIndex> index_;
    std::vector<retrieval::ScoredSnippet> initial_snippets_;
    std::map<int, std::vector<retrieval::ScoredSnippet>> step_snippets_;
    std::vector<int> order_;
    std::vector<std::vector<std::string>> edits_by_step_;
    Snapshot pre_;
};

}  // namespace

Orchestrator::Orchestrator(RunEnvironment env) : env_(std::move(env)) {}

RunResult Orchestrator::run(std::string_view request, const TaskSpec* spec, bool stop_after_plan) {
    RunResult result;
    const retrieval::Embedder& embedder = env_.embedder ? *env_.embedder : default_embedder_;
    Run(env_, embedder, result).execute(request, spec, stop_after_plan);
    return result;
}

RunResult Orchestrator::run_task(std::string_view user_request) { return run(user_request, nullptr, false); }

RunResult Orchestrator::run_spec(const TaskSpec& spec) { return run({}, &spec, false); }

RunResult Orchestrator::plan_only(std::string_view user_request) { return run(user_request, nullptr, true); }

RunResult Orchestrator::plan_only(const TaskSpec& spec) { return run({}, &spec, true); }

}  // namespace ctxeng::orchestrator
