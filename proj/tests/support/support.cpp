#include "support.hpp"

#include <stdlib.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "ctxeng/error.hpp"
#include "ctxeng/run_config.hpp"
#include "ctxeng/tools.hpp"

#ifndef CTXENG_TESTS_DIR
#error "CTXENG_TESTS_DIR must point at the tests/ source directory"
#endif

namespace ctxeng::testing {

using orchestrator::OrchestrationState;
using orchestrator::Severity;

fs::path source_dir() { return fs::path(CTXENG_TESTS_DIR); }
fs::path scenario_dir(std::string_view name) { return source_dir() / "scenarios" / std::string(name); }
fs::path knowledge_corpus_dir() { return source_dir() / "data" / "knowledge"; }

TempDir::TempDir(std::string_view prefix) {
    std::string tmpl = (fs::temp_directory_path() / (std::string(prefix) + "-XXXXXX")).string();
    if (!mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed for " + tmpl);
    path_ = fs::canonical(tmpl);
}

TempDir::~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
}

void copy_tree(const fs::path& from, const fs::path& to) {
    fs::create_directories(to);
    fs::copy(from, to, fs::copy_options::recursive | fs::copy_options::copy_symlinks |
                           fs::copy_options::overwrite_existing);
}

void put_file(const fs::path& path, std::string_view content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw std::runtime_error("cannot write " + path.string());
}

void write_files(const fs::path& root, const std::map<std::string, std::string>& files) {
    for (const auto& [rel, content] : files) put_file(root / rel, content);
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::map<std::string, std::string> read_tree(const fs::path& root) {
    std::map<std::string, std::string> out;
    if (!fs::exists(root)) return out;
    for (auto it = fs::recursive_directory_iterator(root); it != fs::recursive_directory_iterator(); ++it) {
        if (it->is_directory() && !it->is_symlink() && it->path().filename() == ".git") {
            it.disable_recursion_pending();
            continue;
        }
        if (it->is_symlink() || !it->is_regular_file()) continue;
        out[it->path().lexically_relative(root).generic_string()] = slurp(it->path());
    }
    return out;
}

// ---------------------------------------------------------------------------

RawTotals sum_transcript_json(std::string_view serialized) {
    RawTotals t;
    std::istringstream in{std::string(serialized)};
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto j = nlohmann::json::parse(line);
        if (j.at("record") != "event") continue;
        t.input_tokens += j.at("token_usage").at("input_tokens").get<std::size_t>();
        t.output_tokens += j.at("token_usage").at("output_tokens").get<std::size_t>();
        if (j.at("event_kind") == "provider_call") ++t.messages;
    }
    return t;
}

namespace {

std::string first_difference(const std::map<std::string, std::string>& got,
                             const std::map<std::string, std::string>& want) {
    for (const auto& [path, content] : want) {
        auto it = got.find(path);
        if (it == got.end()) return "missing " + path;
        if (it->second != content) return "content differs in " + path;
    }
    for (const auto& [path, content] : got) {
        if (!want.count(path)) return "unexpected file " + path;
    }
    return {};
}

std::string shell_quote(const std::string& s) {
    std::string out = "'";
    for (char c : s) {
        if (c == '\'') out += "'\\''";
        else out += c;
    }
    return out + "'";
}

std::string capture(const std::string& command) {
    std::string out;
    FILE* pipe = popen(command.c_str(), "r");
    if (!pipe) return "popen failed";
    char buf[512];
    while (std::fgets(buf, sizeof buf, pipe)) out += buf;
    const int status = pclose(pipe);
    if (status != 0) out += "\n(exit status " + std::to_string(status) + ")";
    return status == 0 ? std::string{} : out;
}

}  // namespace

std::string gnu_patch_check(const std::map<std::string, std::string>& pre, const std::string& diff,
                            const std::map<std::string, std::string>& post) {
    TempDir tmp("ctxeng-patch");
    const auto tree = tmp / "tree";
    fs::create_directories(tree);
    write_files(tree, pre);
    if (!diff.empty()) {
        put_file(tmp / "change.patch", diff);
        const auto failure = capture("cd " + shell_quote(tree.string()) +
                                     " && patch -p1 -s -f --no-backup-if-mismatch < ../change.patch 2>&1");
        if (!failure.empty()) return "patch failed: " + failure;
    }
    // A new empty file is a hunkless header that GNU patch skips.
    auto want = post;
    std::erase_if(want, [&](const auto& kv) { return kv.second.empty() && !pre.count(kv.first); });
    auto got = read_tree(tree);
    std::erase_if(got, [&](const auto& kv) { return kv.second.empty() && !pre.count(kv.first); });
    return first_difference(got, want);
}

std::string line_slice(std::string_view text, std::size_t start, std::size_t end) {
    std::string out;
    std::size_t line = 1;
    std::size_t i = 0;
    while (i < text.size() && line <= end) {
        const auto nl = text.find('\n', i);
        const auto stop = nl == std::string_view::npos ? text.size() : nl + 1;
        if (line >= start) out.append(text.substr(i, stop - i));
        i = stop;
        ++line;
    }
    return out;
}

std::string tiling_problem(const std::vector<retrieval::CodeChunk>& chunks, std::string_view text) {
    std::size_t lines = static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
    if (!text.empty() && text.back() != '\n') ++lines;
    if (lines == 0) return chunks.empty() ? std::string{} : "chunks for an empty file";
    if (chunks.empty()) return "no chunks";
    std::size_t expect = 1;
    std::string joined;
    for (const auto& c : chunks) {
        if (c.start_line != expect) {
            return "chunk starts at " + std::to_string(c.start_line) + ", expected " + std::to_string(expect);
        }
        if (c.end_line < c.start_line) return "chunk ends before it starts at line " + std::to_string(c.start_line);
        if (c.text != line_slice(text, c.start_line, c.end_line)) {
            return "chunk text differs from lines " + std::to_string(c.start_line) + "-" + std::to_string(c.end_line);
        }
        joined += c.text;
        expect = c.end_line + 1;
    }
    if (expect != lines + 1) {
        return "chunks end at line " + std::to_string(expect - 1) + " of " + std::to_string(lines);
    }
    if (joined != text) return "concatenated chunk text differs from the file";
    return {};
}

namespace {

std::set<std::string> identifiers(std::string_view text) {
    std::set<std::string> out;
    std::string cur;
    auto flush = [&] {
        if (cur.size() >= 2) out.insert(cur);
        cur.clear();
    };
    for (char ch : text) {
        const auto c = static_cast<unsigned char>(ch);
        const bool alpha = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_';
        const bool digit = c >= '0' && c <= '9';
        if (alpha || (digit && !cur.empty())) {
            cur += static_cast<char>(std::tolower(c));
        } else {
            flush();
        }
    }
    flush();
    return out;
}

}  // namespace

std::vector<OracleScore> oracle_rank(const std::vector<retrieval::IndexRecord>& records, const fs::path& repo_root,
                                     const retrieval::Embedder& embedder, std::string_view query) {
    std::map<std::string, std::string> files;
    std::vector<std::set<std::string>> ids;
    std::map<std::string, std::size_t> df;
    for (const auto& r : records) {
        if (!files.count(r.repo_rel_path)) files[r.repo_rel_path] = slurp(repo_root / r.repo_rel_path);
        ids.push_back(identifiers(line_slice(files[r.repo_rel_path], r.start_line, r.end_line)));
        for (const auto& t : ids.back()) ++df[t];
    }
    const auto q = embedder.embed(query);
    double qn = 0.0;
    for (float x : q) qn += static_cast<double>(x) * x;
    const auto qids = identifiers(query);
    const double n = static_cast<double>(records.size());

    std::vector<OracleScore> out;
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        double dot = 0.0, rn = 0.0;
        for (std::size_t d = 0; d < q.size(); ++d) {
            dot += static_cast<double>(q[d]) * r.vector[d];
            rn += static_cast<double>(r.vector[d]) * r.vector[d];
        }
        const double cos = (qn == 0.0 || rn == 0.0) ? 0.0 : dot / (std::sqrt(qn) * std::sqrt(rn));
        double num = 0.0, den = 0.0;
        for (const auto& t : qids) {
            const double idf = std::log(1.0 + n / (1.0 + static_cast<double>(df.count(t) ? df[t] : 0)));
            den += idf;
            if (ids[i].count(t)) num += idf;
        }
        const double lex = den > 0.0 ? num / den : 0.0;
        out.push_back({r.chunk_id, r.repo_rel_path, r.start_line, cos, lex, 0.7 * std::max(cos, 0.0) + 0.3 * lex});
    }
    std::sort(out.begin(), out.end(), [](const OracleScore& a, const OracleScore& b) {
        if (a.final_score != b.final_score) return a.final_score > b.final_score;
        if (a.path != b.path) return a.path < b.path;
        if (a.start_line != b.start_line) return a.start_line < b.start_line;
        return a.chunk_id < b.chunk_id;
    });
    return out;
}

std::string lock_problem(const orchestrator::Transcript& transcript) {
    std::map<std::string, std::string> held;
    for (const auto& e : transcript.events()) {
        if (e.kind != orchestrator::EventKind::lock) continue;
        const auto space = e.detail.find(' ');
        if (space == std::string::npos) return "malformed lock event " + std::to_string(e.seq);
        const auto verb = e.detail.substr(0, space);
        const auto path = e.detail.substr(space + 1);
        if (verb == "acquire") {
            if (held.count(path)) {
                return "event " + std::to_string(e.seq) + ": " + e.agent_name + " acquired " + path + " held by " +
                       held[path];
            }
            held[path] = e.agent_name;
        } else if (verb == "release") {
            auto it = held.find(path);
            if (it == held.end() || it->second != e.agent_name) {
                return "event " + std::to_string(e.seq) + ": " + e.agent_name + " released " + path +
                       " without holding it";
            }
            held.erase(it);
        } else {
            return "unknown lock verb at event " + std::to_string(e.seq);
        }
    }
    if (!held.empty()) return "leaked lock on " + held.begin()->first + " held by " + held.begin()->second;
    return {};
}

// ---------------------------------------------------------------------------

namespace {

std::size_t pick(std::mt19937_64& rng, std::size_t n) { return static_cast<std::size_t>(rng() % n); }
bool chance(std::mt19937_64& rng, double p) { return std::uniform_real_distribution<double>(0, 1)(rng) < p; }

std::string word(std::mt19937_64& rng) {
    static const char* words[] = {"alpha", "beta", "gamma", "delta", "value", "count", "item", "node",
                                  "state", "buffer", "index", "total", "left", "right", "parse", "emit"};
    return words[pick(rng, std::size(words))];
}

void brace_function(std::mt19937_64& rng, retrieval::LanguageId lang, int id, std::ostringstream& out) {
    using L = retrieval::LanguageId;
    const auto name = word(rng) + std::to_string(id);
    switch (lang) {
        case L::c:
        case L::cpp: out << "static int " << name << "(int a, int b)\n{\n"; break;
        case L::java: out << "public class " << name << " {\n    int run(int a) {\n"; break;
        case L::javascript: out << "function " << name << "(a, b) {\n"; break;
        case L::typescript:
            out << (chance(rng, 0.5) ? "export const " + name + " = (a: number): number => {\n"
                                     : "export function " + name + "(a: number): number {\n");
            break;
        case L::go: out << "func " << name << "(a int) int {\n"; break;
        case L::rust: out << "pub fn " << name << "(a: i32) -> i32 {\n"; break;
        case L::python: break;
    }
    const auto body = 1 + pick(rng, 5);
    for (std::size_t i = 0; i < body; ++i) {
        switch (pick(rng, 6)) {
            case 0: out << "    if (a > " << i << ") {\n        a -= 1;\n    }\n"; break;
            case 1: out << "    // closing } in a comment\n"; break;
            case 2:
                out << (lang == L::rust || lang == L::go ? "    let s = \"{ not a brace\";\n"
                                                         : "    const char* s = \"} not a brace {\";\n");
                break;
            case 3: out << "\n"; break;
            case 4: out << "    /* { block\n       comment } */\n"; break;
            default: out << "    a = a + " << i << ";\n"; break;
        }
    }
    if (lang == L::java) out << "        return a;\n    }\n";
    out << "    return a;\n}\n";
}

void brace_type(std::mt19937_64& rng, retrieval::LanguageId lang, int id, std::ostringstream& out) {
    using L = retrieval::LanguageId;
    const auto name = "T" + word(rng) + std::to_string(id);
    switch (lang) {
        case L::c:
        case L::cpp: out << "struct " << name << " {\n    int x;\n    int y;\n};\n"; break;
        case L::java: out << "interface " << name << " {\n    void run();\n}\n"; break;
        case L::javascript: out << "class " << name << " {\n  constructor() {\n    this.x = 1;\n  }\n}\n"; break;
        case L::typescript:
            out << (chance(rng, 0.5) ? "export interface " + name + " {\n  x: number;\n}\n"
                                     : "export type " + name + " = 'a' | 'b';\n");
            break;
        case L::go: out << "type " << name << " struct {\n\tX int\n}\n"; break;
        case L::rust: out << "pub struct " << name << " {\n    x: i32,\n}\n"; break;
        case L::python: break;
    }
}

std::string python_source(std::mt19937_64& rng) {
    std::ostringstream out;
    const auto items = 1 + pick(rng, 10);
    for (std::size_t i = 0; i < items; ++i) {
        switch (pick(rng, 8)) {
            case 0:
            case 1:
                if (chance(rng, 0.3)) out << "@decorator\n";
                out << "def " << word(rng) << i << "(a, b=(1,\n        2)):\n    return a\n";
                break;
            case 2: out << "class C" << i << ":\n    def m(self):\n        return 1\n\n    x = 2\n"; break;
            case 3: out << "# comment " << i << "\n"; break;
            case 4: out << "\n\n"; break;
            case 5: out << "DOC = \"\"\"\ndef not_a_function():\n\"\"\"\n"; break;
            case 6: out << "import os\nvalue = [\n    1,\n]\n"; break;
            default:
                if (chance(rng, 0.15)) out << "    stray_indent = 1\n";
                else out << "total = " << i << "\n";
                break;
        }
    }
    if (chance(rng, 0.2)) {
        auto s = out.str();
        if (!s.empty() && s.back() == '\n') s.pop_back();
        return s;
    }
    return out.str();
}

}  // namespace

std::string random_source(std::mt19937_64& rng, retrieval::LanguageId language) {
    if (language == retrieval::LanguageId::python) return python_source(rng);
    std::ostringstream out;
    const auto items = pick(rng, 12);
    for (std::size_t i = 0; i < items; ++i) {
        const int id = static_cast<int>(i);
        switch (pick(rng, 10)) {
            case 0:
            case 1:
            case 2: brace_function(rng, language, id, out); break;
            case 3:
            case 4: brace_type(rng, language, id, out); break;
            case 5: out << "// header comment " << i << "\n"; break;
            case 6: out << "\n\n\n"; break;
            case 7:
                out << (language == retrieval::LanguageId::c || language == retrieval::LanguageId::cpp
                            ? "#include <stdio.h>\n#define BRACE {\n"
                            : "import x from 'y';\n");
                break;
            case 8: out << "const int k" << i << " = 3;\n"; break;
            default:
                if (chance(rng, 0.25)) out << (chance(rng, 0.5) ? "}\n" : "{\n");
                else out << "/* multi\n   line */\n";
                break;
        }
    }
    auto s = out.str();
    if (chance(rng, 0.2) && !s.empty() && s.back() == '\n') s.pop_back();
    return s;
}

std::map<std::string, std::string> function_corpus(std::size_t n, std::string_view planted, std::size_t planted_at) {
    static const char* verbs[] = {"load", "save", "parse", "render", "merge", "split", "count", "filter", "sort",
                                  "validate"};
    static const char* nouns[] = {"invoice", "customer", "session", "ledger", "widget"};
    std::map<std::string, std::string> files;
    for (std::size_t i = 0; i < n; ++i) {
        const std::string verb = verbs[i % std::size(verbs)];
        const std::string noun = nouns[(i / std::size(verbs)) % std::size(nouns)];
        const auto name = verb + "_" + noun + "_" + std::to_string(i);
        const std::string extra = i == planted_at ? std::string(planted) : "step" + std::to_string(i * 7 % 13);
        switch (i % 3) {
            case 0:
                files["src/mod" + std::to_string(i % 4) + ".ts"] +=
                    "export function " + name + "(input: " + noun + "Record): number {\n  const " + extra +
                    " = input." + noun + "Total;\n  return " + extra + " * " + std::to_string(i + 2) + ";\n}\n\n";
                break;
            case 1:
                files["pkg/mod" + std::to_string(i % 4) + ".py"] += "def " + name + "(" + noun + "_rows):\n    " +
                                                                    extra + " = [r for r in " + noun +
                                                                    "_rows if r." + verb + "]\n    return len(" +
                                                                    extra + ")\n\n\n";
                break;
            default:
                files["lib/mod" + std::to_string(i % 4) + ".cpp"] +=
                    "int " + name + "(const " + noun + "& value) {\n    int " + extra + " = value." + verb +
                    "();\n    return " + extra + " + " + std::to_string(i) + ";\n}\n\n";
                break;
        }
    }
    return files;
}

std::string fuzz_path(std::mt19937_64& rng) {
    static const std::vector<std::string> parts = {
        "..", ".", "sub", "file.txt", "link_out", "link_abs", "link_in", "outside", "secret.txt",
        "", "...", "a b", "%2e%2e", "~", "..\\..", "sub/up", "new", "x.txt", std::string(300, 'x'),
        "sub/..", "sub/../..", "link_out/secret.txt", "-rf", "*", "?", "\xc3\xa9", std::string("nul\0x", 5)};
    std::string p;
    switch (pick(rng, 10)) {
        case 0: p = "/"; break;
        case 1: p = "/etc/"; break;
        case 2: p = "//"; break;
        case 3: p = "./"; break;
        default: break;
    }
    const auto n = 1 + pick(rng, 6);
    for (std::size_t i = 0; i < n; ++i) {
        if (i > 0) p += chance(rng, 0.1) ? "//" : "/";
        p += parts[pick(rng, parts.size())];
    }
    return p;
}

// ---------------------------------------------------------------------------

provider::AgentAction write_action(std::string path, std::string content) {
    return provider::ToolInvocation{"Write", {{"path", std::move(path)}, {"content", std::move(content)}}};
}

provider::AgentAction edit_action(std::string path, std::string find, std::string replace) {
    return provider::ToolInvocation{
        "Edit", {{"path", std::move(path)}, {"find", std::move(find)}, {"replace", std::move(replace)}}};
}

provider::AgentAction read_action(std::string path) {
    return provider::ToolInvocation{"Read", {{"path", std::move(path)}}};
}

provider::AgentAction message_action(std::string content) { return provider::Message{std::move(content)}; }

provider::AgentAction done_action(bool blocked, std::string note) {
    return provider::Done{blocked ? provider::DoneStatus::blocked : provider::DoneStatus::complete, std::move(note)};
}

provider::FixtureEntry fixture(std::string agent, std::string contains, std::vector<provider::AgentAction> actions) {
    provider::FixtureEntry e;
    e.match.agent_name = std::move(agent);
    e.match.prompt_substring = std::move(contains);
    e.response.actions = std::move(actions);
    return e;
}

std::string agent_file(std::string_view name, std::string_view description, std::string_view tools) {
    std::string s = "name: " + std::string(name) + "\ndescription: " + std::string(description) + "\n";
    if (!tools.empty()) s += "tools: " + std::string(tools) + "\n";
    return s + "\nYou are " + std::string(name) + ".\n";
}

CustomBlockRun run_customblock(const fs::path& work) {
    const auto scenario = scenario_dir("customblock");
    const auto repo = work / "repo";
    copy_tree(scenario / "repo", repo);
    orchestrator::RunEnvironment env;
    env.repo_root = repo;
    env.config = orchestrator::load_run_config(scenario / "run.yaml");
    provider::ScriptedProvider scripted(provider::load_fixture(scenario / "script.jsonl"));
    env.provider = &scripted;

    CustomBlockRun run;
    run.pre = read_tree(repo);
    auto task = slurp(scenario / "task.txt");
    while (!task.empty() && (task.back() == '\n' || task.back() == ' ')) task.pop_back();
    const auto t0 = std::chrono::steady_clock::now();
    run.result = orchestrator::Orchestrator(env).run_task(task);
    run.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    run.post = read_tree(repo);
    return run;
}

// ---------------------------------------------------------------------------

SoundnessCase make_soundness_case(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    SoundnessCase c;
    c.seed = seed;
    c.retries = pick(rng, 4);
    for (std::size_t i = 0; i <= c.retries; ++i) c.test_passes.push_back(chance(rng, 0.45));
    c.invalid_plan = chance(rng, 0.05);
    c.blocked_step = !c.invalid_plan && chance(rng, 0.05);
    c.steps = 1 + pick(rng, 3);
    const auto n = pick(rng, 4);
    for (std::size_t i = 0; i < n; ++i) {
        c.severities.push_back(static_cast<Severity>(pick(rng, 3)));
        c.with_edit.push_back(chance(rng, 0.6));
    }
    c.confirm = chance(rng, 0.5);
    return c;
}

namespace {

void write_small_repo(const fs::path& repo, bool with_reviewer) {
    std::map<std::string, std::string> files = {
        {"PROJECT.md", "# Scenario\nSmall repository for orchestration checks.\n"},
        {"src/app.py", "def main():\n    return helper(1)\n\n\ndef helper(x):\n    return x + 1\n"},
        {"agents/dev-a.agent", agent_file("dev-a", "Implements application features", "Read, Write, Edit")},
        {"agents/dev-b.agent", agent_file("dev-b", "Implements data and storage changes", "Read, Write, Edit")},
        {"agents/planner.agent", agent_file("planner", "Plans work", "Read")},
    };
    if (with_reviewer) files["agents/code-reviewer.agent"] = agent_file("code-reviewer", "Reviews diffs", "Read, Grep");
    write_files(repo, files);
}

context::TaskSpec small_spec(const std::string& title) {
    context::TaskSpec spec;
    spec.title = title;
    spec.clarified_goal = "Make the scripted change to the repository.";
    spec.subtasks.push_back({1, "Make the change", "dev-a", {}, {}});
    spec.acceptance_checks = {"the test command exits 0"};
    spec.search_terms = {"helper"};
    return spec;
}

std::string plan_json(const std::vector<std::pair<std::string, std::string>>& steps, bool chain) {
    nlohmann::json arr = nlohmann::json::array();
    for (std::size_t i = 0; i < steps.size(); ++i) {
        nlohmann::json deps = nlohmann::json::array();
        if (chain && i > 0) deps.push_back(i);
        arr.push_back({{"id", i + 1},
                       {"description", "Scripted step " + std::to_string(i + 1)},
                       {"role", steps[i].first},
                       {"depends_on", deps},
                       {"targets", nlohmann::json::array({steps[i].second})}});
    }
    return nlohmann::json{{"steps", arr}}.dump();
}

std::size_t test_to_delegate(const std::vector<OrchestrationState>& path) {
    std::size_t n = 0;
    for (std::size_t i = 1; i < path.size(); ++i) {
        if (path[i - 1] == OrchestrationState::Test && path[i] == OrchestrationState::Delegate) ++n;
    }
    return n;
}

}  // namespace

ScenarioOutcome run_soundness_case(const SoundnessCase& c, const fs::path& work) {
    std::mt19937_64 rng(c.seed ^ 0x9e3779b97f4a7c15ULL);
    const auto repo = work / "repo";
    write_small_repo(repo, true);
    std::string outcomes;
    for (bool p : c.test_passes) outcomes += p ? "pass\n" : "fail\n";
    write_files(work, {{"outcomes", outcomes},
                       {"judge.sh",
                        "n=$(cat ../count 2>/dev/null || echo 0)\n"
                        "n=$((n+1))\n"
                        "echo $n > ../count\n"
                        "r=$(sed -n \"${n}p\" ../outcomes)\n"
                        "echo \"judge run $n: $r\"\n"
                        "[ \"$r\" = pass ]\n"}});

    std::vector<provider::FixtureEntry> entries;
    std::vector<std::pair<std::string, std::string>> steps;
    for (std::size_t i = 0; i < c.steps; ++i) {
        steps.emplace_back(chance(rng, 0.5) ? "dev-a" : "dev-b", "notes/step" + std::to_string(i + 1) + ".txt");
    }
    if (c.invalid_plan) {
        auto bad = steps;
        bad[0].first = "ghost";
        entries.push_back(fixture("planner", "available-roles", {message_action(plan_json(bad, false))}));
        entries.push_back(fixture("planner", "PLAN REMINDER", {message_action(plan_json(bad, false))}));
    } else {
        entries.push_back(fixture("planner", "available-roles", {message_action(plan_json(steps, true))}));
    }
    const std::size_t blocked_at = c.blocked_step ? pick(rng, c.steps) : c.steps;
    for (std::size_t i = 0; i < c.steps; ++i) {
        const auto n = std::to_string(i + 1);
        entries.push_back(fixture(steps[i].first, "Step " + n + " of " + std::to_string(c.steps),
                                  {write_action(steps[i].second, "step " + n + " line\nvalue = " +
                                                                      std::to_string(rng() % 1000) + "\n"),
                                   done_action(i == blocked_at, i == blocked_at ? "missing credentials" : "ok")}));
    }
    for (std::size_t a = 1; a <= c.retries; ++a) {
        const auto n = std::to_string(a);
        entries.push_back(fixture("", "Repair after test run " + n,
                                  {write_action("notes/repair" + n + ".txt", "repair " + n + "\n"), done_action()}));
    }
    nlohmann::json sugg = nlohmann::json::array();
    for (std::size_t i = 0; i < c.severities.size(); ++i) {
        nlohmann::json s = {{"severity", std::string(orchestrator::to_string(c.severities[i]))},
                            {"path", "notes/step1.txt"},
                            {"anchor", "step 1 line"},
                            {"suggestion", "suggestion " + std::to_string(i)}};
        if (c.with_edit[i]) {
            const bool present = chance(rng, 0.7);
            s["proposed_edit"] = {{"find", present ? "step 1 line" : "no such text"},
                                  {"replace", "step 1 line (reviewed)"}};
        }
        sugg.push_back(s);
    }
    entries.push_back(
        fixture("code-reviewer", "review-format", {message_action(nlohmann::json{{"suggestions", sugg}}.dump())}));

    provider::ScriptedProvider scripted(std::move(entries));
    orchestrator::RunEnvironment env;
    env.repo_root = repo;
    env.config.test_command = "sh ../judge.sh";
    env.config.test_timeout_seconds = 20;
    env.config.max_test_retries = c.retries;
    env.config.k_retrieval = 2;
    env.provider = &scripted;
    const bool confirm = c.confirm;
    env.confirm = [confirm](const std::vector<orchestrator::ReviewSuggestion>&) { return confirm; };

    ScenarioOutcome out;
    out.result = orchestrator::Orchestrator(env).run_spec(small_spec("Scenario " + std::to_string(c.seed)));
    const auto& r = out.result;

    // Independent expectation.
    std::string expect_outcome;
    std::size_t expect_repairs = 0;
    std::size_t expect_runs = 0;
    if (c.invalid_plan || c.blocked_step) {
        expect_outcome = "Failed";
    } else {
        std::size_t k = 0;
        while (k <= c.retries && !c.test_passes[k]) ++k;
        if (k > c.retries) {
            expect_outcome = "Failed";
            expect_repairs = c.retries;
            expect_runs = c.retries + 1;
        } else {
            expect_repairs = k;
            expect_runs = k + 1;
            const bool blocking =
                std::find(c.severities.begin(), c.severities.end(), Severity::blocking) != c.severities.end();
            expect_outcome = blocking && !c.confirm ? "paused" : "Done";
        }
    }

    auto fail = [&](const std::string& what) {
        out.problem = "seed " + std::to_string(c.seed) + ": " + what;
        return out;
    };
    std::vector<OrchestrationState> path;
    try {
        path = r.transcript.state_path();
    } catch (const Error& e) {
        return fail(e.what());
    }
    const auto check = orchestrator::check_state_path(path, r.paused);
    if (!check.valid) return fail("invalid state path: " + check.problem);
    const auto loops = test_to_delegate(path);
    if (loops > c.retries) return fail("retry bound exceeded: " + std::to_string(loops));
    if (loops != check.test_to_delegate) return fail("Test->Delegate count disagrees with check_state_path");
    const auto last = path.back();
    const bool terminal_ok = last == OrchestrationState::Done || last == OrchestrationState::Failed ||
                             (r.paused && last == OrchestrationState::Review);
    if (!terminal_ok) return fail("run ended in " + std::string(orchestrator::to_string(last)));
    if (auto lp = lock_problem(r.transcript); !lp.empty()) return fail(lp);
    if (r.transcript.outcome() != expect_outcome) {
        return fail("outcome " + r.transcript.outcome() + ", expected " + expect_outcome +
                    (r.failure.empty() ? "" : " (" + r.failure + ")"));
    }
    if (loops != expect_repairs) {
        return fail(std::to_string(loops) + " repairs, expected " + std::to_string(expect_repairs));
    }
    if (r.test_runs.size() != expect_runs) {
        return fail(std::to_string(r.test_runs.size()) + " test runs, expected " + std::to_string(expect_runs));
    }
    const int expect_exit = expect_outcome == "Done" ? 0 : expect_outcome == "paused" ? 3 : 2;
    if (r.exit_code() != expect_exit) return fail("exit code " + std::to_string(r.exit_code()));
    return out;
}

ScenarioOutcome run_shared_file_scenario(const fs::path& work) {
    const auto repo = work / "repo";
    write_small_repo(repo, false);
    write_files(repo, {{"src/shared.ts", "export const first = 1;\nexport const second = 2;\n"}});
    std::vector<provider::FixtureEntry> entries = {
        fixture("planner", "available-roles",
                {message_action(plan_json({{"dev-a", "src/shared.ts"}, {"dev-b", "src/shared.ts"}}, false))}),
        fixture("dev-a", "Step 1 of 2",
                {edit_action("src/shared.ts", "first = 1", "first = 10"), done_action()}),
        fixture("dev-b", "Step 2 of 2",
                {edit_action("src/shared.ts", "second = 2", "second = 20"), done_action()}),
    };
    provider::ScriptedProvider scripted(std::move(entries));
    orchestrator::RunEnvironment env;
    env.repo_root = repo;
    env.config.test_command = "true";
    env.provider = &scripted;

    ScenarioOutcome out;
    out.result = orchestrator::Orchestrator(env).run_spec(small_spec("Shared file"));
    const auto& r = out.result;
    if (r.final_state != OrchestrationState::Done) {
        out.problem = "run ended in " + std::string(orchestrator::to_string(r.final_state)) + ": " + r.failure;
        return out;
    }
    if (auto lp = lock_problem(r.transcript); !lp.empty()) {
        out.problem = lp;
        return out;
    }
    std::vector<std::string> seen;
    for (const auto& e : r.transcript.events()) {
        if (e.kind == orchestrator::EventKind::lock && e.detail.ends_with("src/shared.ts")) {
            seen.push_back(e.agent_name + " " + e.detail.substr(0, e.detail.find(' ')));
        }
    }
    const std::vector<std::string> want = {"dev-a acquire", "dev-a release", "dev-b acquire", "dev-b release"};
    if (seen != want) {
        std::string got;
        for (const auto& s : seen) got += "[" + s + "]";
        out.problem = "lock sequence " + got;
    }
    if (slurp(repo / "src/shared.ts") != "export const first = 10;\nexport const second = 20;\n") {
        out.problem += " shared file content wrong";
    }
    return out;
}

std::string forced_unlocked_write(const fs::path& work) {
    const auto repo = work / "repo";
    write_files(repo, {{"a.txt", "original\n"}});
    tools::Workspace ws(repo);
    tools::FileLockTable locks;
    std::string problem;
    auto expect_not_held = [&](const std::string& label, auto&& fn) {
        try {
            fn();
            problem += label + ": write succeeded; ";
        } catch (const Error& e) {
            if (e.code() != ErrorCode::LockNotHeld) problem += label + ": " + e.what() + "; ";
        }
    };
    expect_not_held("no lock", [&] { ws.write("a.txt", "x\n", locks, "dev-a"); });
    locks.acquire("a.txt", "dev-b");
    expect_not_held("lock held by another agent", [&] { ws.write("a.txt", "x\n", locks, "dev-a"); });
    expect_not_held("edit under another agent's lock",
                    [&] { ws.edit("a.txt", "original", "x", tools::Occurrence{}, locks, "dev-a"); });
    if (slurp(repo / "a.txt") != "original\n") problem += "file changed; ";
    return problem;
}

ScenarioOutcome run_replay_case(std::uint64_t seed, const fs::path& work) {
    std::mt19937_64 rng(seed);
    const auto repo = work / "repo";
    write_small_repo(repo, false);
    std::vector<std::string> names;
    const auto nfiles = 1 + pick(rng, 5);
    for (std::size_t i = 0; i < nfiles; ++i) {
        std::string body;
        const auto lines = pick(rng, 30);
        for (std::size_t l = 0; l < lines; ++l) body += "line " + std::to_string(l) + " " + word(rng) + "\n";
        if (chance(rng, 0.3) && !body.empty()) body.pop_back();
        const auto name = "data/f" + std::to_string(i) + ".txt";
        names.push_back(name);
        put_file(repo / name, body);
    }
    auto pre = read_tree(repo);

    std::vector<provider::AgentAction> actions;
    std::map<std::string, std::string> model = pre;  // expected content after the edits
    const auto nact = 1 + pick(rng, 6);
    for (std::size_t i = 0; i < nact; ++i) {
        if (chance(rng, 0.5)) {
            const auto name = chance(rng, 0.5) ? names[pick(rng, names.size())]
                                               : "data/new" + std::to_string(pick(rng, 4)) + ".txt";
            std::string body;
            const auto lines = pick(rng, 8);
            for (std::size_t l = 0; l < lines; ++l) body += word(rng) + " " + std::to_string(rng() % 100) + "\n";
            if (chance(rng, 0.3) && !body.empty()) body.pop_back();
            actions.push_back(write_action(name, body));
            model[name] = body;
        } else {
            const auto name = names[pick(rng, names.size())];
            const auto& content = model[name];
            const auto at = content.find("line " + std::to_string(pick(rng, 30)) + " ");
            if (at == std::string::npos) continue;
            const auto end = content.find('\n', at);
            const auto find = content.substr(at, end == std::string::npos ? std::string::npos : end - at);
            if (content.find(find) != at || content.find(find, at + 1) != std::string::npos) continue;
            std::string replace = chance(rng, 0.3) ? "" : "changed " + word(rng);
            if (chance(rng, 0.3)) replace += "\ninserted line";
            actions.push_back(edit_action(name, find, replace));
            model[name] = content.substr(0, at) + replace + content.substr(at + find.size());
        }
    }
    actions.push_back(done_action());

    std::vector<provider::FixtureEntry> entries = {
        fixture("planner", "available-roles", {message_action(plan_json({{"dev-a", names[0]}}, false))}),
        fixture("dev-a", "Step 1 of 1", actions),
    };
    provider::ScriptedProvider scripted(std::move(entries));
    orchestrator::RunEnvironment env;
    env.repo_root = repo;
    env.config.test_command = "true";
    env.provider = &scripted;

    ScenarioOutcome out;
    out.result = orchestrator::Orchestrator(env).run_spec(small_spec("Replay " + std::to_string(seed)));
    const auto& r = out.result;
    auto fail = [&](const std::string& what) {
        out.problem = "seed " + std::to_string(seed) + ": " + what;
        return out;
    };
    if (r.final_state != OrchestrationState::Done) return fail("run ended Failed: " + r.failure);
    if (!r.change_set) return fail("no change set");
    const auto post = read_tree(repo);
    if (post != model) return fail("workspace differs from the scripted edits: " + first_difference(post, model));
    const auto& diff = r.change_set->unified_diff;
    try {
        const auto replayed = orchestrator::apply_patch(pre, diff);
        if (auto d = first_difference(replayed, post); !d.empty()) return fail("apply_patch: " + d);
    } catch (const Error& e) {
        return fail(std::string("apply_patch threw ") + e.what());
    }
    if (auto d = gnu_patch_check(pre, diff, post); !d.empty()) return fail("GNU patch: " + d);
    return out;
}

FuzzStats run_sandbox_fuzz(std::size_t n, std::uint64_t seed, const fs::path& work) {
    FuzzStats stats;
    const auto root = work / "ws";
    const auto outside = work / "outside";
    write_files(root, {{"file.txt", "inside\n"}, {"sub/inner.txt", "inner\n"}});
    write_files(outside, {{"secret.txt", "do not touch\n"}});
    fs::create_directory_symlink("../outside", root / "link_out");
    fs::create_directory_symlink(outside, root / "link_abs");
    fs::create_directory_symlink("sub", root / "link_in");
    fs::create_directory_symlink("../../outside", root / "sub" / "up");
    fs::create_symlink("../outside/secret.txt", root / "secret_link.txt");

    const auto outside_before = read_tree(outside);
    std::set<std::string> work_before;
    for (const auto& e : fs::directory_iterator(work)) work_before.insert(e.path().filename().string());

    tools::Workspace ws(root);
    const auto canon_root = ws.root();
    ws.set_access_observer([&](const fs::path& p) {
        ++stats.accesses;
        // Components the kernel refuses to stat (ENAMETOOLONG) cannot be
        // symlinks; canonicalize the longest prefix that resolves.
        std::error_code ec;
        fs::path prefix = p, rest;
        auto real = fs::weakly_canonical(prefix, ec);
        while (ec && prefix.has_relative_path()) {
            rest = prefix.filename() / rest;
            prefix = prefix.parent_path();
            ec.clear();
            real = fs::weakly_canonical(prefix, ec);
        }
        const auto rel = (real / rest).lexically_normal().lexically_relative(canon_root);
        if (ec || rel.empty() || *rel.begin() == "..") {
            ++stats.outside;
            if (stats.problem.empty()) stats.problem = "access outside the root: " + p.string();
        }
    });
    tools::FileLockTable locks;
    tools::Sandbox sandbox(ws, locks, {});
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < n; ++i) {
        auto path = fuzz_path(rng);
        if (chance(rng, 0.05)) path = (root / "..").string() + "/outside/secret.txt";
        provider::ToolInvocation call;
        const auto which = pick(rng, 20);
        if (which < 8) {
            call = {"Read", {{"path", path}}};
        } else if (which < 14) {
            call = {"Write", {{"path", path}, {"content", "fuzz\n"}}};
        } else if (which < 19) {
            call = {"Edit", {{"path", path}, {"find", "inside"}, {"replace", "inside"}}};
        } else {
            call = {"Grep", {{"pattern", "do not"}, {"glob", path}}};
        }
        std::string locked;
        if (call.tool_name != "Read" && call.tool_name != "Grep" && chance(rng, 0.8)) {
            try {
                locked = ws.normalize(path);
                locks.acquire(locked, "fuzzer");
            } catch (const Error&) {
                locked.clear();
            }
        }
        const auto result = sandbox.invoke_as("fuzzer", call);
        ++stats.calls;
        if (!result.ok && result.error == ErrorCode::PathEscapesSandbox) ++stats.escapes_rejected;
        if (call.tool_name == "Grep" && result.content.find("do not touch") != std::string::npos &&
            stats.problem.empty()) {
            stats.problem = "grep returned content from outside the root";
        }
        if (call.tool_name == "Read" && result.ok && result.content == "do not touch\n" && stats.problem.empty()) {
            stats.problem = "read returned the outside secret via " + path;
        }
        if (!locked.empty()) locks.release(locked, "fuzzer");
    }
    if (read_tree(outside) != outside_before && stats.problem.empty()) stats.problem = "outside directory changed";
    std::set<std::string> work_after;
    for (const auto& e : fs::directory_iterator(work)) work_after.insert(e.path().filename().string());
    if (work_after != work_before && stats.problem.empty()) stats.problem = "entries appeared next to the root";
    if (locks.size() != 0 && stats.problem.empty()) stats.problem = "locks left behind";
    return stats;
}

}  // namespace ctxeng::testing
