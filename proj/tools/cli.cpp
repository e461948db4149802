#include "cli.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <CLI11.hpp>
#include <algorithm>
#include <istream>
#include <memory>
#include <ostream>

#include "ctxeng/code_index.hpp"
#include "ctxeng/context.hpp"
#include "ctxeng/embedder.hpp"
#include "ctxeng/error.hpp"
#include "ctxeng/orchestrator.hpp"
#include "ctxeng/provider.hpp"
#include "ctxeng/report.hpp"
#include "ctxeng/text.hpp"
#include "ctxeng/vector_index.hpp"

namespace ctxeng::cli {

namespace fs = std::filesystem;
namespace orch = ctxeng::orchestrator;

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// O_EXCL marker file that keeps two runs out of one output directory.
class OutputLock {
public:
    explicit OutputLock(const fs::path& dir) : path_(dir / ".lock") {
        fs::create_directories(dir);
        const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
        if (fd < 0) {
            throw Error(ErrorCode::IoError, "output directory " + dir.string() + " is in use (" + path_.string() + " exists)");
        }
        const auto pid = std::to_string(::getpid()) + "\n";
        [[maybe_unused]] auto n = ::write(fd, pid.data(), pid.size());
        ::close(fd);
    }
    ~OutputLock() {
        std::error_code ec;
        fs::remove(path_, ec);
    }
    OutputLock(const OutputLock&) = delete;
    OutputLock& operator=(const OutputLock&) = delete;

private:
    fs::path path_;
};

std::unique_ptr<provider::Provider> make_provider(const std::string& spec) {
    const auto colon = spec.find(':');
    if (colon == std::string::npos) throw UsageError("provider must be scripted:PATH or replay:PATH, got \"" + spec + "\"");
    const auto kind = spec.substr(0, colon);
    const fs::path path = spec.substr(colon + 1);
    if (kind == "scripted") {
        return std::make_unique<provider::ScriptedProvider>(provider::load_fixture(path),
                                                            provider::ScriptedProvider::Mode::first_match);
    }
    if (kind == "replay") {
        return std::make_unique<provider::ScriptedProvider>(provider::load_fixture(path),
                                                            provider::ScriptedProvider::Mode::strict);
    }
    throw UsageError("unknown provider kind \"" + kind + "\" (expected scripted or replay)");
}

struct RunOptions {
    std::string task;
    std::string spec_path;
    std::string repo;
    std::string provider;
    std::string config;
    std::string out_dir = "out";
    std::string record;
    std::string expect;
};

orch::ConfirmFn make_confirm(std::istream& in, std::ostream& err) {
    return [&in, &err](const std::vector<orch::ReviewSuggestion>& blocking) {
        err << "Review raised " << blocking.size() << " blocking suggestion(s):\n";
        for (const auto& s : blocking) err << "  " << s.path << ": " << s.suggestion << "\n";
        err << "Integrate anyway? [yes/no]: " << std::flush;
        std::string line;
        if (!std::getline(in, line)) return false;
        const auto answer = to_lower(trim(line));
        return answer == "yes" || answer == "y";
    };
}

orch::RunResult execute(const RunOptions& o, bool plan_only, provider::Provider& prov, std::istream& in,
                        std::ostream& err) {
    orch::RunEnvironment env;
    env.repo_root = o.repo;
    env.config = o.config.empty() ? orch::RunConfig{} : orch::load_run_config(o.config);
    env.provider = &prov;
    env.confirm = make_confirm(in, err);
    orch::Orchestrator orchestrator(std::move(env));
    if (!o.spec_path.empty()) {
        const auto spec = context::task_spec_from_json(read_file(o.spec_path));
        return plan_only ? orchestrator.plan_only(spec) : orchestrator.run_spec(spec);
    }
    return plan_only ? orchestrator.plan_only(o.task) : orchestrator.run_task(o.task);
}

std::string summary_text(const orch::RunResult& r) {
    if (r.change_set) return r.change_set->summary;
    std::string out;
    if (r.paused) {
        std::size_t blocking = 0;
        for (const auto& s : r.suggestions) blocking += s.severity == orch::Severity::blocking ? 1 : 0;
        out = "Paused at Review: " + std::to_string(blocking) + " blocking suggestion(s) await confirmation\n";
        for (const auto& s : r.suggestions) {
            out += "- [" + std::string(orch::to_string(s.severity)) + "] " + s.path + ": " + s.suggestion + "\n";
        }
        return out;
    }
    out = "Failed: " + r.failure + " (transcript event " + std::to_string(r.failure_seq) + ")\n";
    if (!r.plan.steps.empty()) out += "\nSteps:\n" + orch::render_plan(r.plan, true);
    return out;
}

int cmd_run(const RunOptions& o, bool replay, std::istream& in, std::ostream& out, std::ostream& err) {
    if (o.provider.empty()) throw UsageError("no provider: pass --provider or set CTXENG_PROVIDER");
    auto inner = make_provider(o.provider);
    std::unique_ptr<provider::RecordingProvider> recorder;
    provider::Provider* prov = inner.get();
    if (!o.record.empty()) {
        recorder = std::make_unique<provider::RecordingProvider>(*inner, o.record);
        prov = recorder.get();
    }

    OutputLock lock(o.out_dir);
    const auto result = execute(o, false, *prov, in, err);
    const fs::path dir(o.out_dir);
    write_file_atomic(dir / "diff.patch", result.change_set ? result.change_set->unified_diff : std::string{});
    result.transcript.write(dir / "transcript.log");
    write_file_atomic(dir / "summary.txt", summary_text(result));

    out << "final_state=" << (result.paused ? "paused" : std::string(orch::to_string(result.final_state))) << "\n";
    if (result.change_set) out << "files_touched=" << result.change_set->files_touched.size() << "\n";
    if (result.final_state == orch::OrchestrationState::Failed) err << "error: " << result.failure << "\n";

    if (replay && !o.expect.empty()) {
        const auto expected = orch::without_wall_times(orch::Transcript::load(o.expect));
        const auto actual = orch::without_wall_times(result.transcript);
        if (expected != actual) {
            const auto a = split_lines(actual);
            const auto e = split_lines(expected);
            std::size_t line = 0;
            while (line < a.size() && line < e.size() && a[line] == e[line]) ++line;
            err << "error: transcript differs from " << o.expect << " at line " << line + 1 << "\n";
            return kError;
        }
        out << "replay matches " << o.expect << "\n";
    }
    return result.exit_code();
}

int cmd_plan(const RunOptions& o, std::istream& in, std::ostream& out, std::ostream& err) {
    if (o.provider.empty()) throw UsageError("no provider: pass --provider or set CTXENG_PROVIDER");
    auto prov = make_provider(o.provider);
    const auto result = execute(o, true, *prov, in, err);
    if (result.final_state == orch::OrchestrationState::Failed) {
        err << "error: " << result.failure << "\n";
        return kRunFailed;
    }
    out << orch::render_plan(result.plan);
    return kSuccess;
}

struct IndexOptions {
    std::string repo;
    std::string backend = "memory";
    std::string out_dir;
    std::string query;
    std::size_t k = 5;
};

int cmd_index(const IndexOptions& o, std::ostream& out) {
    if (o.backend == "file" && o.out_dir.empty()) throw UsageError("--backend file needs --out");
    const retrieval::NgramEmbedder embedder;
    retrieval::IndexStats stats;
    std::unique_ptr<retrieval::VectorIndex> index;
    if (o.backend == "file") {
        retrieval::FileIndex fresh(o.out_dir, embedder.dims(), embedder.id());
        stats = retrieval::index_repository(o.repo, fresh, embedder);
        index = std::make_unique<retrieval::FileIndex>(retrieval::FileIndex::load(o.out_dir));
    } else {
        index = std::make_unique<retrieval::MemoryIndex>(embedder.dims());
        stats = retrieval::index_repository(o.repo, *index, embedder);
    }
    out << "files=" << stats.files << " chunks=" << stats.chunks << " skipped=" << stats.skipped << "\n";
    if (!o.query.empty()) {
        const retrieval::RetrievalQuery q{o.query, o.k, retrieval::QueryMode::hybrid};
        for (const auto& s : retrieval::query_index(*index, embedder, o.repo, q)) {
            char score[32];
            std::snprintf(score, sizeof score, "%.4f", s.final_score);
            out << s.chunk.repo_rel_path << ":" << s.chunk.start_line << "-" << s.chunk.end_line << " " << score;
            if (!s.chunk.symbol_name.empty()) out << " " << s.chunk.symbol_name;
            out << "\n";
        }
    }
    return kSuccess;
}

int cmd_report(const std::string& path, const std::string& baseline, std::ostream& out, std::ostream& err) {
    const auto report = orch::build_report(orch::Transcript::load(path));
    out << orch::render_report(report);
    auto check = [&](const orch::RunReport& r, const std::string& p) {
        if (r.consistent()) return true;
        err << "error: " << p << ": totals record (messages=" << r.declared.messages
            << " input=" << r.declared.input_tokens << " output=" << r.declared.output_tokens
            << ") disagrees with the events (messages=" << r.totals.messages << " input=" << r.totals.input_tokens
            << " output=" << r.totals.output_tokens << ")\n";
        return false;
    };
    if (!check(report, path)) return kError;
    if (!baseline.empty()) {
        const auto base = orch::build_report(orch::Transcript::load(baseline));
        if (!check(base, baseline)) return kError;
        out << "baseline_total_tokens: " << base.totals.total_tokens() << "\n";
        out << "ratio: " << orch::format_ratio(report.totals.total_tokens(), base.totals.total_tokens()) << "\n";
    }
    return kSuccess;
}

void add_run_flags(CLI::App* cmd, RunOptions& o, bool with_output) {
    auto* task = cmd->add_option("--task", o.task, "Free-form change request");
    auto* spec = cmd->add_option("--spec", o.spec_path, "Task specification JSON instead of --task")
                     ->check(CLI::ExistingFile);
    task->excludes(spec);
    cmd->add_option("--repo", o.repo, "Repository workspace")->required()->check(CLI::ExistingDirectory);
    cmd->add_option("--config", o.config, "Run config (YAML)")->envname("CTXENG_CONFIG")->check(CLI::ExistingFile);
    if (with_output) cmd->add_option("--out", o.out_dir, "Output directory")->capture_default_str();
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err) {
    CLI::App app{"Context-engineered multi-agent coding orchestrator", "ctxeng"};
    app.require_subcommand(1);

    IndexOptions index_opts;
    auto* index = app.add_subcommand("index", "Chunk, embed and index a repository");
    index->add_option("--repo", index_opts.repo, "Repository to index")->required()->check(CLI::ExistingDirectory);
    index->add_option("--backend", index_opts.backend, "Vector index backend")
        ->check(CLI::IsMember({"memory", "file"}));
    index->add_option("--out", index_opts.out_dir, "Index directory for the file backend");
    index->add_option("--query", index_opts.query, "Query the fresh index and print the hits");
    index->add_option("-k", index_opts.k, "Hits to print")->check(CLI::PositiveNumber);

    RunOptions run_opts;
    auto* run = app.add_subcommand("run", "Run a task end to end");
    add_run_flags(run, run_opts, true);
    run->add_option("--provider", run_opts.provider, "scripted:PATH or replay:PATH")->envname("CTXENG_PROVIDER");
    run->add_option("--record", run_opts.record, "Record provider exchanges to this fixture file");

    RunOptions plan_opts;
    auto* plan = app.add_subcommand("plan", "Stop after planning and print the steps");
    add_run_flags(plan, plan_opts, false);
    plan->add_option("--provider", plan_opts.provider, "scripted:PATH or replay:PATH")->envname("CTXENG_PROVIDER");

    RunOptions replay_opts;
    std::string recording;
    auto* replay = app.add_subcommand("replay", "Re-run a task against a recorded fixture");
    add_run_flags(replay, replay_opts, true);
    replay->add_option("--recording", recording, "Fixture written by run --record")->required()->check(CLI::ExistingFile);
    replay->add_option("--expect", replay_opts.expect, "Transcript the replay must reproduce")->check(CLI::ExistingFile);

    std::string transcript_path;
    std::string baseline_path;
    auto* report = app.add_subcommand("report", "Token and message totals of a transcript");
    report->add_option("transcript", transcript_path, "Transcript file")->required()->check(CLI::ExistingFile);
    report->add_option("baseline", baseline_path, "Baseline transcript for a token ratio")->check(CLI::ExistingFile);

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kSuccess : kUsage;
    }

    auto require_task = [](const RunOptions& o) {
        if (o.task.empty() && o.spec_path.empty()) throw UsageError("one of --task or --spec is required");
    };
    try {
        if (index->parsed()) return cmd_index(index_opts, out);
        if (run->parsed()) {
            require_task(run_opts);
            return cmd_run(run_opts, false, in, out, err);
        }
        if (plan->parsed()) {
            require_task(plan_opts);
            return cmd_plan(plan_opts, in, out, err);
        }
        if (replay->parsed()) {
            require_task(replay_opts);
            replay_opts.provider = "replay:" + recording;
            return cmd_run(replay_opts, true, in, out, err);
        }
        if (report->parsed()) return cmd_report(transcript_path, baseline_path, out, err);
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << "\n" << app.help();
        return kUsage;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kError;
    }
    return kUsage;
}

}  // namespace ctxeng::cli
