#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "ctxeng/chunker.hpp"
#include "ctxeng/embedder.hpp"
#include "ctxeng/orchestrator.hpp"
#include "ctxeng/provider.hpp"
#include "ctxeng/vector_index.hpp"

namespace ctxeng::testing {

namespace fs = std::filesystem;

/// tests/ in the source tree.
fs::path source_dir();
fs::path scenario_dir(std::string_view name);

class TempDir {
public:
    explicit TempDir(std::string_view prefix = "ctxeng");
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const fs::path& path() const noexcept { return path_; }
    fs::path operator/(std::string_view rel) const { return path_ / rel; }

private:
    fs::path path_;
};

void copy_tree(const fs::path& from, const fs::path& to);
void write_files(const fs::path& root, const std::map<std::string, std::string>& files);
void put_file(const fs::path& path, std::string_view content);
std::string slurp(const fs::path& path);

/// Every regular file under `root` except inside .git, read with plain
/// iostreams. Independent of take_snapshot.
std::map<std::string, std::string> read_tree(const fs::path& root);

// ---------------------------------------------------------------------------
// Oracles

struct RawTotals {
    std::size_t messages = 0;
    std::size_t input_tokens = 0;
    std::size_t output_tokens = 0;
    std::size_t total() const { return input_tokens + output_tokens; }
    bool operator==(const RawTotals&) const = default;
};

/// Sums token_usage over the event records of a serialized transcript and
/// counts provider_call events, reading the JSON directly.
RawTotals sum_transcript_json(std::string_view serialized);

/// Applies `diff` to a copy of `pre` with GNU `patch -p1` and compares the
/// result with `post`. Empty on success, otherwise a description. Files that
/// are new and empty are not compared.
std::string gnu_patch_check(const std::map<std::string, std::string>& pre, const std::string& diff,
                            const std::map<std::string, std::string>& post);

/// Empty when the chunks tile the text's lines exactly and their texts
/// concatenate back to the input.
std::string tiling_problem(const std::vector<retrieval::CodeChunk>& chunks, std::string_view text);

/// Lines of `text` in [start, end], 1-based, each with its terminator.
std::string line_slice(std::string_view text, std::size_t start, std::size_t end);

/// Brute-force hybrid scores for every record: cosine from the stored vectors
/// computed in a plain loop, IDF coverage recomputed from the chunk texts on
/// disk. Sorted best first with the documented tie-break.
struct OracleScore {
    std::string chunk_id;
    std::string path;
    std::size_t start_line = 0;
    double semantic = 0.0;
    double lexical = 0.0;
    double final_score = 0.0;
};
std::vector<OracleScore> oracle_rank(const std::vector<retrieval::IndexRecord>& records,
                                     const fs::path& repo_root, const retrieval::Embedder& embedder,
                                     std::string_view query);

/// Empty when every lock acquire is matched by a release of the same holder
/// before anyone else acquires that path, and nothing is held at the end.
std::string lock_problem(const orchestrator::Transcript& transcript);

// ---------------------------------------------------------------------------
// Generators

/// Random source text in the given language: functions, types, comments,
/// string literals with braces, blank runs, and now and then unbalanced
/// junk.
std::string random_source(std::mt19937_64& rng, retrieval::LanguageId language);

/// `n` distinct top-level functions spread over TypeScript, Python and C++
/// files. The function at index `planted_at` mentions `planted`.
std::map<std::string, std::string> function_corpus(std::size_t n, std::string_view planted, std::size_t planted_at);

/// A path argument aimed at escaping the sandbox: '..' chains, absolute
/// paths, symlink hops, doubled slashes, NUL bytes, long names.
std::string fuzz_path(std::mt19937_64& rng);

// ---------------------------------------------------------------------------
// Scenarios

provider::AgentAction write_action(std::string path, std::string content);
provider::AgentAction edit_action(std::string path, std::string find, std::string replace);
provider::AgentAction read_action(std::string path);
provider::AgentAction message_action(std::string content);
provider::AgentAction done_action(bool blocked = false, std::string note = "ok");
provider::FixtureEntry fixture(std::string agent, std::string contains, std::vector<provider::AgentAction> actions);

/// A profile file with the given tools and a one-line prompt.
std::string agent_file(std::string_view name, std::string_view description, std::string_view tools);

struct CustomBlockRun {
    orchestrator::RunResult result;
    std::map<std::string, std::string> pre;
    std::map<std::string, std::string> post;
    double seconds = 0.0;
};

/// Copies the CustomBlock fixture repo into `work`/repo and runs the scripted
/// task through the orchestrator.
CustomBlockRun run_customblock(const fs::path& work);

/// One randomized scripted scenario for the state-machine suite.
struct SoundnessCase {
    std::uint64_t seed = 0;
    std::size_t retries = 0;
    std::vector<bool> test_passes;  // one per possible test run
    bool invalid_plan = false;
    bool blocked_step = false;
    std::size_t steps = 1;
    std::vector<orchestrator::Severity> severities;
    std::vector<bool> with_edit;
    bool confirm = false;
};
SoundnessCase make_soundness_case(std::uint64_t seed);

struct ScenarioOutcome {
    orchestrator::RunResult result;
    std::string problem;  // empty when every check passed
};

/// Runs the case in `work` and checks the transcript: state path valid, at
/// most `retries` Test->Delegate transitions, terminal in {Done, Failed,
/// paused}, balanced locks, and the outcome an independent oracle predicts.
ScenarioOutcome run_soundness_case(const SoundnessCase& c, const fs::path& work);

/// Two plan steps, two agents, one shared file.
ScenarioOutcome run_shared_file_scenario(const fs::path& work);

/// A Workspace::write by an agent that does not hold the lock. Empty when it
/// fails with LockNotHeld.
std::string forced_unlocked_write(const fs::path& work);

/// Random repo, one step with random Write/Edit actions, passing tests. The
/// emitted diff must replay onto the pre-run tree with apply_patch and GNU
/// patch and reproduce the post-run tree.
ScenarioOutcome run_replay_case(std::uint64_t seed, const fs::path& work);

struct FuzzStats {
    std::size_t calls = 0;
    std::size_t accesses = 0;
    std::size_t outside = 0;  // accesses that resolved outside the root
    std::size_t escapes_rejected = 0;
    std::string problem;
};
/// `n` fuzzed Read/Write/Edit/Grep calls through Sandbox::invoke_as with an
/// access observer on the workspace.
FuzzStats run_sandbox_fuzz(std::size_t n, std::uint64_t seed, const fs::path& work);

/// The 10-document knowledge corpus.
fs::path knowledge_corpus_dir();

}  // namespace ctxeng::testing
