#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "ctxeng/chunker.hpp"
#include "ctxeng/embedder.hpp"
#include "ctxeng/vector_index.hpp"

namespace ctxeng::retrieval {

/// "*.c", "*.cpp", "*.ts", "*.py", ... one glob per supported extension.
std::vector<std::string> default_source_globs();

struct IndexOptions {
    std::vector<std::string> include_globs = default_source_globs();
    std::vector<std::string> skip_dirs = {".git", "node_modules"};
};

struct IndexStats {
    std::size_t files = 0;
    std::size_t chunks = 0;
    std::size_t skipped = 0;  // matched a glob but binary or unreadable

    bool operator==(const IndexStats&) const = default;
};

/// Chunks and embeds every matching file under `root` (sorted walk) and
/// upserts the records. Re-running on an unchanged tree upserts the same ids.
IndexStats index_repository(const std::filesystem::path& root, VectorIndex& index, const Embedder& embedder,
                            const IndexOptions& options = {});

enum class QueryMode { semantic, lexical, hybrid };
std::string_view to_string(QueryMode mode) noexcept;

struct RetrievalQuery {
    std::string text;
    std::size_t k = 5;
    QueryMode mode = QueryMode::hybrid;
};

struct HybridWeights {
    double semantic = 0.7;
    double lexical = 0.3;
};

struct ScoredSnippet {
    CodeChunk chunk;
    double semantic_score = 0.0;  // cosine, [-1, 1]
    double lexical_score = 0.0;   // [0, 1]
    double final_score = 0.0;     // semantic * max(cos, 0) + lexical * lex
};

double final_score(double semantic, double lexical, const HybridWeights& w = {}) noexcept;

/// IDF-weighted share of the query's identifiers found in `chunk_ids`:
/// sum of idf over matched query identifiers / sum over all of them, with
/// idf(t) = ln(1 + N / (1 + df(t))).
double coverage_score(const std::set<std::string>& query_ids, const std::set<std::string>& chunk_ids,
                      const std::map<std::string, std::size_t, std::less<>>& df, std::size_t n_docs);

/// Scores every record; semantic mode ranks by cosine, lexical by lexical
/// score, hybrid by final score. Ties go to path, then start line. Chunk text
/// is read from `repo_root`. Throws EmptyIndex for semantic and hybrid
/// queries against an empty index.
std::vector<ScoredSnippet> query_index(const VectorIndex& index, const Embedder& embedder,
                                       const std::filesystem::path& repo_root, const RetrievalQuery& query,
                                       const HybridWeights& weights = {});

/// Jaccard overlap of identifier sets.
double jaccard(const std::set<std::string>& a, const std::set<std::string>& b) noexcept;

/// Recomputes lexical_score as the Jaccard overlap between the identifiers of
/// the query and of each chunk, recomputes final_score, and re-sorts.
std::vector<ScoredSnippet> rerank(std::vector<ScoredSnippet> candidates, const RetrievalQuery& query,
                                  const HybridWeights& weights = {});

struct LexicalMatch {
    std::string path;
    std::size_t line_number = 0;
    std::string line;

    bool operator==(const LexicalMatch&) const = default;
};

struct LexicalOptions {
    bool regex = false;  // ECMAScript syntax when true
    std::string glob = "*";
    std::vector<std::string> skip_dirs = {".git", "node_modules"};
};

/// Every matching line of every text file under `root` whose relative path
/// matches the glob, ordered by path then line. Throws InvalidPattern.
std::vector<LexicalMatch> lexical_search(const std::filesystem::path& root, std::string_view pattern,
                                         const LexicalOptions& options = {});

}  // namespace ctxeng::retrieval
