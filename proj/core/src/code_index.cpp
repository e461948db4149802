#include "ctxeng/code_index.hpp"

#include <algorithm>
#include <cmath>
#include <regex>
#include <unordered_map>

#include "ctxeng/error.hpp"
#include "ctxeng/text.hpp"

namespace ctxeng::retrieval {

namespace fs = std::filesystem;

std::vector<std::string> default_source_globs() {
    return {"*.c",  "*.h",   "*.cc",  "*.cpp", "*.cxx", "*.hpp", "*.hh", "*.hxx", "*.java", "*.js",
            "*.jsx", "*.mjs", "*.cjs", "*.ts",  "*.tsx", "*.mts", "*.cts", "*.go",  "*.rs",   "*.py"};
}

std::string_view to_string(QueryMode mode) noexcept {
    switch (mode) {
        case QueryMode::semantic: return "semantic";
        case QueryMode::lexical: return "lexical";
        case QueryMode::hybrid: return "hybrid";
    }
    return "";
}

namespace {

bool matches_any(const std::vector<std::string>& globs, std::string_view path) {
    return std::any_of(globs.begin(), globs.end(), [&](const auto& g) { return glob_match(g, path); });
}

/// Lines [first, last] (1-based) of `text`, verbatim with terminators.
std::string slice_lines(std::string_view text, std::size_t first, std::size_t last) {
    std::size_t line = 1;
    std::size_t pos = 0;
    std::size_t begin = std::string_view::npos;
    while (pos < text.size()) {
        if (line == first) begin = pos;
        const auto nl = text.find('\n', pos);
        const auto next = nl == std::string_view::npos ? text.size() : nl + 1;
        if (line == last) break;
        pos = next;
        ++line;
    }
    if (begin == std::string_view::npos) return {};
    const auto nl = text.find('\n', pos);
    const auto end = nl == std::string_view::npos ? text.size() : nl + 1;
    return std::string(text.substr(begin, end - begin));
}

bool snippet_before(const ScoredSnippet& a, double ka, const ScoredSnippet& b, double kb) {
    if (ka != kb) return ka > kb;
    if (a.chunk.repo_rel_path != b.chunk.repo_rel_path) return a.chunk.repo_rel_path < b.chunk.repo_rel_path;
    if (a.chunk.start_line != b.chunk.start_line) return a.chunk.start_line < b.chunk.start_line;
    return a.chunk.chunk_id < b.chunk.chunk_id;
}

double sort_key(const ScoredSnippet& s, QueryMode mode) {
    switch (mode) {
        case QueryMode::semantic: return s.semantic_score;
        case QueryMode::lexical: return s.lexical_score;
        case QueryMode::hybrid: return s.final_score;
    }
    return s.final_score;
}

void sort_snippets(std::vector<ScoredSnippet>& v, QueryMode mode) {
    std::sort(v.begin(), v.end(), [mode](const auto& a, const auto& b) {
        return snippet_before(a, sort_key(a, mode), b, sort_key(b, mode));
    });
}

}  // namespace

IndexStats index_repository(const fs::path& root, VectorIndex& index, const Embedder& embedder,
                            const IndexOptions& options) {
    std::error_code ec;
    if (!fs::is_directory(root, ec)) throw Error(ErrorCode::NotFound, "repository root " + root.string() + " does not exist");
    IndexStats stats;
    for (const auto& rel : list_files(root, options.skip_dirs)) {
        if (!matches_any(options.include_globs, rel)) continue;
        const auto lang = language_for_path(rel);
        if (!lang) continue;
        std::string text;
        try {
            text = read_file(root / rel);
        } catch (const Error&) {
            ++stats.skipped;
            continue;
        }
        if (looks_binary(text)) {
            ++stats.skipped;
            continue;
        }
        ++stats.files;
        for (auto& chunk : chunk_source(text, *lang, rel)) {
            IndexRecord rec;
            rec.vector = embedder.embed(chunk.text);
            rec.chunk_id = std::move(chunk.chunk_id);
            rec.repo_rel_path = std::move(chunk.repo_rel_path);
            rec.start_line = chunk.start_line;
            rec.end_line = chunk.end_line;
            rec.kind = chunk.kind;
            rec.symbol_name = std::move(chunk.symbol_name);
            try {
                index.upsert(std::move(rec));
            } catch (const Error& e) {
                throw e.with_context(rel);
            }
            ++stats.chunks;
        }
    }
    try {
        index.persist();
    } catch (const Error& e) {
        throw e.with_context("persisting index for " + root.string());
    }
    return stats;
}

double final_score(double semantic, double lexical, const HybridWeights& w) noexcept {
    return w.semantic * std::max(semantic, 0.0) + w.lexical * lexical;
}

double coverage_score(const std::set<std::string>& query_ids, const std::set<std::string>& chunk_ids,
                      const std::map<std::string, std::size_t, std::less<>>& df, std::size_t n_docs) {
    double total = 0.0;
    double hit = 0.0;
    for (const auto& t : query_ids) {
        const auto it = df.find(t);
        const double d = it == df.end() ? 0.0 : static_cast<double>(it->second);
        const double idf = std::log(1.0 + static_cast<double>(n_docs) / (1.0 + d));
        total += idf;
        if (chunk_ids.contains(t)) hit += idf;
    }
    return total > 0.0 ? hit / total : 0.0;
}

std::vector<ScoredSnippet> query_index(const VectorIndex& index, const Embedder& embedder, const fs::path& repo_root,
                                       const RetrievalQuery& query, const HybridWeights& weights) {
    if (query.k == 0) throw Error(ErrorCode::InvalidArgument, "k must be at least 1");
    const auto records = index.records();
    if (records.empty()) {
        if (query.mode == QueryMode::lexical) return {};
        throw Error(ErrorCode::EmptyIndex, "index holds no records");
    }

    std::unordered_map<std::string, double> semantic;
    if (!query.text.empty()) {
        for (const auto& s : index.query_nearest(embedder.embed(query.text), records.size())) {
            semantic.emplace(s.chunk_id, s.score);
        }
    }

    std::unordered_map<std::string, std::string> files;
    std::vector<ScoredSnippet> out;
    std::vector<std::set<std::string>> ids;
    std::map<std::string, std::size_t, std::less<>> df;
    out.reserve(records.size());
    for (const auto& r : records) {
        auto it = files.find(r.repo_rel_path);
        if (it == files.end()) {
            std::string text;
            std::error_code ec;
            if (fs::is_regular_file(repo_root / r.repo_rel_path, ec)) text = read_file(repo_root / r.repo_rel_path);
            it = files.emplace(r.repo_rel_path, std::move(text)).first;
        }
        ScoredSnippet s;
        s.chunk.chunk_id = r.chunk_id;
        s.chunk.repo_rel_path = r.repo_rel_path;
        s.chunk.start_line = r.start_line;
        s.chunk.end_line = r.end_line;
        s.chunk.kind = r.kind;
        s.chunk.symbol_name = r.symbol_name;
        s.chunk.text = slice_lines(it->second, r.start_line, r.end_line);
        if (auto sem = semantic.find(r.chunk_id); sem != semantic.end()) s.semantic_score = sem->second;
        ids.push_back(identifier_set(s.chunk.text));
        for (const auto& t : ids.back()) ++df[t];
        out.push_back(std::move(s));
    }

    const auto query_ids = identifier_set(query.text);
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i].lexical_score = coverage_score(query_ids, ids[i], df, out.size());
        out[i].final_score = final_score(out[i].semantic_score, out[i].lexical_score, weights);
    }
    sort_snippets(out, query.mode);
    if (out.size() > query.k) out.resize(query.k);
    return out;
}

double jaccard(const std::set<std::string>& a, const std::set<std::string>& b) noexcept {
    if (a.empty() && b.empty()) return 0.0;
    std::size_t inter = 0;
    for (const auto& t : a) inter += b.count(t);
    return static_cast<double>(inter) / static_cast<double>(a.size() + b.size() - inter);
}

std::vector<ScoredSnippet> rerank(std::vector<ScoredSnippet> candidates, const RetrievalQuery& query,
                                  const HybridWeights& weights) {
    const auto q = identifier_set(query.text);
    for (auto& c : candidates) {
        c.lexical_score = jaccard(q, identifier_set(c.chunk.text));
        c.final_score = final_score(c.semantic_score, c.lexical_score, weights);
    }
    sort_snippets(candidates, QueryMode::hybrid);
    return candidates;
}

std::vector<LexicalMatch> lexical_search(const fs::path& root, std::string_view pattern,
                                         const LexicalOptions& options) {
    if (pattern.empty()) throw Error(ErrorCode::InvalidPattern, "empty pattern");
    std::optional<std::regex> re;
    if (options.regex) {
        try {
            re.emplace(pattern.begin(), pattern.end(), std::regex::ECMAScript);
        } catch (const std::regex_error& e) {
            throw Error(ErrorCode::InvalidPattern, "'" + std::string(pattern) + "': " + e.what());
        }
    }
    std::vector<LexicalMatch> out;
    for (const auto& rel : list_files(root, options.skip_dirs)) {
        if (!glob_match(options.glob, rel)) continue;
        std::string text;
        try {
            text = read_file(root / rel);
        } catch (const Error&) {
            continue;
        }
        if (looks_binary(text)) continue;
        std::size_t n = 0;
        for (auto line : split_lines(text)) {
            ++n;
            const bool hit = re ? std::regex_search(line.begin(), line.end(), *re)
                                : line.find(pattern) != std::string_view::npos;
            if (hit) out.push_back({rel, n, std::string(line)});
        }
    }
    return out;
}

}  // namespace ctxeng::retrieval
