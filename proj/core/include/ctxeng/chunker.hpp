#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ctxeng::retrieval {

enum class LanguageId { c, cpp, java, javascript, typescript, go, rust, python };

std::string_view to_string(LanguageId id) noexcept;
/// Throws Error{UnsupportedLanguage}.
LanguageId language_from_name(std::string_view name);
std::optional<LanguageId> language_for_path(std::string_view path);

enum class ChunkKind { function, type_definition, file_remainder };
std::string_view to_string(ChunkKind kind) noexcept;
std::optional<ChunkKind> chunk_kind_from(std::string_view name) noexcept;

struct CodeChunk {
    std::string chunk_id;  // short digest of "path:start:end"
    std::string repo_rel_path;
    std::size_t start_line = 0;  // 1-based, inclusive
    std::size_t end_line = 0;
    ChunkKind kind = ChunkKind::file_remainder;
    std::string symbol_name;
    std::string text;  // the covered lines, verbatim

    bool operator==(const CodeChunk&) const = default;
};

std::string make_chunk_id(std::string_view path, std::size_t start_line, std::size_t end_line);

/// Line-oriented boundary rules for one language family.
struct BoundaryGrammar {
    enum class Blocks { braces, indentation };
    Blocks blocks = Blocks::braces;
    std::vector<std::string> type_keywords;      // class, struct, interface, ...
    std::vector<std::string> function_keywords;  // function, fn, func, def
    std::vector<std::string> modifiers;          // skipped before a keyword
    std::vector<std::string> namespace_keywords; // blocks whose body stays top level
    std::vector<std::string> alias_keywords;     // may end at ';' or end of line without a body
    bool c_style_functions = false;              // `ret name(args) {`
    bool arrow_functions = false;                // `const name = (...) => {`
    bool preprocessor_lines = false;             // '#' lines carry no braces
    bool single_quote_strings = false;           // otherwise '…' is a char literal
    bool backtick_strings = false;
    bool hash_comments = false;
    bool triple_quote_strings = false;
};

const BoundaryGrammar& grammar_for(LanguageId id);

/// One chunk per top-level function or type definition; everything else is
/// grouped into file_remainder chunks. Runs of blank lines are absorbed into
/// the preceding chunk (the following one at the start of a file). The chunks
/// tile lines 1..N exactly. Input the recognizer cannot balance is returned as
/// a single file_remainder chunk.
std::vector<CodeChunk> chunk_source(std::string_view text, LanguageId language,
                                    std::string_view repo_rel_path = {});

}  // namespace ctxeng::retrieval
