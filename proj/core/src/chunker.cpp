#include "ctxeng/chunker.hpp"

#include <algorithm>
#include <cctype>
#include <regex>

#include "ctxeng/digest.hpp"
#include "ctxeng/error.hpp"
#include "ctxeng/text.hpp"

namespace ctxeng::retrieval {

std::string_view to_string(LanguageId id) noexcept {
    switch (id) {
        case LanguageId::c: return "c";
        case LanguageId::cpp: return "cpp";
        case LanguageId::java: return "java";
        case LanguageId::javascript: return "javascript";
        case LanguageId::typescript: return "typescript";
        case LanguageId::go: return "go";
        case LanguageId::rust: return "rust";
        case LanguageId::python: return "python";
    }
    return "";
}

LanguageId language_from_name(std::string_view name) {
    for (auto id : {LanguageId::c, LanguageId::cpp, LanguageId::java, LanguageId::javascript,
                    LanguageId::typescript, LanguageId::go, LanguageId::rust, LanguageId::python}) {
        if (to_string(id) == name) return id;
    }
    throw Error(ErrorCode::UnsupportedLanguage, "no boundary grammar for '" + std::string(name) + "'");
}

std::optional<LanguageId> language_for_path(std::string_view path) {
    const auto dot = path.rfind('.');
    if (dot == std::string_view::npos) return std::nullopt;
    const auto ext = to_lower(path.substr(dot + 1));
    if (ext == "c") return LanguageId::c;
    if (ext == "h" || ext == "cc" || ext == "cpp" || ext == "cxx" || ext == "hpp" || ext == "hh" || ext == "hxx") {
        return LanguageId::cpp;
    }
    if (ext == "java") return LanguageId::java;
    if (ext == "js" || ext == "jsx" || ext == "mjs" || ext == "cjs") return LanguageId::javascript;
    if (ext == "ts" || ext == "tsx" || ext == "mts" || ext == "cts") return LanguageId::typescript;
    if (ext == "go") return LanguageId::go;
    if (ext == "rs") return LanguageId::rust;
    if (ext == "py") return LanguageId::python;
    return std::nullopt;
}

std::string_view to_string(ChunkKind kind) noexcept {
    switch (kind) {
        case ChunkKind::function: return "function";
        case ChunkKind::type_definition: return "type_definition";
        case ChunkKind::file_remainder: return "file_remainder";
    }
    return "";
}

std::optional<ChunkKind> chunk_kind_from(std::string_view name) noexcept {
    for (auto k : {ChunkKind::function, ChunkKind::type_definition, ChunkKind::file_remainder}) {
        if (to_string(k) == name) return k;
    }
    return std::nullopt;
}

std::string make_chunk_id(std::string_view path, std::size_t start_line, std::size_t end_line) {
    return short_digest(std::string(path) + ":" + std::to_string(start_line) + ":" + std::to_string(end_line));
}

namespace {

BoundaryGrammar make_c() {
    BoundaryGrammar g;
    g.type_keywords = {"struct", "union", "enum"};
    g.alias_keywords = {"typedef"};
    g.modifiers = {"static", "inline", "const", "volatile", "unsigned", "signed", "register", "_Noreturn"};
    g.namespace_keywords = {"extern"};
    g.c_style_functions = true;
    g.preprocessor_lines = true;
    return g;
}

BoundaryGrammar make_cpp() {
    BoundaryGrammar g = make_c();
    g.type_keywords = {"class", "struct", "union", "enum"};
    g.modifiers = {"static", "inline", "virtual", "explicit", "constexpr", "consteval", "friend",
                   "const", "volatile", "unsigned", "signed", "template"};
    g.namespace_keywords = {"namespace", "extern"};
    return g;
}

BoundaryGrammar make_java() {
    BoundaryGrammar g;
    g.type_keywords = {"class", "interface", "enum", "record"};
    g.modifiers = {"public", "private", "protected", "static", "final", "abstract", "sealed", "strictfp"};
    return g;
}

BoundaryGrammar make_js() {
    BoundaryGrammar g;
    g.type_keywords = {"class", "interface", "enum"};
    g.function_keywords = {"function"};
    g.alias_keywords = {"type"};
    g.modifiers = {"export", "default", "declare", "abstract", "async"};
    g.namespace_keywords = {"namespace", "module"};
    g.arrow_functions = true;
    g.single_quote_strings = true;
    g.backtick_strings = true;
    return g;
}

BoundaryGrammar make_go() {
    BoundaryGrammar g;
    g.function_keywords = {"func"};
    g.alias_keywords = {"type"};
    g.backtick_strings = true;
    return g;
}

BoundaryGrammar make_rust() {
    BoundaryGrammar g;
    g.type_keywords = {"struct", "enum", "trait", "impl", "union"};
    g.function_keywords = {"fn"};
    g.alias_keywords = {"type", "struct"};
    g.modifiers = {"pub", "unsafe", "async", "const", "default", "extern"};
    g.namespace_keywords = {"mod"};
    return g;
}

BoundaryGrammar make_python() {
    BoundaryGrammar g;
    g.blocks = BoundaryGrammar::Blocks::indentation;
    g.type_keywords = {"class"};
    g.function_keywords = {"def"};
    g.modifiers = {"async"};
    g.single_quote_strings = true;
    g.hash_comments = true;
    g.triple_quote_strings = true;
    return g;
}

/// Statements in these languages may end at a newline; definitions without
/// an opening brace by the end of their signature are declarations.
bool newline_terminated(LanguageId id) {
    return id == LanguageId::go || id == LanguageId::javascript || id == LanguageId::typescript;
}

bool contains(const std::vector<std::string>& v, std::string_view s) {
    return std::find(v.begin(), v.end(), s) != v.end();
}

// ---------------------------------------------------------------------------
// Lexing: blank out comments and string contents so brace counting only sees
// code. State carries across lines for block comments and multi-line strings.

class Lexer {
public:
    explicit Lexer(const BoundaryGrammar& g) : g_(g) {}

    bool in_multiline() const { return mode_ != Mode::code; }

    std::string sanitize(std::string_view line) {
        std::string out(line.size(), ' ');
        std::size_t i = 0;
        const auto first = line.find_first_not_of(" \t");
        while (i < line.size()) {
            switch (mode_) {
                case Mode::block_comment: {
                    const auto end = line.find("*/", i);
                    if (end == std::string_view::npos) return out;
                    i = end + 2;
                    mode_ = Mode::code;
                    continue;
                }
                case Mode::backtick: {
                    const auto end = find_unescaped(line, i, '`');
                    if (end == std::string_view::npos) return out;
                    i = end + 1;
                    mode_ = Mode::code;
                    continue;
                }
                case Mode::triple_double:
                case Mode::triple_single: {
                    const auto end = line.find(mode_ == Mode::triple_double ? "\"\"\"" : "'''", i);
                    if (end == std::string_view::npos) return out;
                    i = end + 3;
                    mode_ = Mode::code;
                    continue;
                }
                case Mode::code: break;
            }
            const char c = line[i];
            const auto rest = line.substr(i);
            if (g_.preprocessor_lines && c == '#' && i == first) return out;
            if (g_.hash_comments && c == '#') return out;
            if (!g_.hash_comments && rest.starts_with("//")) return out;
            if (!g_.hash_comments && rest.starts_with("/*")) {
                mode_ = Mode::block_comment;
                i += 2;
                continue;
            }
            if (g_.triple_quote_strings && (rest.starts_with("\"\"\"") || rest.starts_with("'''"))) {
                mode_ = c == '"' ? Mode::triple_double : Mode::triple_single;
                i += 3;
                continue;
            }
            if (c == '"' || (c == '\'' && g_.single_quote_strings)) {
                const auto end = find_unescaped(line, i + 1, c);
                if (end == std::string_view::npos) return out;  // unterminated: ends at EOL
                i = end + 1;
                continue;
            }
            if (c == '\'') {
                i = skip_char_literal(line, i);
                continue;
            }
            if (c == '`' && g_.backtick_strings) {
                mode_ = Mode::backtick;
                ++i;
                continue;
            }
            out[i] = c;
            ++i;
        }
        return out;
    }

private:
    enum class Mode { code, block_comment, backtick, triple_double, triple_single };

    static std::size_t find_unescaped(std::string_view s, std::size_t from, char quote) {
        for (std::size_t i = from; i < s.size(); ++i) {
            if (s[i] == '\\') {
                ++i;
            } else if (s[i] == quote) {
                return i;
            }
        }
        return std::string_view::npos;
    }

    /// Returns the index after a char literal at `i`, or i + 1 when the quote
    /// is not one (a Rust lifetime, for instance).
    static std::size_t skip_char_literal(std::string_view s, std::size_t i) {
        if (i + 1 < s.size() && s[i + 1] == '\\') {
            const auto end = s.find('\'', i + 2);
            if (end != std::string_view::npos && end - i <= 12) return end + 1;
            return i + 1;
        }
        std::size_t len = 1;
        if (i + 1 < s.size()) {
            const auto lead = static_cast<unsigned char>(s[i + 1]);
            if (lead >= 0xF0) {
                len = 4;
            } else if (lead >= 0xE0) {
                len = 3;
            } else if (lead >= 0xC0) {
                len = 2;
            }
        }
        if (i + 1 + len < s.size() && s[i + 1 + len] == '\'') return i + 2 + len;
        return i + 1;
    }

    const BoundaryGrammar& g_;
    Mode mode_ = Mode::code;
};

// ---------------------------------------------------------------------------
// Definition recognition on a single sanitized, trimmed line.

struct Definition {
    ChunkKind kind = ChunkKind::function;
    std::string symbol;
    bool alias = false;      // may end without a body
    bool is_namespace = false;
};

std::string_view skip_ws(std::string_view s) {
    const auto p = s.find_first_not_of(" \t");
    return p == std::string_view::npos ? std::string_view{} : s.substr(p);
}

bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '$'; }

std::string_view leading_word(std::string_view s) {
    std::size_t n = 0;
    while (n < s.size() && ident_char(s[n])) ++n;
    return s.substr(0, n);
}

/// Skips a balanced bracket group starting at s[0] (one of '(' '<' '[').
std::string_view skip_group(std::string_view s) {
    if (s.empty()) return s;
    const char open = s[0];
    const char close = open == '(' ? ')' : open == '<' ? '>' : ']';
    int depth = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == open) ++depth;
        if (s[i] == close && --depth == 0) return s.substr(i + 1);
    }
    return {};
}

std::string first_identifier(std::string_view s) {
    s = skip_ws(s);
    while (!s.empty() && (s[0] == '*' || s[0] == '&')) s = skip_ws(s.substr(1));
    return std::string(leading_word(s));
}

std::string_view strip_modifiers(std::string_view s, const BoundaryGrammar& g) {
    while (true) {
        s = skip_ws(s);
        if (s.starts_with("[[")) {
            const auto end = s.find("]]");
            if (end == std::string_view::npos) return s;
            s = s.substr(end + 2);
            continue;
        }
        const auto w = leading_word(s);
        if (w.empty() || !contains(g.modifiers, w)) return s;
        auto rest = skip_ws(s.substr(w.size()));
        if (w == "template" || w == "pub") {
            if (!rest.empty() && (rest[0] == '<' || rest[0] == '(')) rest = skip_group(rest);
        }
        // `const enum` / `const fn` keep going; a bare `const NAME` does not.
        if (w == "const" && g.arrow_functions) {
            if (leading_word(rest) != "enum") return s;
        }
        s = rest;
    }
}

const std::regex& c_function_regex() {
    static const std::regex re(
        R"(^([A-Za-z_][\w\s\*&:<>,\[\]]*?[\s\*&>])?(~?[A-Za-z_]\w*(?:::~?[A-Za-z_]\w*|::operator\S+)*)\s*\()");
    return re;
}

const std::regex& arrow_regex() {
    static const std::regex re(
        R"(^(?:const|let|var)\s+([A-Za-z_$][\w$]*)[^=]*=\s*(?:async\s+)?(?:function\b|.*=>))");
    return re;
}

bool is_control_word(std::string_view w) {
    static constexpr std::string_view kControl[] = {
        "if", "for", "while", "switch", "return", "else", "do", "case", "sizeof", "catch", "new",
        "delete", "throw", "goto", "typedef", "using", "static_assert", "co_return", "co_await"};
    return std::find(std::begin(kControl), std::end(kControl), w) != std::end(kControl);
}

std::optional<Definition> detect_definition(std::string_view line, const BoundaryGrammar& g) {
    auto s = strip_modifiers(line, g);
    const auto w = leading_word(s);
    if (w.empty()) return std::nullopt;
    auto rest = s.substr(w.size());

    if (contains(g.namespace_keywords, w)) {
        Definition d;
        d.is_namespace = true;
        return d;
    }
    if (contains(g.type_keywords, w) || contains(g.alias_keywords, w)) {
        Definition d;
        d.kind = ChunkKind::type_definition;
        d.alias = contains(g.alias_keywords, w);
        auto after = skip_ws(rest);
        if (w == "enum" && (leading_word(after) == "class" || leading_word(after) == "struct")) {
            after = after.substr(leading_word(after).size());
        }
        if (w == "impl") {
            after = skip_ws(after);
            if (after.starts_with("<")) after = skip_group(after);
            const auto for_pos = after.find(" for ");
            if (for_pos != std::string_view::npos) after = after.substr(for_pos + 5);
        }
        if (w == "typedef") {
            // typedef … Name; -> last identifier before ';' when it is on this line
            const auto semi = after.find(';');
            if (semi != std::string_view::npos) {
                auto head = after.substr(0, semi);
                std::size_t e = head.size();
                while (e > 0 && !ident_char(head[e - 1])) --e;
                std::size_t b = e;
                while (b > 0 && ident_char(head[b - 1])) --b;
                d.symbol = std::string(head.substr(b, e - b));
            }
            return d;
        }
        d.symbol = first_identifier(after);
        if (d.symbol.empty() && w != "impl") return std::nullopt;
        return d;
    }
    if (contains(g.function_keywords, w)) {
        Definition d;
        auto after = skip_ws(rest);
        if (after.starts_with("*")) after = skip_ws(after.substr(1));
        if (w == "func" && after.starts_with("(")) after = skip_ws(skip_group(after));  // Go receiver
        d.symbol = first_identifier(after);
        return d;
    }
    if (g.arrow_functions && (w == "const" || w == "let" || w == "var")) {
        std::match_results<std::string_view::const_iterator> m;
        if (std::regex_search(s.begin(), s.end(), m, arrow_regex())) {
            Definition d;
            d.symbol = m[1].str();
            return d;
        }
        return std::nullopt;
    }
    if (g.c_style_functions && !is_control_word(w)) {
        std::match_results<std::string_view::const_iterator> m;
        if (std::regex_search(s.begin(), s.end(), m, c_function_regex())) {
            const auto name = m[2].str();
            const bool has_return_type = m[1].matched && !is_blank(m[1].str());
            const bool qualified = name.find("::") != std::string::npos;
            const auto before_paren = std::string_view(s).substr(0, static_cast<std::size_t>(m.length(0)));
            if ((has_return_type || qualified) && before_paren.find('=') == std::string_view::npos) {
                Definition d;
                d.symbol = name;
                return d;
            }
        }
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Segmentation.

struct Segment {
    std::size_t first = 0;  // 0-based line indices, inclusive
    std::size_t last = 0;
    ChunkKind kind = ChunkKind::file_remainder;
    std::string symbol;
};

bool ends_with_continuation(std::string_view code) {
    const auto t = trim(code);
    if (t.empty()) return true;
    static constexpr std::string_view kCont = "=|&,(<:+-*/?.";
    return kCont.find(t.back()) != std::string_view::npos;
}

std::optional<std::vector<Segment>> segment_braces(const std::vector<std::string>& code,
                                                   const std::vector<bool>& blank, const BoundaryGrammar& g,
                                                   bool nl_terminated) {
    const std::size_t n = code.size();
    std::vector<Segment> segs;
    std::vector<bool> scopes;  // true = namespace-like (body stays top level)
    int parens = 0;
    auto at_top = [&] { return std::all_of(scopes.begin(), scopes.end(), [](bool t) { return t; }); };
    auto remainder = [&](std::size_t a, std::size_t b) { segs.push_back({a, b, ChunkKind::file_remainder, {}}); };
    // Applies every bracket on the line; false on an unmatched '}'.
    auto apply = [&](const std::string& line, bool transparent_open) {
        for (char c : line) {
            if (c == '(') {
                ++parens;
            } else if (c == ')') {
                parens = std::max(0, parens - 1);
            } else if (c == '{') {
                scopes.push_back(transparent_open);
                transparent_open = false;
            } else if (c == '}') {
                if (scopes.empty()) return false;
                scopes.pop_back();
            }
        }
        return true;
    };

    std::size_t i = 0;
    while (i < n) {
        if (blank[i] || !at_top() || parens > 0) {
            if (!apply(code[i], false)) return std::nullopt;
            remainder(i, i);
            ++i;
            continue;
        }
        auto def = detect_definition(trim(code[i]), g);
        if (!def || def->is_namespace) {
            const auto opens = std::count(code[i].begin(), code[i].end(), '{');
            const auto closes = std::count(code[i].begin(), code[i].end(), '}');
            const bool transparent = def && def->is_namespace && opens - closes == 1;
            if (!apply(code[i], transparent)) return std::nullopt;
            remainder(i, i);
            ++i;
            continue;
        }

        const std::size_t base = scopes.size();
        int p = 0;
        bool opened = false;
        bool ended = false;
        bool aborted = false;
        std::size_t j = i;
        for (; j < n && !ended && !aborted; ++j) {
            for (char c : code[j]) {
                if (c == '(') {
                    ++p;
                } else if (c == ')') {
                    p = std::max(0, p - 1);
                } else if (c == '{') {
                    scopes.push_back(false);
                    opened = true;
                } else if (c == '}') {
                    if (scopes.size() <= base) return std::nullopt;
                    scopes.pop_back();
                    if (opened && scopes.size() == base) ended = true;
                } else if (c == ';' && !opened && p == 0) {
                    (def->alias ? ended : aborted) = true;
                }
                if (ended || aborted) break;
            }
            if (!ended && !aborted && !opened && nl_terminated && p == 0 && !ends_with_continuation(code[j])) {
                const bool next_continues = j + 1 < n && (trim(code[j + 1]).starts_with("|") ||
                                                          trim(code[j + 1]).starts_with("&") ||
                                                          trim(code[j + 1]).starts_with("{"));
                if (!next_continues) (def->alias ? ended : aborted) = true;
            }
            if (ended || aborted) break;
        }
        if (!ended && !aborted) {
            if (opened) return std::nullopt;  // body never closed
            j = n - 1;
            aborted = true;
        }
        if (ended) {
            segs.push_back({i, j, def->kind, def->symbol});
        } else {
            remainder(i, j);
        }
        i = j + 1;
    }
    if (!scopes.empty()) return std::nullopt;
    return segs;
}

std::size_t indent_of(std::string_view line) {
    std::size_t n = 0;
    while (n < line.size() && (line[n] == ' ' || line[n] == '\t')) ++n;
    return n;
}

std::optional<std::vector<Segment>> segment_indentation(const std::vector<std::string_view>& raw,
                                                        const std::vector<std::string>& code,
                                                        const std::vector<bool>& starts_in_string,
                                                        const BoundaryGrammar& g) {
    const std::size_t n = raw.size();
    // A logical top-level statement starts on a non-blank, unindented line
    // that is not inside a bracket group, a string, or a '\' continuation.
    std::vector<bool> top(n, false);
    int brackets = 0;
    bool backslash = false;
    for (std::size_t i = 0; i < n; ++i) {
        const bool continuation = brackets > 0 || backslash || starts_in_string[i];
        if (!continuation && !is_blank(raw[i]) && indent_of(raw[i]) == 0) top[i] = true;
        if (!continuation && !is_blank(raw[i]) && indent_of(raw[i]) > 0) {
            bool any_top_before = false;
            for (std::size_t k = 0; k < i && !any_top_before; ++k) any_top_before = top[k];
            if (!any_top_before) return std::nullopt;  // indented first statement
        }
        for (char c : code[i]) {
            if (c == '(' || c == '[' || c == '{') ++brackets;
            if (c == ')' || c == ']' || c == '}') --brackets;
        }
        if (brackets < 0) return std::nullopt;
        const auto t = trim(code[i]);
        backslash = !t.empty() && t.back() == '\\';
    }
    if (brackets != 0) return std::nullopt;

    std::vector<Segment> segs;
    std::size_t i = 0;
    // Leading lines before the first statement are blank (checked above).
    while (i < n && !top[i]) ++i;
    if (i > 0) segs.push_back({0, i - 1, ChunkKind::file_remainder, {}});
    while (i < n) {
        std::size_t start = i;
        // Decorators attach to the following def/class.
        while (i < n && trim(code[i]).starts_with("@")) {
            std::size_t k = i + 1;
            while (k < n && !top[k]) ++k;
            if (k >= n) break;
            i = k;
        }
        std::size_t next = i + 1;
        while (next < n && !top[next]) ++next;
        auto s = strip_modifiers(trim(code[i]), g);
        const auto w = leading_word(s);
        Segment seg{start, next - 1, ChunkKind::file_remainder, {}};
        if (contains(g.function_keywords, w) || contains(g.type_keywords, w)) {
            seg.kind = contains(g.function_keywords, w) ? ChunkKind::function : ChunkKind::type_definition;
            seg.symbol = first_identifier(s.substr(w.size()));
        }
        segs.push_back(std::move(seg));
        i = next;
    }
    return segs;
}

std::vector<Segment> normalize(std::vector<Segment> segs, const std::vector<bool>& blank) {
    std::vector<Segment> merged;
    for (auto& s : segs) {
        if (!merged.empty() && merged.back().kind == ChunkKind::file_remainder &&
            s.kind == ChunkKind::file_remainder) {
            merged.back().last = s.last;
        } else {
            merged.push_back(std::move(s));
        }
    }
    auto blank_only = [&](const Segment& s) {
        for (std::size_t i = s.first; i <= s.last; ++i) {
            if (!blank[i]) return false;
        }
        return true;
    };
    std::vector<Segment> out;
    for (std::size_t k = 0; k < merged.size(); ++k) {
        auto& s = merged[k];
        if (s.kind == ChunkKind::file_remainder && blank_only(s) && merged.size() > 1) {
            if (!out.empty()) {
                out.back().last = s.last;
            } else {
                merged[k + 1].first = s.first;
            }
            continue;
        }
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace

const BoundaryGrammar& grammar_for(LanguageId id) {
    static const BoundaryGrammar c = make_c(), cpp = make_cpp(), java = make_java(), js = make_js(),
                                 go = make_go(), rust = make_rust(), python = make_python();
    switch (id) {
        case LanguageId::c: return c;
        case LanguageId::cpp: return cpp;
        case LanguageId::java: return java;
        case LanguageId::javascript:
        case LanguageId::typescript: return js;
        case LanguageId::go: return go;
        case LanguageId::rust: return rust;
        case LanguageId::python: return python;
    }
    throw Error(ErrorCode::UnsupportedLanguage, "no boundary grammar");
}

std::vector<CodeChunk> chunk_source(std::string_view text, LanguageId language, std::string_view path) {
    const auto& g = grammar_for(language);
    const auto lines = split_lines(text);
    const std::size_t n = lines.size();
    if (n == 0) return {};

    Lexer lexer(g);
    std::vector<std::string> code;
    std::vector<bool> blank;
    std::vector<bool> starts_in_string;
    code.reserve(n);
    for (const auto line : lines) {
        starts_in_string.push_back(lexer.in_multiline());
        code.push_back(lexer.sanitize(line));
        blank.push_back(is_blank(line));
    }

    std::optional<std::vector<Segment>> segs;
    if (!lexer.in_multiline()) {
        segs = g.blocks == BoundaryGrammar::Blocks::braces
                   ? segment_braces(code, blank, g, newline_terminated(language))
                   : segment_indentation(lines, code, starts_in_string, g);
    }
    std::vector<Segment> final_segs =
        segs ? normalize(std::move(*segs), blank) : std::vector<Segment>{{0, n - 1, ChunkKind::file_remainder, {}}};

    // Byte offsets of each line start, to slice verbatim text.
    std::vector<std::size_t> offset(n + 1, text.size());
    for (std::size_t i = 0; i < n; ++i) offset[i] = static_cast<std::size_t>(lines[i].data() - text.data());

    std::vector<CodeChunk> chunks;
    chunks.reserve(final_segs.size());
    for (auto& s : final_segs) {
        CodeChunk c;
        c.repo_rel_path = std::string(path);
        c.start_line = s.first + 1;
        c.end_line = s.last + 1;
        c.kind = s.kind;
        c.symbol_name = std::move(s.symbol);
        c.text = std::string(text.substr(offset[s.first], offset[s.last + 1] - offset[s.first]));
        c.chunk_id = make_chunk_id(path, c.start_line, c.end_line);
        chunks.push_back(std::move(c));
    }
    return chunks;
}

}  // namespace ctxeng::retrieval
