#include "ctxeng/knowledge.hpp"

#include <algorithm>
#include <cctype>
#include <nlohmann/json.hpp>

#include "ctxeng/digest.hpp"
#include "ctxeng/error.hpp"
#include "ctxeng/text.hpp"

namespace ctxeng::knowledge {

namespace fs = std::filesystem;

bool is_heading(std::string_view line) {
    const auto t = trim(line);
    if (t.empty()) return false;
    if (line.front() == '#') return !heading_text(line).empty();
    if (t.size() > 60) return false;
    bool letter = false;
    for (unsigned char c : t) {
        if (std::islower(c)) return false;
        if (std::isupper(c)) letter = true;
    }
    return letter;
}

std::string heading_text(std::string_view line) {
    auto t = trim(line);
    while (!t.empty() && t.front() == '#') t.remove_prefix(1);
    return std::string(trim(t));
}

namespace {

struct Section {
    std::string heading;
    std::vector<std::string_view> body;
};

/// Sections in document order; text before the first heading forms a
/// section with an empty heading.
std::vector<Section> sections_of(std::string_view text) {
    std::vector<Section> out(1);
    for (auto line : split_lines(text)) {
        if (is_heading(line)) {
            out.push_back({heading_text(line), {}});
        } else {
            out.back().body.push_back(line);
        }
    }
    return out;
}

/// Splits running text into sentences ending at '.', '!' or '?' followed by
/// whitespace or the end.
std::vector<std::string> sentences_of(std::string_view para) {
    std::vector<std::string> out;
    std::string cur;
    for (std::size_t i = 0; i < para.size(); ++i) {
        cur.push_back(para[i]);
        const char c = para[i];
        if ((c == '.' || c == '!' || c == '?') &&
            (i + 1 == para.size() || std::isspace(static_cast<unsigned char>(para[i + 1])))) {
            if (auto t = trim(cur); !t.empty()) out.emplace_back(t);
            cur.clear();
        }
    }
    if (auto t = trim(cur); !t.empty()) out.emplace_back(t);
    return out;
}

/// Paragraphs of a section body, each joined into one line.
std::vector<std::string> paragraphs_of(const std::vector<std::string_view>& body) {
    std::vector<std::string> out;
    std::string cur;
    for (auto line : body) {
        if (is_blank(line)) {
            if (!cur.empty()) out.push_back(std::move(cur));
            cur.clear();
            continue;
        }
        if (!cur.empty()) cur += ' ';
        cur += trim(line);
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

std::string first_sentence(const std::vector<std::string_view>& body) {
    for (const auto& p : paragraphs_of(body)) {
        auto s = sentences_of(p);
        if (!s.empty()) return s.front();
    }
    return {};
}

std::vector<std::string> all_sentences(const ExternalDoc& doc) {
    std::vector<std::string> out;
    for (const auto& sec : sections_of(doc.text)) {
        for (const auto& p : paragraphs_of(sec.body)) {
            for (auto& s : sentences_of(p)) out.push_back(std::move(s));
        }
    }
    return out;
}

std::string cap_bullet(std::string_view s) { return std::string(utf8_prefix(s, kMaxBulletBytes)); }

std::size_t overlap(const std::set<std::string>& a, const std::set<std::string>& b) {
    std::size_t n = 0;
    for (const auto& t : a) n += b.count(t);
    return n;
}

std::vector<std::string> message_contents(const provider::ProviderResponse& r) {
    std::vector<std::string> out;
    for (const auto& a : r.actions) {
        if (const auto* m = std::get_if<provider::Message>(&a)) out.push_back(m->content);
    }
    return out;
}

Answer extractive_answer(const KnowledgeSummary& summary, std::string_view question) {
    const auto q = content_terms(question);
    std::size_t best_doc = summary.docs.size();
    std::size_t best_doc_overlap = 0;
    std::size_t best_sentence_overlap = 0;
    std::string best_sentence;
    for (std::size_t i = 0; i < summary.docs.size(); ++i) {
        const auto doc_overlap = overlap(q, content_terms(summary.docs[i].text));
        if (doc_overlap == 0 || doc_overlap < best_doc_overlap) continue;
        std::size_t s_best = 0;
        std::string s_text;
        for (auto& s : all_sentences(summary.docs[i])) {
            const auto o = overlap(q, content_terms(s));
            if (o > s_best) {
                s_best = o;
                s_text = std::move(s);
            }
        }
        if (doc_overlap > best_doc_overlap || s_best > best_sentence_overlap) {
            best_doc = i;
            best_doc_overlap = doc_overlap;
            best_sentence_overlap = s_best;
            best_sentence = std::move(s_text);
        }
    }
    if (best_doc == summary.docs.size()) {
        throw Error(ErrorCode::NoRelevantDoc, "no summarized document shares a term with \"" + std::string(question) + "\"");
    }
    if (best_sentence.empty()) best_sentence = summary.docs[best_doc].title;
    return {best_sentence, summary.docs[best_doc].doc_id};
}

}  // namespace

std::vector<ExternalDoc> load_corpus(const fs::path& dir) {
    std::error_code ec;
    if (!fs::is_directory(dir, ec)) throw Error(ErrorCode::NotFound, "corpus directory " + dir.string() + " does not exist");
    std::vector<ExternalDoc> docs;
    for (const auto& rel : list_files(dir)) {
        auto text = normalize_newlines(read_file(dir / rel));
        if (is_blank(text) || looks_binary(text)) continue;
        ExternalDoc d;
        d.origin = rel;
        d.doc_id = short_digest(rel);
        for (auto line : split_lines(text)) {
            if (is_heading(line)) {
                d.title = heading_text(line);
                break;
            }
        }
        if (d.title.empty()) d.title = fs::path(rel).filename().string();
        d.text = std::move(text);
        docs.push_back(std::move(d));
    }
    return docs;
}

std::vector<ExternalDoc> rank_documents(const std::vector<ExternalDoc>& corpus, const std::vector<std::string>& terms,
                                        std::size_t k, const retrieval::Embedder& embedder) {
    if (corpus.empty()) throw Error(ErrorCode::EmptyCorpus, "corpus holds no documents");
    if (k == 0) throw Error(ErrorCode::InvalidArgument, "k must be at least 1");
    auto query = join(terms, " ");
    if (is_blank(query)) query = " ";
    const auto qv = embedder.embed(query);
    std::vector<std::pair<double, const ExternalDoc*>> scored;
    scored.reserve(corpus.size());
    for (const auto& d : corpus) scored.emplace_back(retrieval::cosine(qv, embedder.embed(d.text)), &d);
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second->origin < b.second->origin;
    });
    std::vector<ExternalDoc> out;
    for (std::size_t i = 0; i < std::min(k, scored.size()); ++i) out.push_back(*scored[i].second);
    return out;
}

std::vector<ExternalDoc> search_corpus(const fs::path& corpus_dir, const std::vector<std::string>& terms,
                                       std::size_t k, const retrieval::Embedder& embedder) {
    return rank_documents(load_corpus(corpus_dir), terms, k, embedder);
}

std::vector<std::string> extractive_toc(const ExternalDoc& doc) {
    std::vector<std::string> bullets;
    const auto secs = sections_of(doc.text);
    for (std::size_t i = 1; i < secs.size(); ++i) {
        const auto sentence = first_sentence(secs[i].body);
        bullets.push_back(cap_bullet(sentence.empty() ? secs[i].heading : secs[i].heading + ": " + sentence));
    }
    if (bullets.empty()) {
        const auto sentence = first_sentence(secs.front().body);
        bullets.push_back(cap_bullet(sentence.empty() ? doc.title : doc.title + ": " + sentence));
    }
    return bullets;
}

KnowledgeSummary synthesize(const std::vector<ExternalDoc>& docs, const std::vector<std::string>& questions,
                            const SynthesisOptions& options) {
    if (docs.empty()) throw Error(ErrorCode::EmptyCorpus, "nothing to synthesize");
    KnowledgeSummary summary;
    summary.docs = docs;
    auto* provider = options.provider;
    for (const auto& d : docs) {
        DocToc toc{d.doc_id, d.title, {}};
        if (provider != nullptr) {
            try {
                provider::ProviderRequest req;
                req.agent_name = options.agent_name;
                req.max_output_tokens = options.max_output_tokens;
                req.prompt = "Outline the key points of the document below as bullet lines starting with \"- \".\n\n"
                             "Title: " + d.title + "\nOrigin: " + d.origin + "\n\n" + d.text;
                for (const auto& content : message_contents(provider->complete(req))) {
                    for (auto line : split_lines(content)) {
                        const auto t = trim(line);
                        if (t.starts_with("- ")) toc.bullets.push_back(cap_bullet(trim(t.substr(2))));
                    }
                }
            } catch (const Error& e) {
                if (e.code() != ErrorCode::ProviderUnavailable) throw;
                provider = nullptr;
            }
        }
        if (toc.bullets.empty()) toc.bullets = extractive_toc(d);
        summary.toc.push_back(std::move(toc));
    }
    SynthesisOptions qa_options = options;
    qa_options.provider = provider;
    for (const auto& q : questions) {
        try {
            auto a = ask_followup(summary, q, qa_options);
            summary.qa_pairs.push_back({q, std::move(a.answer), std::move(a.doc_id)});
        } catch (const Error& e) {
            if (e.code() != ErrorCode::NoRelevantDoc) throw;
        }
    }
    return summary;
}

Answer ask_followup(const KnowledgeSummary& summary, std::string_view question, const SynthesisOptions& options) {
    if (summary.empty()) throw Error(ErrorCode::NoRelevantDoc, "summary holds no documents");
    auto fallback = extractive_answer(summary, question);
    if (options.provider == nullptr) return fallback;
    try {
        provider::ProviderRequest req;
        req.agent_name = options.agent_name;
        req.max_output_tokens = options.max_output_tokens;
        req.prompt = "Answer the question from exactly one of the documents below. Reply with JSON "
                     "{\"answer\": ..., \"doc_id\": ...}.\n\nQuestion: " + std::string(question) + "\n";
        for (const auto& d : render_summary(summary)) req.prompt += "\n[" + d.tag + "]\n" + d.content;
        for (const auto& content : message_contents(options.provider->complete(req))) {
            const auto j = nlohmann::json::parse(content, nullptr, false);
            if (!j.is_object() || !j.contains("answer") || !j.contains("doc_id")) continue;
            if (!j["answer"].is_string() || !j["doc_id"].is_string()) continue;
            Answer a{j["answer"].get<std::string>(), j["doc_id"].get<std::string>()};
            const bool cited = std::any_of(summary.docs.begin(), summary.docs.end(),
                                           [&](const auto& d) { return d.doc_id == a.doc_id; });
            if (cited && !is_blank(a.answer)) return a;
        }
    } catch (const Error& e) {
        if (e.code() != ErrorCode::ProviderUnavailable) throw;
    }
    return fallback;
}

std::vector<RenderedDoc> render_summary(const KnowledgeSummary& summary) {
    std::vector<RenderedDoc> out;
    for (std::size_t i = 0; i < summary.docs.size(); ++i) {
        const auto& d = summary.docs[i];
        std::string text = d.title + " (" + d.origin + ", id " + d.doc_id + ")\n";
        if (i < summary.toc.size()) {
            for (const auto& b : summary.toc[i].bullets) text += "- " + b + "\n";
        }
        for (const auto& qa : summary.qa_pairs) {
            if (qa.doc_id != d.doc_id) continue;
            text += "Q: " + qa.question + "\nA: " + qa.answer + "\n";
        }
        out.push_back({"doc:" + d.origin, std::move(text)});
    }
    return out;
}

}  // namespace ctxeng::knowledge
