#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "ctxeng/embedder.hpp"
#include "ctxeng/provider.hpp"

namespace ctxeng::knowledge {

inline constexpr std::size_t kMaxBulletBytes = 200;

struct ExternalDoc {
    std::string doc_id;  // short digest of origin
    std::string title;   // first heading, else file name
    std::string origin;  // corpus-relative path
    std::string text;

    bool operator==(const ExternalDoc&) const = default;
};

/// A line starting with '#', or an all-caps line of at most 60 characters.
bool is_heading(std::string_view line);
/// Heading text without leading '#' marks and surrounding space.
std::string heading_text(std::string_view line);

/// Every non-blank text file in `dir`, ordered by origin. Throws NotFound
/// when the directory is missing.
std::vector<ExternalDoc> load_corpus(const std::filesystem::path& dir);

/// Ranks documents by cosine between the embedded joined terms and the
/// embedded document text; ties go to the smaller origin. Returns the top
/// min(k, corpus size). Throws EmptyCorpus.
std::vector<ExternalDoc> rank_documents(const std::vector<ExternalDoc>& corpus,
                                        const std::vector<std::string>& terms, std::size_t k,
                                        const retrieval::Embedder& embedder);
std::vector<ExternalDoc> search_corpus(const std::filesystem::path& corpus_dir,
                                       const std::vector<std::string>& terms, std::size_t k,
                                       const retrieval::Embedder& embedder);

struct DocToc {
    std::string doc_id;
    std::string title;
    std::vector<std::string> bullets;  // each at most kMaxBulletBytes

    bool operator==(const DocToc&) const = default;
};

struct QaPair {
    std::string question;
    std::string answer;
    std::string doc_id;

    bool operator==(const QaPair&) const = default;
};

struct KnowledgeSummary {
    std::vector<ExternalDoc> docs;  // the searched set, in rank order
    std::vector<DocToc> toc;        // parallel to docs
    std::vector<QaPair> qa_pairs;

    bool empty() const noexcept { return docs.empty(); }
    bool operator==(const KnowledgeSummary&) const = default;
};

/// Extractive TOC: one bullet per heading, "heading: first sentence of the
/// section", in document order. A document without headings yields one
/// bullet from its title and first sentence.
std::vector<std::string> extractive_toc(const ExternalDoc& doc);

struct SynthesisOptions {
    provider::Provider* provider = nullptr;  // null: extractive only
    std::string agent_name = "knowledge-synthesizer";
    std::size_t max_output_tokens = 1024;
};

/// TOC per document plus one attributed answer per question. Provider
/// failures (ProviderUnavailable) degrade to extractive mode. Questions that
/// share no terms with any document are left out.
KnowledgeSummary synthesize(const std::vector<ExternalDoc>& docs, const std::vector<std::string>& questions,
                            const SynthesisOptions& options = {});

struct Answer {
    std::string answer;
    std::string doc_id;

    bool operator==(const Answer&) const = default;
};

/// Picks the document with the largest question-term overlap (then the best
/// single-sentence overlap, then rank order) and answers with its sentence of
/// maximal overlap. With a provider, the provider's answer is used when it
/// cites a summarized document. Throws NoRelevantDoc.
Answer ask_followup(const KnowledgeSummary& summary, std::string_view question,
                    const SynthesisOptions& options = {});

/// Text for one L2 entry per document: title, origin, bullets, and the Q&A
/// pairs attributed to that document.
struct RenderedDoc {
    std::string tag;  // "doc:<origin>"
    std::string content;
};
std::vector<RenderedDoc> render_summary(const KnowledgeSummary& summary);

}  // namespace ctxeng::knowledge
