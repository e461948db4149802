#pragma once

#include <chrono>
#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ctxeng::retrieval {

using Vector = std::vector<float>;

/// Cosine similarity in double precision. Zero vectors score 0.
double cosine(std::span<const float> a, std::span<const float> b) noexcept;

/// Scales `v` to unit L2 norm; a zero vector is left unchanged.
void l2_normalize(Vector& v) noexcept;

/// Text -> unit-norm vector of a fixed, declared dimensionality.
class Embedder {
public:
    virtual ~Embedder() = default;
    virtual std::string id() const = 0;
    virtual std::size_t dims() const = 0;
    /// Throws Error{InvalidArgument} on empty text.
    virtual Vector embed(std::string_view text) const = 0;
};

/// Deterministic feature-hashing embedder: lowercased character trigrams
/// (whitespace runs collapsed) hashed with FNV-1a into `dims` signed buckets,
/// sublinear term frequency, L2-normalized.
class NgramEmbedder final : public Embedder {
public:
    explicit NgramEmbedder(std::size_t dims = 256, std::size_t n = 3);

    std::string id() const override;
    std::size_t dims() const override { return dims_; }
    Vector embed(std::string_view text) const override;

private:
    std::size_t dims_;
    std::size_t n_;
};

/// Client for an OpenAI-compatible `POST /v1/embeddings` endpoint. Any
/// transport or protocol failure raises Error{ProviderUnavailable}.
class HttpEmbedder final : public Embedder {
public:
    struct Options {
        std::string host = "127.0.0.1";
        int port = 8080;
        std::string model = "text-embedding-3-small";
        std::string api_key;
        std::size_t dims = 0;  // 0: whatever the first response declares
        std::chrono::seconds timeout{30};
    };

    explicit HttpEmbedder(Options options);

    std::string id() const override;
    std::size_t dims() const override;
    Vector embed(std::string_view text) const override;

private:
    Options options_;
    mutable std::size_t dims_;
};

}  // namespace ctxeng::retrieval
