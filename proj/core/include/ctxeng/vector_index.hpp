#pragma once

#include <filesystem>
#include <map>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "ctxeng/chunker.hpp"
#include "ctxeng/embedder.hpp"

namespace ctxeng::retrieval {

struct IndexRecord {
    std::string chunk_id;
    Vector vector;
    std::string repo_rel_path;
    std::size_t start_line = 0;
    std::size_t end_line = 0;
    ChunkKind kind = ChunkKind::file_remainder;
    std::string symbol_name;

    bool operator==(const IndexRecord&) const = default;
};

struct ScoredId {
    std::string chunk_id;
    double score = 0.0;
};

/// Ranking used by every backend: score descending, then path, start line and
/// chunk id ascending.
bool ranks_before(double score_a, const IndexRecord& a, double score_b, const IndexRecord& b) noexcept;

/// Unified adapter over the vector-store backends. Reads may run
/// concurrently; upserts take an exclusive lock.
class VectorIndex {
public:
    virtual ~VectorIndex() = default;

    virtual std::size_t dims() const = 0;
    /// Inserts or replaces by chunk_id. Throws InvalidArgument on a dims mismatch.
    virtual void upsert(IndexRecord record) = 0;
    /// Exact cosine scan; at most k results in ranking order.
    virtual std::vector<ScoredId> query_nearest(const Vector& query, std::size_t k) const = 0;
    virtual std::size_t count() const = 0;
    /// All records in ranking-key order (path, start line, id).
    virtual std::vector<IndexRecord> records() const = 0;
    virtual void persist() = 0;
};

/// Volatile backend: records in a hash map, nothing persisted.
class MemoryIndex final : public VectorIndex {
public:
    explicit MemoryIndex(std::size_t dims);

    std::size_t dims() const override { return dims_; }
    void upsert(IndexRecord record) override;
    std::vector<ScoredId> query_nearest(const Vector& query, std::size_t k) const override;
    std::size_t count() const override;
    std::vector<IndexRecord> records() const override;
    void persist() override {}

private:
    std::size_t dims_;
    mutable std::shared_mutex mutex_;
    std::unordered_map<std::string, IndexRecord> records_;
};

/// File-backed backend: vectors in one contiguous row-major matrix. The
/// directory holds `records.tsv` (one record per line: chunk_id, path,
/// "start-end", kind, symbol, base64 of little-endian float32 values) and
/// `manifest` (dims, count, embedder id as key=value lines).
class FileIndex final : public VectorIndex {
public:
    /// Empty index that persists into `dir`.
    FileIndex(std::filesystem::path dir, std::size_t dims, std::string embedder_id);
    /// Throws Error{MalformedIndex} naming the file and line, or NotFound.
    static FileIndex load(const std::filesystem::path& dir);

    FileIndex(FileIndex&& other) noexcept;

    std::size_t dims() const override { return dims_; }
    const std::string& embedder_id() const noexcept { return embedder_id_; }
    const std::filesystem::path& directory() const noexcept { return dir_; }

    void upsert(IndexRecord record) override;
    std::vector<ScoredId> query_nearest(const Vector& query, std::size_t k) const override;
    std::size_t count() const override;
    std::vector<IndexRecord> records() const override;
    void persist() override;

private:
    struct Meta {
        std::string chunk_id;
        std::string repo_rel_path;
        std::size_t start_line = 0;
        std::size_t end_line = 0;
        ChunkKind kind = ChunkKind::file_remainder;
        std::string symbol_name;
    };
    IndexRecord record_at(std::size_t row) const;

    std::filesystem::path dir_;
    std::size_t dims_;
    std::string embedder_id_;
    mutable std::shared_mutex mutex_;
    std::vector<float> matrix_;
    std::vector<Meta> meta_;
    std::unordered_map<std::string, std::size_t> row_of_;
};

}  // namespace ctxeng::retrieval
