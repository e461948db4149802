#include "ctxeng/vector_index.hpp"

#include <algorithm>
#include <cstring>
#include <mutex>
#include <sstream>

#include "ctxeng/digest.hpp"
#include "ctxeng/error.hpp"
#include "ctxeng/text.hpp"

namespace ctxeng::retrieval {

namespace fs = std::filesystem;

namespace {

bool key_before(double sa, std::string_view pa, std::size_t la, std::string_view ia, double sb,
                std::string_view pb, std::size_t lb, std::string_view ib) noexcept {
    if (sa != sb) return sa > sb;
    if (pa != pb) return pa < pb;
    if (la != lb) return la < lb;
    return ia < ib;
}

void check_dims(std::size_t expected, std::size_t got) {
    if (expected != got) {
        throw Error(ErrorCode::InvalidArgument,
                    "vector has " + std::to_string(got) + " dims, index expects " + std::to_string(expected));
    }
}

std::string encode_floats(std::span<const float> values) {
    std::vector<std::uint8_t> bytes;
    bytes.reserve(values.size() * 4);
    for (float f : values) {
        std::uint32_t u = 0;
        std::memcpy(&u, &f, 4);
        for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<std::uint8_t>(u >> (8 * i)));
    }
    return base64_encode(bytes);
}

Vector decode_floats(std::string_view text) {
    const auto bytes = base64_decode(text);
    if (bytes.size() % 4 != 0) throw Error(ErrorCode::MalformedIndex, "vector byte length not a multiple of 4");
    Vector out(bytes.size() / 4);
    for (std::size_t k = 0; k < out.size(); ++k) {
        std::uint32_t u = 0;
        for (int i = 0; i < 4; ++i) u |= static_cast<std::uint32_t>(bytes[4 * k + i]) << (8 * i);
        std::memcpy(&out[k], &u, 4);
    }
    return out;
}

void check_field(std::string_view value, std::string_view what) {
    if (value.find_first_of("\t\n\r") != std::string_view::npos) {
        throw Error(ErrorCode::InvalidArgument, std::string(what) + " contains a tab or newline: " + std::string(value));
    }
}

}  // namespace

bool ranks_before(double score_a, const IndexRecord& a, double score_b, const IndexRecord& b) noexcept {
    return key_before(score_a, a.repo_rel_path, a.start_line, a.chunk_id, score_b, b.repo_rel_path, b.start_line,
                      b.chunk_id);
}

// --- MemoryIndex -----------------------------------------------------------

MemoryIndex::MemoryIndex(std::size_t dims) : dims_(dims) {
    if (dims_ == 0) throw Error(ErrorCode::InvalidArgument, "index dims must be positive");
}

void MemoryIndex::upsert(IndexRecord record) {
    check_dims(dims_, record.vector.size());
    std::unique_lock lock(mutex_);
    auto id = record.chunk_id;
    records_.insert_or_assign(std::move(id), std::move(record));
}

std::vector<ScoredId> MemoryIndex::query_nearest(const Vector& query, std::size_t k) const {
    check_dims(dims_, query.size());
    std::shared_lock lock(mutex_);
    std::vector<std::pair<double, const IndexRecord*>> scored;
    scored.reserve(records_.size());
    for (const auto& [id, rec] : records_) scored.emplace_back(cosine(query, rec.vector), &rec);
    const auto n = std::min(k, scored.size());
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(n), scored.end(),
                      [](const auto& x, const auto& y) { return ranks_before(x.first, *x.second, y.first, *y.second); });
    std::vector<ScoredId> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back({scored[i].second->chunk_id, scored[i].first});
    return out;
}

std::size_t MemoryIndex::count() const {
    std::shared_lock lock(mutex_);
    return records_.size();
}

std::vector<IndexRecord> MemoryIndex::records() const {
    std::shared_lock lock(mutex_);
    std::vector<IndexRecord> out;
    out.reserve(records_.size());
    for (const auto& [id, rec] : records_) out.push_back(rec);
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return ranks_before(0, a, 0, b); });
    return out;
}

// --- FileIndex -------------------------------------------------------------

FileIndex::FileIndex(fs::path dir, std::size_t dims, std::string embedder_id)
    : dir_(std::move(dir)), dims_(dims), embedder_id_(std::move(embedder_id)) {
    if (dims_ == 0) throw Error(ErrorCode::InvalidArgument, "index dims must be positive");
    check_field(embedder_id_, "embedder id");
}

FileIndex::FileIndex(FileIndex&& other) noexcept
    : dir_(std::move(other.dir_)),
      dims_(other.dims_),
      embedder_id_(std::move(other.embedder_id_)),
      matrix_(std::move(other.matrix_)),
      meta_(std::move(other.meta_)),
      row_of_(std::move(other.row_of_)) {}

void FileIndex::upsert(IndexRecord record) {
    check_dims(dims_, record.vector.size());
    check_field(record.chunk_id, "chunk id");
    check_field(record.repo_rel_path, "path");
    check_field(record.symbol_name, "symbol");
    std::unique_lock lock(mutex_);
    Meta meta{record.chunk_id, std::move(record.repo_rel_path), record.start_line, record.end_line, record.kind,
              std::move(record.symbol_name)};
    if (auto it = row_of_.find(record.chunk_id); it != row_of_.end()) {
        std::copy(record.vector.begin(), record.vector.end(), matrix_.begin() + static_cast<std::ptrdiff_t>(it->second * dims_));
        meta_[it->second] = std::move(meta);
        return;
    }
    row_of_.emplace(record.chunk_id, meta_.size());
    meta_.push_back(std::move(meta));
    matrix_.insert(matrix_.end(), record.vector.begin(), record.vector.end());
}

std::vector<ScoredId> FileIndex::query_nearest(const Vector& query, std::size_t k) const {
    check_dims(dims_, query.size());
    std::shared_lock lock(mutex_);
    std::vector<std::pair<double, std::size_t>> scored;
    scored.reserve(meta_.size());
    for (std::size_t row = 0; row < meta_.size(); ++row) {
        scored.emplace_back(cosine(query, std::span<const float>(matrix_.data() + row * dims_, dims_)), row);
    }
    const auto n = std::min(k, scored.size());
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(n), scored.end(),
                      [this](const auto& x, const auto& y) {
                          const auto& a = meta_[x.second];
                          const auto& b = meta_[y.second];
                          return key_before(x.first, a.repo_rel_path, a.start_line, a.chunk_id, y.first,
                                            b.repo_rel_path, b.start_line, b.chunk_id);
                      });
    std::vector<ScoredId> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back({meta_[scored[i].second].chunk_id, scored[i].first});
    return out;
}

std::size_t FileIndex::count() const {
    std::shared_lock lock(mutex_);
    return meta_.size();
}

IndexRecord FileIndex::record_at(std::size_t row) const {
    const auto& m = meta_[row];
    IndexRecord r;
    r.chunk_id = m.chunk_id;
    r.vector.assign(matrix_.begin() + static_cast<std::ptrdiff_t>(row * dims_),
                    matrix_.begin() + static_cast<std::ptrdiff_t>((row + 1) * dims_));
    r.repo_rel_path = m.repo_rel_path;
    r.start_line = m.start_line;
    r.end_line = m.end_line;
    r.kind = m.kind;
    r.symbol_name = m.symbol_name;
    return r;
}

std::vector<IndexRecord> FileIndex::records() const {
    std::shared_lock lock(mutex_);
    std::vector<IndexRecord> out;
    out.reserve(meta_.size());
    for (std::size_t row = 0; row < meta_.size(); ++row) out.push_back(record_at(row));
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return ranks_before(0, a, 0, b); });
    return out;
}

void FileIndex::persist() {
    const auto all = records();
    std::string body;
    for (const auto& r : all) {
        body += r.chunk_id;
        body += '\t';
        body += r.repo_rel_path;
        body += '\t';
        body += std::to_string(r.start_line) + "-" + std::to_string(r.end_line);
        body += '\t';
        body += to_string(r.kind);
        body += '\t';
        body += r.symbol_name;
        body += '\t';
        body += encode_floats(r.vector);
        body += '\n';
    }
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw Error(ErrorCode::IoError, "cannot create index directory " + dir_.string() + ": " + ec.message());
    write_file_atomic(dir_ / "records.tsv", body);
    write_file_atomic(dir_ / "manifest", "format=1\ndims=" + std::to_string(dims_) + "\ncount=" +
                                             std::to_string(all.size()) + "\nembedder=" + embedder_id_ + "\n");
}

FileIndex FileIndex::load(const fs::path& dir) {
    const auto manifest_path = dir / "manifest";
    const auto records_path = dir / "records.tsv";
    std::error_code ec;
    if (!fs::is_regular_file(manifest_path, ec) || !fs::is_regular_file(records_path, ec)) {
        throw Error(ErrorCode::NotFound, "no index in " + dir.string());
    }

    std::map<std::string, std::string> manifest;
    const auto manifest_text = read_file(manifest_path);
    std::size_t lineno = 0;
    for (auto line : split_lines(manifest_text)) {
        ++lineno;
        if (is_blank(line)) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw Error(ErrorCode::MalformedIndex,
                        manifest_path.string() + ":" + std::to_string(lineno) + ": expected key=value");
        }
        manifest[std::string(line.substr(0, eq))] = std::string(line.substr(eq + 1));
    }
    auto number = [&](const char* key) -> std::size_t {
        const auto it = manifest.find(key);
        if (it == manifest.end()) throw Error(ErrorCode::MalformedIndex, manifest_path.string() + ": missing " + key);
        try {
            std::size_t pos = 0;
            const auto v = std::stoull(it->second, &pos);
            if (pos != it->second.size()) throw std::invalid_argument(key);
            return static_cast<std::size_t>(v);
        } catch (const std::exception&) {
            throw Error(ErrorCode::MalformedIndex, manifest_path.string() + ": " + key + " is not a number");
        }
    };
    const auto dims = number("dims");
    const auto count = number("count");
    if (dims == 0) throw Error(ErrorCode::MalformedIndex, manifest_path.string() + ": dims must be positive");

    FileIndex index(dir, dims, manifest.count("embedder") ? manifest["embedder"] : std::string{});
    const auto text = read_file(records_path);
    lineno = 0;
    for (auto line : split_lines(text)) {
        ++lineno;
        const auto where = records_path.string() + ":" + std::to_string(lineno) + ": ";
        const auto fields = split(line, '\t');
        if (fields.size() != 6) throw Error(ErrorCode::MalformedIndex, where + "expected 6 tab-separated fields");
        IndexRecord r;
        r.chunk_id = fields[0];
        r.repo_rel_path = fields[1];
        const auto dash = fields[2].find('-');
        try {
            if (dash == std::string::npos) throw std::invalid_argument("lines");
            r.start_line = std::stoul(fields[2].substr(0, dash));
            r.end_line = std::stoul(fields[2].substr(dash + 1));
        } catch (const std::exception&) {
            throw Error(ErrorCode::MalformedIndex, where + "bad line range '" + fields[2] + "'");
        }
        const auto kind = chunk_kind_from(fields[3]);
        if (!kind) throw Error(ErrorCode::MalformedIndex, where + "unknown kind '" + fields[3] + "'");
        r.kind = *kind;
        r.symbol_name = fields[4];
        try {
            r.vector = decode_floats(fields[5]);
        } catch (const Error& e) {
            throw Error(ErrorCode::MalformedIndex, where + e.detail());
        }
        if (r.vector.size() != dims) {
            throw Error(ErrorCode::MalformedIndex, where + "vector has " + std::to_string(r.vector.size()) +
                                                       " dims, manifest says " + std::to_string(dims));
        }
        index.upsert(std::move(r));
    }
    if (index.count() != count) {
        throw Error(ErrorCode::MalformedIndex, manifest_path.string() + ": count=" + std::to_string(count) +
                                                   " but records file holds " + std::to_string(index.count()));
    }
    return index;
}

}  // namespace ctxeng::retrieval
