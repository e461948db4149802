#include "ctxeng/embedder.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <unordered_map>

#include "ctxeng/digest.hpp"
#include "ctxeng/error.hpp"

namespace ctxeng::retrieval {

double cosine(std::span<const float> a, std::span<const float> b) noexcept {
    const auto n = std::min(a.size(), b.size());
    double dot = 0.0;
    double na = 0.0;
    double nb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        dot += static_cast<double>(a[i]) * b[i];
        na += static_cast<double>(a[i]) * a[i];
        nb += static_cast<double>(b[i]) * b[i];
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

void l2_normalize(Vector& v) noexcept {
    double sum = 0.0;
    for (float x : v) sum += static_cast<double>(x) * x;
    if (sum == 0.0) return;
    const double inv = 1.0 / std::sqrt(sum);
    for (auto& x : v) x = static_cast<float>(x * inv);
}

NgramEmbedder::NgramEmbedder(std::size_t dims, std::size_t n) : dims_(dims), n_(n) {
    if (dims_ == 0 || n_ == 0) throw Error(ErrorCode::InvalidArgument, "embedder dims and n must be positive");
}

std::string NgramEmbedder::id() const { return "ngram" + std::to_string(n_) + "-" + std::to_string(dims_); }

Vector NgramEmbedder::embed(std::string_view text) const {
    if (text.empty()) throw Error(ErrorCode::InvalidArgument, "cannot embed empty text");

    std::string norm;
    norm.reserve(text.size());
    bool space = false;
    for (unsigned char c : text) {
        if (std::isspace(c)) {
            space = !norm.empty();
            continue;
        }
        if (space) norm.push_back(' ');
        space = false;
        norm.push_back(static_cast<char>(std::tolower(c)));
    }
    if (norm.empty()) norm = " ";

    std::unordered_map<std::string_view, unsigned> tf;
    const std::string_view sv(norm);
    if (sv.size() < n_) {
        tf[sv] = 1;
    } else {
        for (std::size_t i = 0; i + n_ <= sv.size(); ++i) ++tf[sv.substr(i, n_)];
    }

    Vector v(dims_, 0.0f);
    for (const auto& [gram, count] : tf) {
        const auto h = fnv1a64(gram);
        const auto bucket = static_cast<std::size_t>(h % dims_);
        const float sign = (h >> 63) != 0 ? -1.0f : 1.0f;
        v[bucket] += sign * static_cast<float>(1.0 + std::log(static_cast<double>(count)));
    }
    l2_normalize(v);
    // Opposite-signed collisions can cancel to zero; fall back to a fixed axis.
    if (std::all_of(v.begin(), v.end(), [](float x) { return x == 0.0f; })) v[fnv1a64(sv) % dims_] = 1.0f;
    return v;
}

}  // namespace ctxeng::retrieval
