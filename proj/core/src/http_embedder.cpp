#include <httplib.h>

#include <nlohmann/json.hpp>

#include "ctxeng/embedder.hpp"
#include "ctxeng/error.hpp"

namespace ctxeng::retrieval {

HttpEmbedder::HttpEmbedder(Options options) : options_(std::move(options)), dims_(options_.dims) {}

std::string HttpEmbedder::id() const { return "http:" + options_.model; }

std::size_t HttpEmbedder::dims() const { return dims_; }

Vector HttpEmbedder::embed(std::string_view text) const {
    if (text.empty()) throw Error(ErrorCode::InvalidArgument, "cannot embed empty text");

    httplib::Client client(options_.host, options_.port);
    const auto t = static_cast<time_t>(options_.timeout.count());
    client.set_connection_timeout(t, 0);
    client.set_read_timeout(t, 0);
    client.set_write_timeout(t, 0);
    httplib::Headers headers;
    if (!options_.api_key.empty()) headers.emplace("Authorization", "Bearer " + options_.api_key);

    const nlohmann::json body = {{"model", options_.model}, {"input", std::string(text)}};
    auto res = client.Post("/v1/embeddings", headers, body.dump(), "application/json");
    if (!res) {
        throw Error(ErrorCode::ProviderUnavailable,
                    "embedding request failed: " + httplib::to_string(res.error()));
    }
    if (res->status != 200) {
        throw Error(ErrorCode::ProviderUnavailable, "embedding endpoint returned HTTP " + std::to_string(res->status));
    }

    Vector v;
    try {
        const auto doc = nlohmann::json::parse(res->body);
        for (const auto& x : doc.at("data").at(0).at("embedding")) v.push_back(x.get<float>());
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ProviderUnavailable, std::string("malformed embedding response: ") + e.what());
    }
    if (v.empty()) throw Error(ErrorCode::ProviderUnavailable, "embedding response has no values");
    if (dims_ == 0) dims_ = v.size();
    if (v.size() != dims_) {
        throw Error(ErrorCode::ProviderUnavailable, "embedding has " + std::to_string(v.size()) +
                                                        " dims, expected " + std::to_string(dims_));
    }
    l2_normalize(v);
    return v;
}

}  // namespace ctxeng::retrieval
