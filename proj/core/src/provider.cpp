#include "ctxeng/provider.hpp"

#include <algorithm>

#include <nlohmann/json.hpp>

#include "ctxeng/context.hpp"
#include "ctxeng/digest.hpp"
#include "ctxeng/error.hpp"
#include "ctxeng/text.hpp"

namespace ctxeng::provider {

using nlohmann::json;

std::string_view to_string(DoneStatus status) noexcept {
    return status == DoneStatus::complete ? "complete" : "blocked";
}

namespace {

json to_json(const AgentAction& action) {
    return std::visit(
        [](const auto& a) -> json {
            using T = std::decay_t<decltype(a)>;
            if constexpr (std::is_same_v<T, ToolInvocation>) {
                return {{"type", "tool"}, {"tool", a.tool_name}, {"args", a.args}};
            } else if constexpr (std::is_same_v<T, Message>) {
                return {{"type", "message"}, {"content", a.content}};
            } else {
                return {{"type", "done"}, {"status", std::string(to_string(a.status))}, {"note", a.note}};
            }
        },
        action);
}

std::string get_string(const json& obj, const char* key, bool required) {
    if (!obj.contains(key)) {
        if (required) throw std::invalid_argument(std::string("missing \"") + key + "\"");
        return {};
    }
    if (!obj.at(key).is_string()) throw std::invalid_argument(std::string("\"") + key + "\" must be a string");
    return obj.at(key).get<std::string>();
}

AgentAction action_from_json(const json& j) {
    if (!j.is_object()) throw std::invalid_argument("action must be an object");
    const auto type = get_string(j, "type", true);
    if (type == "tool") {
        ToolInvocation t;
        t.tool_name = get_string(j, "tool", true);
        if (j.contains("args")) {
            if (!j.at("args").is_object()) throw std::invalid_argument("\"args\" must be an object");
            for (const auto& [k, v] : j.at("args").items()) {
                if (!v.is_string()) throw std::invalid_argument("tool argument \"" + k + "\" must be a string");
                t.args[k] = v.get<std::string>();
            }
        }
        return t;
    }
    if (type == "message") return Message{get_string(j, "content", true)};
    if (type == "done") {
        Done d;
        const auto status = get_string(j, "status", false);
        if (status == "blocked") {
            d.status = DoneStatus::blocked;
        } else if (!status.empty() && status != "complete") {
            throw std::invalid_argument("unknown done status \"" + status + "\"");
        }
        d.note = get_string(j, "note", false);
        return d;
    }
    throw std::invalid_argument("unknown action type \"" + type + "\"");
}

std::size_t get_count(const json& usage, const char* key) {
    if (!usage.contains(key)) return 0;
    const auto& v = usage.at(key);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
        throw std::invalid_argument(std::string("\"") + key + "\" must be a non-negative integer");
    }
    return v.get<std::size_t>();
}

}  // namespace

std::string action_to_json(const AgentAction& action) { return to_json(action).dump(); }

std::string actions_to_json(const std::vector<AgentAction>& actions) {
    json arr = json::array();
    for (const auto& a : actions) arr.push_back(to_json(a));
    return arr.dump();
}

std::string prompt_digest(std::string_view prompt) { return short_digest(prompt); }

Usage estimate_usage(std::string_view prompt, const std::vector<AgentAction>& actions) {
    return {context::estimate_tokens(prompt), context::estimate_tokens(actions_to_json(actions))};
}

bool FixtureMatcher::matches(const ProviderRequest& request, std::string_view digest) const {
    if (!agent_name.empty() && agent_name != request.agent_name) return false;
    if (!prompt_substring.empty() && request.prompt.find(prompt_substring) == std::string::npos) return false;
    if (!prompt_digest.empty() && prompt_digest != digest) return false;
    return true;
}

std::vector<FixtureEntry> parse_fixture(std::string_view text) {
    std::vector<FixtureEntry> entries;
    std::size_t lineno = 0;
    for (auto line : split_lines(text)) {
        ++lineno;
        const auto t = trim(line);
        if (t.empty() || t.front() == '#') continue;
        try {
            const auto j = json::parse(t);
            if (!j.is_object()) throw std::invalid_argument("record must be an object");
            FixtureEntry e;
            if (j.contains("match")) {
                const auto& m = j.at("match");
                if (!m.is_object()) throw std::invalid_argument("\"match\" must be an object");
                e.match.agent_name = get_string(m, "agent", false);
                e.match.prompt_substring = get_string(m, "contains", false);
                e.match.prompt_digest = get_string(m, "digest", false);
            }
            if (!j.contains("response") || !j.at("response").is_object()) {
                throw std::invalid_argument("missing \"response\" object");
            }
            const auto& r = j.at("response");
            if (!r.contains("actions") || !r.at("actions").is_array() || r.at("actions").empty()) {
                throw std::invalid_argument("response needs a non-empty \"actions\" array");
            }
            for (const auto& a : r.at("actions")) e.response.actions.push_back(action_from_json(a));
            if (r.contains("usage")) {
                const auto& u = r.at("usage");
                if (!u.is_object()) throw std::invalid_argument("\"usage\" must be an object");
                e.response.usage = {get_count(u, "input_tokens"), get_count(u, "output_tokens")};
                e.has_usage = true;
            }
            entries.push_back(std::move(e));
        } catch (const json::exception& ex) {
            throw Error(ErrorCode::MalformedFixture, "line " + std::to_string(lineno) + ": " + ex.what());
        } catch (const std::invalid_argument& ex) {
            throw Error(ErrorCode::MalformedFixture, "line " + std::to_string(lineno) + ": " + ex.what());
        }
    }
    return entries;
}

std::vector<FixtureEntry> load_fixture(const std::filesystem::path& path) {
    try {
        return parse_fixture(read_file(path));
    } catch (const Error& e) {
        throw e.with_context(path.string());
    }
}

std::string serialize_fixture_entry(const FixtureEntry& entry) {
    json match = json::object();
    if (!entry.match.agent_name.empty()) match["agent"] = entry.match.agent_name;
    if (!entry.match.prompt_substring.empty()) match["contains"] = entry.match.prompt_substring;
    if (!entry.match.prompt_digest.empty()) match["digest"] = entry.match.prompt_digest;
    json actions = json::array();
    for (const auto& a : entry.response.actions) actions.push_back(to_json(a));
    json response = {{"actions", std::move(actions)}};
    if (entry.has_usage) {
        response["usage"] = {{"input_tokens", entry.response.usage.input_tokens},
                             {"output_tokens", entry.response.usage.output_tokens}};
    }
    return json{{"match", std::move(match)}, {"response", std::move(response)}}.dump();
}

ScriptedProvider::ScriptedProvider(std::vector<FixtureEntry> entries, Mode mode)
    : entries_(std::move(entries)), used_(entries_.size(), false), mode_(mode) {}

ProviderResponse ScriptedProvider::complete(const ProviderRequest& request) {
    std::lock_guard lock(mutex_);
    const auto digest = prompt_digest(request.prompt);
    auto serve = [&](std::size_t i) {
        used_[i] = true;
        ProviderResponse r = entries_[i].response;
        if (!entries_[i].has_usage) r.usage = estimate_usage(request.prompt, r.actions);
        return r;
    };
    if (mode_ == Mode::strict) {
        while (cursor_ < entries_.size() && used_[cursor_]) ++cursor_;
        if (cursor_ < entries_.size() && entries_[cursor_].match.matches(request, digest)) return serve(cursor_);
    } else {
        for (std::size_t i = 0; i < entries_.size(); ++i) {
            if (!used_[i] && entries_[i].match.matches(request, digest)) return serve(i);
        }
    }
    throw Error(ErrorCode::NoFixtureMatch,
                "no fixture entry for agent '" + request.agent_name + "' (prompt digest " + digest + ")");
}

std::size_t ScriptedProvider::remaining() const {
    std::lock_guard lock(mutex_);
    return static_cast<std::size_t>(std::count(used_.begin(), used_.end(), false));
}

std::size_t ScriptedProvider::consumed() const {
    std::lock_guard lock(mutex_);
    return static_cast<std::size_t>(std::count(used_.begin(), used_.end(), true));
}

RecordingProvider::RecordingProvider(Provider& inner, const std::filesystem::path& path)
    : inner_(inner), out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) throw Error(ErrorCode::IoError, "cannot open recording " + path.string());
}

ProviderResponse RecordingProvider::complete(const ProviderRequest& request) {
    auto response = inner_.complete(request);
    FixtureEntry e;
    e.match.agent_name = request.agent_name;
    e.match.prompt_digest = prompt_digest(request.prompt);
    e.response = response;
    e.has_usage = true;
    std::lock_guard lock(mutex_);
    out_ << serialize_fixture_entry(e) << '\n';
    out_.flush();
    return response;
}

}  // namespace ctxeng::provider
