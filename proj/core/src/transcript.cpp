#include "ctxeng/transcript.hpp"

#include <array>
#include <ctime>
#include <nlohmann/json.hpp>

#include "ctxeng/digest.hpp"
#include "ctxeng/error.hpp"
#include "ctxeng/text.hpp"

namespace ctxeng::orchestrator {

using json = nlohmann::ordered_json;

namespace {

constexpr std::array<std::pair<EventKind, std::string_view>, 5> kKinds = {{
    {EventKind::state_enter, "state_enter"},
    {EventKind::provider_call, "provider_call"},
    {EventKind::tool_call, "tool_call"},
    {EventKind::lock, "lock"},
    {EventKind::note, "note"},
}};

json event_json(const TranscriptEvent& e) {
    json j;
    j["record"] = "event";
    j["seq"] = e.seq;
    j["wall_time"] = e.wall_time;
    j["state"] = e.state;
    j["agent_name"] = e.agent_name;
    j["event_kind"] = to_string(e.kind);
    j["payload_digest"] = e.payload_digest;
    j["token_usage"] = {{"input_tokens", e.usage.input_tokens}, {"output_tokens", e.usage.output_tokens}};
    j["detail"] = e.detail;
    return j;
}

std::string serialize_with(const Transcript& t, bool blank_times) {
    std::string out = json{{"record", "run"}, {"run_id", t.run_id()}}.dump() + "\n";
    for (auto e : t.events()) {
        if (blank_times) e.wall_time.clear();
        out += event_json(e).dump() + "\n";
    }
    const auto& tot = t.totals();
    out += json{{"record", "totals"},
                {"outcome", t.outcome()},
                {"messages", tot.messages},
                {"input_tokens", tot.input_tokens},
                {"output_tokens", tot.output_tokens}}
               .dump() +
           "\n";
    return out;
}

[[noreturn]] void malformed(std::size_t line, const std::string& what) {
    throw Error(ErrorCode::MalformedTranscript, "line " + std::to_string(line) + ": " + what);
}

}  // namespace

std::string_view to_string(EventKind kind) noexcept {
    for (const auto& [k, name] : kKinds) {
        if (k == kind) return name;
    }
    return "";
}

std::optional<EventKind> event_kind_from_string(std::string_view name) noexcept {
    for (const auto& [k, n] : kKinds) {
        if (n == name) return k;
    }
    return std::nullopt;
}

std::string format_wall_time(std::chrono::system_clock::time_point t) {
    using namespace std::chrono;
    const auto ms = duration_cast<milliseconds>(t.time_since_epoch()).count();
    std::time_t secs = static_cast<std::time_t>(ms / 1000);
    long frac = static_cast<long>(ms % 1000);
    if (frac < 0) {
        frac += 1000;
        --secs;
    }
    std::tm tm{};
    gmtime_r(&secs, &tm);
    std::array<char, 40> buf{};
    const auto n = std::strftime(buf.data(), buf.size(), "%Y-%m-%dT%H:%M:%S", &tm);
    std::array<char, 8> tail{};
    std::snprintf(tail.data(), tail.size(), ".%03ldZ", frac);
    return std::string(buf.data(), n) + tail.data();
}

Transcript::Transcript(std::string run_id, Clock clock) : run_id_(std::move(run_id)), clock_(std::move(clock)) {
    if (!clock_) clock_ = [] { return std::chrono::system_clock::now(); };
}

std::uint64_t Transcript::append(std::string state, std::string agent, EventKind kind, std::string_view payload,
                                 provider::Usage usage, std::string detail) {
    TranscriptEvent e;
    e.seq = events_.empty() ? 1 : events_.back().seq + 1;
    e.wall_time = format_wall_time(clock_());
    e.state = std::move(state);
    e.agent_name = std::move(agent);
    e.kind = kind;
    e.payload_digest = short_digest(payload);
    e.usage = usage;
    e.detail = std::move(detail);
    if (kind == EventKind::provider_call) ++totals_.messages;
    totals_.input_tokens += usage.input_tokens;
    totals_.output_tokens += usage.output_tokens;
    events_.push_back(std::move(e));
    return events_.back().seq;
}

std::vector<OrchestrationState> Transcript::state_path() const {
    std::vector<OrchestrationState> path;
    for (const auto& e : events_) {
        if (e.kind != EventKind::state_enter) continue;
        auto s = state_from_string(e.state);
        if (!s) throw Error(ErrorCode::MalformedTranscript, "event " + std::to_string(e.seq) + ": unknown state " + e.state);
        path.push_back(*s);
    }
    return path;
}

std::string Transcript::serialize() const { return serialize_with(*this, false); }

std::string without_wall_times(const Transcript& transcript) { return serialize_with(transcript, true); }

void Transcript::write(const std::filesystem::path& path) const { write_file_atomic(path, serialize()); }

Transcript Transcript::parse(std::string_view text) {
    Transcript t;
    const auto lines = split_lines(text);
    if (lines.empty()) malformed(1, "empty transcript");
    bool have_totals = false;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const std::size_t lineno = i + 1;
        if (have_totals) malformed(lineno, "content after the totals record");
        json j;
        try {
            j = json::parse(lines[i]);
        } catch (const json::exception&) {
            malformed(lineno, "not a JSON object");
        }
        if (!j.is_object() || !j.contains("record") || !j["record"].is_string()) malformed(lineno, "missing record type");
        const auto record = j["record"].get<std::string>();
        try {
            if (i == 0) {
                if (record != "run") malformed(lineno, "first record must be the run header");
                t.run_id_ = j.at("run_id").get<std::string>();
            } else if (record == "event") {
                TranscriptEvent e;
                e.seq = j.at("seq").get<std::uint64_t>();
                e.wall_time = j.at("wall_time").get<std::string>();
                e.state = j.at("state").get<std::string>();
                e.agent_name = j.at("agent_name").get<std::string>();
                auto kind = event_kind_from_string(j.at("event_kind").get<std::string>());
                if (!kind) malformed(lineno, "unknown event_kind");
                e.kind = *kind;
                e.payload_digest = j.at("payload_digest").get<std::string>();
                const auto& u = j.at("token_usage");
                e.usage.input_tokens = u.at("input_tokens").get<std::size_t>();
                e.usage.output_tokens = u.at("output_tokens").get<std::size_t>();
                e.detail = j.value("detail", std::string{});
                if (!t.events_.empty() && e.seq <= t.events_.back().seq) malformed(lineno, "seq is not increasing");
                t.events_.push_back(std::move(e));
            } else if (record == "totals") {
                t.outcome_ = j.value("outcome", std::string{});
                t.totals_.messages = j.at("messages").get<std::size_t>();
                t.totals_.input_tokens = j.at("input_tokens").get<std::size_t>();
                t.totals_.output_tokens = j.at("output_tokens").get<std::size_t>();
                have_totals = true;
            } else {
                malformed(lineno, "unknown record type " + record);
            }
        } catch (const json::exception& e) {
            malformed(lineno, std::string("bad field: ") + e.what());
        }
    }
    if (!have_totals) malformed(lines.size() + 1, "transcript ends without a totals record");
    return t;
}

Transcript Transcript::load(const std::filesystem::path& path) { return parse(read_file(path)); }

}  // namespace ctxeng::orchestrator
