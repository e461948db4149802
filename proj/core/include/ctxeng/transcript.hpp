#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ctxeng/provider.hpp"
#include "ctxeng/state_machine.hpp"

namespace ctxeng::orchestrator {

enum class EventKind { state_enter, provider_call, tool_call, lock, note };
std::string_view to_string(EventKind kind) noexcept;
std::optional<EventKind> event_kind_from_string(std::string_view name) noexcept;

struct TranscriptEvent {
    std::uint64_t seq = 0;
    std::string wall_time;  // ISO-8601 UTC, millisecond precision
    std::string state;
    std::string agent_name;
    EventKind kind = EventKind::note;
    std::string payload_digest;  // short_digest of the event payload
    provider::Usage usage;
    std::string detail;
    bool operator==(const TranscriptEvent&) const = default;
};

struct Totals {
    std::size_t messages = 0;  // provider calls
    std::size_t input_tokens = 0;
    std::size_t output_tokens = 0;
    std::size_t total_tokens() const noexcept { return input_tokens + output_tokens; }
    bool operator==(const Totals&) const = default;
};

/// How a run ended: "Done", "Failed", "paused", or empty while running.
using Outcome = std::string;

/// Append-only event log of one run.
///
/// File format, one JSON object per line:
///   {"record":"run","run_id":...}
///   {"record":"event","seq":1,"wall_time":...,"state":...,"agent_name":...,
///    "event_kind":...,"payload_digest":...,"token_usage":{...},"detail":...}
///   {"record":"totals","outcome":...,"messages":N,"input_tokens":N,"output_tokens":N}
class Transcript {
public:
    using Clock = std::function<std::chrono::system_clock::time_point()>;

    explicit Transcript(std::string run_id = {}, Clock clock = {});

    const std::string& run_id() const noexcept { return run_id_; }
    void set_run_id(std::string id) { run_id_ = std::move(id); }

    /// Appends an event whose payload_digest is the digest of `payload`, and
    /// returns its seq. Totals are updated as events arrive.
    std::uint64_t append(std::string state, std::string agent, EventKind kind, std::string_view payload,
                         provider::Usage usage = {}, std::string detail = {});

    const std::vector<TranscriptEvent>& events() const noexcept { return events_; }
    /// Running totals, or for a parsed transcript the values of its trailer.
    const Totals& totals() const noexcept { return totals_; }
    const Outcome& outcome() const noexcept { return outcome_; }
    void set_outcome(Outcome outcome) { outcome_ = std::move(outcome); }

    /// States of the state_enter events, in order. Throws
    /// MalformedTranscript on an unknown state name.
    std::vector<OrchestrationState> state_path() const;

    std::string serialize() const;
    void write(const std::filesystem::path& path) const;

    /// Throws MalformedTranscript naming the offending line.
    static Transcript parse(std::string_view text);
    static Transcript load(const std::filesystem::path& path);

private:
    std::string run_id_;
    Clock clock_;
    std::vector<TranscriptEvent> events_;
    Totals totals_;
    Outcome outcome_;
};

std::string format_wall_time(std::chrono::system_clock::time_point t);

/// Serialized transcript with every wall_time value blanked, for comparing
/// runs.
std::string without_wall_times(const Transcript& transcript);

}  // namespace ctxeng::orchestrator
