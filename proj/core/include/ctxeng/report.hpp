#pragma once

#include <string>
#include <vector>

#include "ctxeng/transcript.hpp"

namespace ctxeng::orchestrator {

struct AgentUsage {
    std::string agent;
    std::size_t messages = 0;
    std::size_t input_tokens = 0;
    std::size_t output_tokens = 0;
    bool operator==(const AgentUsage&) const = default;
};

struct RunReport {
    std::string run_id;
    std::string outcome;
    Totals totals;    // recomputed from the events
    Totals declared;  // the transcript's own totals record
    std::vector<AgentUsage> per_agent;  // agents with provider calls, by name
    std::vector<std::string> state_path;
    bool consistent() const noexcept { return totals == declared; }
};

/// Sums every event independently of the transcript's running totals.
Totals recompute_totals(const std::vector<TranscriptEvent>& events);

RunReport build_report(const Transcript& transcript);

/// Multi-line text: messages, input/output/total tokens, per-agent breakdown,
/// state path.
std::string render_report(const RunReport& report);

/// total tokens / baseline total tokens as "%.2fx". A zero baseline yields
/// "inf".
std::string format_ratio(std::size_t tokens, std::size_t baseline_tokens);

}  // namespace ctxeng::orchestrator
