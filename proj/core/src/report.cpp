#include "ctxeng/report.hpp"

#include <cstdio>
#include <map>

namespace ctxeng::orchestrator {

Totals recompute_totals(const std::vector<TranscriptEvent>& events) {
    Totals t;
    for (const auto& e : events) {
        if (e.kind == EventKind::provider_call) ++t.messages;
        t.input_tokens += e.usage.input_tokens;
        t.output_tokens += e.usage.output_tokens;
    }
    return t;
}

RunReport build_report(const Transcript& transcript) {
    RunReport r;
    r.run_id = transcript.run_id();
    r.outcome = transcript.outcome();
    r.totals = recompute_totals(transcript.events());
    r.declared = transcript.totals();
    std::map<std::string, AgentUsage> agents;
    for (const auto& e : transcript.events()) {
        if (e.kind == EventKind::state_enter) r.state_path.push_back(e.state);
        if (e.kind != EventKind::provider_call && e.usage == provider::Usage{}) continue;
        auto& a = agents[e.agent_name];
        a.agent = e.agent_name;
        if (e.kind == EventKind::provider_call) ++a.messages;
        a.input_tokens += e.usage.input_tokens;
        a.output_tokens += e.usage.output_tokens;
    }
    for (auto& [name, usage] : agents) r.per_agent.push_back(std::move(usage));
    return r;
}

std::string render_report(const RunReport& r) {
    std::string out;
    out += "run_id: " + r.run_id + "\n";
    if (!r.outcome.empty()) out += "outcome: " + r.outcome + "\n";
    out += "messages: " + std::to_string(r.totals.messages) + "\n";
    out += "input_tokens: " + std::to_string(r.totals.input_tokens) + "\n";
    out += "output_tokens: " + std::to_string(r.totals.output_tokens) + "\n";
    out += "total_tokens: " + std::to_string(r.totals.total_tokens()) + "\n";
    out += "per_agent:\n";
    for (const auto& a : r.per_agent) {
        out += "  " + a.agent + ": messages=" + std::to_string(a.messages) +
               " input=" + std::to_string(a.input_tokens) + " output=" + std::to_string(a.output_tokens) + "\n";
    }
    out += "state_path:";
    for (const auto& s : r.state_path) out += " " + s;
    out += "\n";
    return out;
}

std::string format_ratio(std::size_t tokens, std::size_t baseline_tokens) {
    if (baseline_tokens == 0) return "inf";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2fx", static_cast<double>(tokens) / static_cast<double>(baseline_tokens));
    return buf;
}

}  // namespace ctxeng::orchestrator
