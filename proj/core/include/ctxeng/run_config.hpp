#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

namespace ctxeng::orchestrator {

enum class AutoApply { none, minor };
std::string_view to_string(AutoApply a) noexcept;

/// Knobs for one orchestration run. Relative paths resolve against the
/// repository root.
struct RunConfig {
    std::size_t max_test_retries = 2;
    AutoApply auto_apply_max_severity = AutoApply::minor;
    std::size_t token_budget_per_agent = 32000;
    std::string test_command;
    std::size_t test_timeout_seconds = 300;
    std::size_t k_retrieval = 5;
    std::string agents_dir = "agents";
    std::string agent_extension = ".agent";
    std::string memory_path = "PROJECT.md";
    std::string corpus_dir;  // empty: no external knowledge
    std::size_t knowledge_k = 3;
    std::string planner_role = "planner";
    std::string reviewer_role = "code-reviewer";
    std::string translator_agent = "intent-translator";
    std::size_t action_cap = 25;
    std::size_t max_output_tokens = 4096;
    bool skip_review_if_missing = true;
};

/// YAML mapping with the field names above. Unknown keys, wrong types and
/// non-positive values for positive fields raise ConfigError.
RunConfig parse_run_config(std::string_view yaml);
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace ctxeng::orchestrator
