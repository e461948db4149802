#include "ctxeng/run_config.hpp"

#include <yaml-cpp/yaml.h>

#include "ctxeng/error.hpp"
#include "ctxeng/text.hpp"

namespace ctxeng::orchestrator {

std::string_view to_string(AutoApply a) noexcept { return a == AutoApply::none ? "none" : "minor"; }

namespace {

[[noreturn]] void bad(const std::string& key, const std::string& what) {
    throw Error(ErrorCode::ConfigError, key + ": " + what);
}

std::size_t count(const YAML::Node& n, const std::string& key, bool positive) {
    long long v = 0;
    try {
        v = n.as<long long>();
    } catch (const YAML::Exception&) {
        bad(key, "expected an integer");
    }
    if (v < 0 || (positive && v == 0)) bad(key, positive ? "must be positive" : "must not be negative");
    return static_cast<std::size_t>(v);
}

std::string str(const YAML::Node& n, const std::string& key) {
    if (!n.IsScalar()) bad(key, "expected a string");
    return n.as<std::string>();
}

bool boolean(const YAML::Node& n, const std::string& key) {
    try {
        return n.as<bool>();
    } catch (const YAML::Exception&) {
        bad(key, "expected true or false");
    }
}

}  // namespace

RunConfig parse_run_config(std::string_view yaml) {
    RunConfig c;
    YAML::Node root;
    try {
        root = YAML::Load(std::string(yaml));
    } catch (const YAML::Exception& e) {
        throw Error(ErrorCode::ConfigError, std::string("not valid YAML: ") + e.what());
    }
    if (root.IsNull()) return c;
    if (!root.IsMap()) throw Error(ErrorCode::ConfigError, "run config must be a mapping");

    for (const auto& kv : root) {
        const auto key = kv.first.as<std::string>();
        const auto& v = kv.second;
        if (key == "max_test_retries") c.max_test_retries = count(v, key, false);
        else if (key == "token_budget_per_agent") c.token_budget_per_agent = count(v, key, true);
        else if (key == "test_timeout_seconds") c.test_timeout_seconds = count(v, key, true);
        else if (key == "k_retrieval") c.k_retrieval = count(v, key, true);
        else if (key == "knowledge_k") c.knowledge_k = count(v, key, true);
        else if (key == "action_cap") c.action_cap = count(v, key, true);
        else if (key == "max_output_tokens") c.max_output_tokens = count(v, key, true);
        else if (key == "test_command") c.test_command = str(v, key);
        else if (key == "agents_dir") c.agents_dir = str(v, key);
        else if (key == "agent_extension") c.agent_extension = str(v, key);
        else if (key == "memory_path") c.memory_path = str(v, key);
        else if (key == "corpus_dir") c.corpus_dir = str(v, key);
        else if (key == "planner_role") c.planner_role = str(v, key);
        else if (key == "reviewer_role") c.reviewer_role = str(v, key);
        else if (key == "translator_agent") c.translator_agent = str(v, key);
        else if (key == "skip_review_if_missing") c.skip_review_if_missing = boolean(v, key);
        else if (key == "auto_apply_max_severity") {
            const auto s = str(v, key);
            if (s == "none") c.auto_apply_max_severity = AutoApply::none;
            else if (s == "minor") c.auto_apply_max_severity = AutoApply::minor;
            else bad(key, "expected none or minor, got " + s);
        } else {
            throw Error(ErrorCode::ConfigError, "unknown key " + key);
        }
    }
    return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    if (!std::filesystem::is_regular_file(path)) {
        throw Error(ErrorCode::ConfigError, "no run config at " + path.string());
    }
    try {
        return parse_run_config(read_file(path));
    } catch (const Error& e) {
        throw e.with_context(path.string());
    }
}

}  // namespace ctxeng::orchestrator
