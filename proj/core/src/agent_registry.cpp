#include "ctxeng/agent_registry.hpp"

#include <algorithm>
#include <cctype>
#include <optional>
#include <regex>

#include "ctxeng/error.hpp"
#include "ctxeng/text.hpp"

namespace ctxeng::agents {

namespace fs = std::filesystem;

std::string_view to_string(ModelTier tier) noexcept {
    switch (tier) {
        case ModelTier::fast: return "fast";
        case ModelTier::balanced: return "balanced";
        case ModelTier::powerful: return "powerful";
    }
    return "balanced";
}

TierAliases default_tier_aliases() {
    return {{"haiku", ModelTier::fast}, {"sonnet", ModelTier::balanced}, {"opus", ModelTier::powerful}};
}

ToolSet default_toolset() { return {"Bash", "Edit", "Grep", "Read", "RunTests", "Write"}; }

bool AgentProfile::allows(std::string_view tool) const {
    return std::find(tools.begin(), tools.end(), tool) != tools.end();
}

namespace {

constexpr std::string_view kHeaderKeys[] = {"name", "description", "model", "tools"};

struct HeaderField {
    std::string value;
    std::size_t line = 0;
};

std::string at_line(std::size_t line, std::string_view msg) {
    return "line " + std::to_string(line) + ": " + std::string(msg);
}

/// `key:` at the start of the line, key being a bare identifier.
std::optional<std::pair<std::string, std::string>> split_header(std::string_view line) {
    const auto colon = line.find(':');
    if (colon == std::string_view::npos || colon == 0) return std::nullopt;
    const auto key = line.substr(0, colon);
    if (!std::isalpha(static_cast<unsigned char>(key.front()))) return std::nullopt;
    for (char c : key) {
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-') return std::nullopt;
    }
    return std::pair{std::string(key), std::string(trim(line.substr(colon + 1)))};
}

std::optional<ModelTier> tier_from(std::string_view value, const TierAliases& aliases) {
    if (auto it = aliases.find(value); it != aliases.end()) return it->second;
    for (auto t : {ModelTier::fast, ModelTier::balanced, ModelTier::powerful}) {
        if (value == to_string(t)) return t;
    }
    return std::nullopt;
}

}  // namespace

AgentProfile parse_agent_file(std::string_view raw, const ParseOptions& options) {
    if (raw.empty()) throw Error(ErrorCode::InvalidArgument, "agent file is empty");
    const std::string text = normalize_newlines(raw);
    const auto lines = split_lines(text);

    std::size_t i = 0;
    while (i < lines.size() && is_blank(lines[i])) ++i;

    std::map<std::string, HeaderField, std::less<>> fields;
    std::string* continuing = nullptr;
    std::optional<std::size_t> separator;
    for (; i < lines.size(); ++i) {
        const std::size_t lineno = i + 1;
        const auto line = lines[i];
        if (is_blank(line)) {
            separator = i;
            break;
        }
        if (auto kv = split_header(line)) {
            auto& [key, value] = *kv;
            if (std::find(std::begin(kHeaderKeys), std::end(kHeaderKeys), key) == std::end(kHeaderKeys)) {
                throw Error(ErrorCode::UnknownHeaderKey, at_line(lineno, "unknown header key '" + key + "'"));
            }
            if (fields.contains(key)) {
                throw Error(ErrorCode::InvalidField, at_line(lineno, "duplicate header key '" + key + "'"));
            }
            auto& field = fields[key];
            field = HeaderField{value, lineno};
            continuing = &field.value;
            continue;
        }
        if (continuing != nullptr && continuing->ends_with(',')) {
            *continuing += ' ';
            *continuing += trim(line);
            continue;
        }
        // Body text glued to the header: there is no prompt after a blank line.
        throw Error(ErrorCode::EmptyPrompt,
                    at_line(lineno, "system prompt must follow the header after a blank line"));
    }

    const std::size_t header_end = separator ? *separator + 1 : lines.size();
    for (std::string_view required : {"name", "description", "tools"}) {
        if (!fields.contains(required)) {
            throw Error(ErrorCode::MissingField,
                        at_line(header_end, "missing required header '" + std::string(required) + "'"));
        }
    }

    AgentProfile profile;
    const auto& name = fields["name"];
    static const std::regex kName("[a-z0-9-]+");
    if (!std::regex_match(name.value, kName)) {
        throw Error(ErrorCode::InvalidField,
                    at_line(name.line, "agent name '" + name.value + "' must match [a-z0-9-]+"));
    }
    profile.name = name.value;

    const auto& description = fields["description"];
    if (description.value.empty()) {
        throw Error(ErrorCode::MissingField, at_line(description.line, "description is empty"));
    }
    profile.description = description.value;

    if (auto it = fields.find("model"); it != fields.end()) {
        auto tier = tier_from(it->second.value, options.tier_aliases);
        if (!tier) {
            throw Error(ErrorCode::InvalidField,
                        at_line(it->second.line, "unknown model alias '" + it->second.value + "'"));
        }
        profile.model_tier = *tier;
    }

    const auto& tools = fields["tools"];
    for (const auto& part : split(tools.value, ',')) {
        const std::string tool(trim(part));
        if (tool.empty()) continue;
        if (!options.toolset.contains(tool)) {
            throw Error(ErrorCode::UnknownTool, at_line(tools.line, "unknown tool '" + tool + "'"));
        }
        if (!profile.allows(tool)) profile.tools.push_back(tool);
    }
    if (profile.tools.empty()) {
        throw Error(ErrorCode::MissingField, at_line(tools.line, "tools header lists no tools"));
    }

    if (!separator) {
        throw Error(ErrorCode::EmptyPrompt, at_line(lines.size(), "no system prompt after the header"));
    }
    // Everything after the separator line, verbatim.
    std::size_t offset = 0;
    for (std::size_t k = 0; k <= *separator; ++k) offset += lines[k].size() + 1;
    profile.system_prompt = offset < text.size() ? text.substr(offset) : std::string{};
    if (is_blank(profile.system_prompt)) {
        throw Error(ErrorCode::EmptyPrompt, at_line(*separator + 1, "system prompt is empty"));
    }
    return profile;
}

std::string serialize_profile(const AgentProfile& profile, const TierAliases& aliases) {
    std::string model(to_string(profile.model_tier));
    for (const auto& [alias, tier] : aliases) {
        if (tier == profile.model_tier) {
            model = alias;
            break;
        }
    }
    std::string out;
    out += "name: " + profile.name + "\n";
    out += "description: " + profile.description + "\n";
    out += "model: " + model + "\n";
    out += "tools: " + join(profile.tools, ", ") + "\n";
    out += "\n";
    out += profile.system_prompt;
    return out;
}

Registry::Registry(std::map<std::string, AgentProfile, std::less<>> profiles, fs::path source_dir)
    : profiles_(std::move(profiles)), source_dir_(std::move(source_dir)) {}

const AgentProfile* Registry::find(std::string_view name) const {
    auto it = profiles_.find(name);
    return it == profiles_.end() ? nullptr : &it->second;
}

const AgentProfile& Registry::get(std::string_view name) const {
    if (const auto* p = find(name)) return *p;
    throw Error(ErrorCode::NotFound,
                "no agent named '" + std::string(name) + "'; known: [" + join(names(), ", ") + "]");
}

std::vector<std::string> Registry::names() const {
    std::vector<std::string> out;
    out.reserve(profiles_.size());
    for (const auto& [name, _] : profiles_) out.push_back(name);
    return out;
}

Registry load_registry(const fs::path& dir, const LoadOptions& options) {
    std::error_code ec;
    if (!fs::is_directory(dir, ec)) {
        throw Error(ErrorCode::NotFound, "agent directory " + dir.string() + " does not exist");
    }
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == options.extension) {
            files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end());

    std::map<std::string, AgentProfile, std::less<>> profiles;
    std::map<std::string, fs::path, std::less<>> origin;
    for (const auto& file : files) {
        AgentProfile profile;
        try {
            profile = parse_agent_file(read_file(file), options.parse);
        } catch (const Error& e) {
            throw e.with_context(file.string());
        }
        if (auto it = origin.find(profile.name); it != origin.end()) {
            throw Error(ErrorCode::DuplicateAgentName, "agent '" + profile.name + "' is declared in both " +
                                                           it->second.string() + " and " + file.string());
        }
        origin.emplace(profile.name, file);
        profiles.emplace(profile.name, std::move(profile));
    }
    return Registry(std::move(profiles), dir);
}

}  // namespace ctxeng::agents
