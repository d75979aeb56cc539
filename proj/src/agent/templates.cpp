#include "attnmask/agent/templates.hpp"

#include "attnmask/error.hpp"

#include <fstream>
#include <sstream>

namespace attnmask::agent {

namespace {

const char* kExpander =
    "Write one vivid text-to-image prompt for a single clear subject on a plain background.\n"
    "It must mention every one of these keywords: {{keywords}}.\n"
    "Reply with the prompt text only.";

const char* kOptimizer =
    "Keywords: {{keywords}}\n"
    "Current prompt: {{prompt}}\n"
    "Improve the prompt so the subject is concrete, centered and free of background clutter. "
    "Keep every keyword. Set verdict to \"revise\" if the result still needs another pass, "
    "\"good\" otherwise. The payload is the improved prompt.";

const char* kExtractor =
    "Prompt: {{prompt}}\n"
    "List the concrete nouns that name visible parts of the main subject, exactly as written in the prompt. "
    "The payload is a JSON array of strings. Set verdict to \"revise\" if the prompt has too few concrete "
    "subject nouns to segment.";

const char* kFilter =
    "Prompt: {{prompt}}\n"
    "Candidate nouns: {{nouns}}\n"
    "Remove abstract or stylistic words (for example colorful, details, data) and keep physical objects. "
    "The payload is the kept nouns as a JSON array of strings in their original order. Set verdict to "
    "\"revise\" if too many candidates were abstract.";

std::size_t index(AgentRole role) { return static_cast<std::size_t>(role); }

}  // namespace

RoleTemplates::RoleTemplates() : text_{kExpander, kOptimizer, kExtractor, kFilter} {}

RoleTemplates RoleTemplates::load(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) throw IoError("template directory not found: " + dir.string());
    RoleTemplates t;
    for (auto role : {AgentRole::Expander, AgentRole::Optimizer, AgentRole::Extractor, AgentRole::Filter}) {
        const auto file = dir / (std::string(to_string(role)) + ".txt");
        if (!std::filesystem::exists(file)) continue;
        std::ifstream in(file);
        if (!in) throw IoError("cannot read template " + file.string());
        std::ostringstream ss;
        ss << in.rdbuf();
        t.set(role, ss.str());
    }
    t.validate();
    return t;
}

const std::string& RoleTemplates::text(AgentRole role) const { return text_[index(role)]; }

void RoleTemplates::set(AgentRole role, std::string text) { text_[index(role)] = std::move(text); }

std::string RoleTemplates::render(AgentRole role, const TemplateVars& vars) const {
    const std::string& src = text(role);
    std::string out;
    out.reserve(src.size());
    std::size_t pos = 0;
    while (pos < src.size()) {
        const auto open = src.find("{{", pos);
        if (open == std::string::npos) {
            out.append(src, pos);
            break;
        }
        out.append(src, pos, open - pos);
        const auto close = src.find("}}", open + 2);
        if (close == std::string::npos)
            throw ConfigError(std::string(to_string(role)) + " template has an unterminated placeholder");
        const std::string name = src.substr(open + 2, close - open - 2);
        const auto it = vars.find(name);
        if (it == vars.end())
            throw ConfigError(std::string(to_string(role)) + " template has unresolved placeholder {{" + name + "}}");
        out += it->second;
        pos = close + 2;
    }
    return out;
}

void RoleTemplates::validate() const {
    const TemplateVars all{{"keywords", "k"}, {"prompt", "p"}, {"nouns", "n"}};
    for (auto role : {AgentRole::Expander, AgentRole::Optimizer, AgentRole::Extractor, AgentRole::Filter}) {
        const std::string rendered = render(role, all);
        if (rendered.find("{{") != std::string::npos)
            throw ConfigError(std::string(to_string(role)) + " template leaves {{ after rendering");
    }
}

std::string system_message(AgentRole role) {
    if (role == AgentRole::Expander) return "You expand short keyword lists into image-generation prompts.";
    return std::string("You are the ") + to_string(role) +
           " in a prompt-refinement pipeline. Reply with a single JSON object "
           "{\"verdict\": \"good\" | \"revise\", \"payload\": ...} and nothing else.";
}

}  // namespace attnmask::agent
