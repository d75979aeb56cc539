#pragma once

#include "attnmask/agent/backend.hpp"

#include <array>
#include <filesystem>
#include <map>
#include <string>

namespace attnmask::agent {

/// Variables available to templates as {{name}}: keywords, prompt, nouns.
using TemplateVars = std::map<std::string, std::string>;

class RoleTemplates {
public:
    /// Built-in templates.
    RoleTemplates();
    /// Built-ins overridden by <dir>/<role>.txt where present.
    static RoleTemplates load(const std::filesystem::path& dir);

    const std::string& text(AgentRole role) const;
    void set(AgentRole role, std::string text);

    /// Throws ConfigError if any {{...}} is left after substitution.
    std::string render(AgentRole role, const TemplateVars& vars) const;
    /// Renders every role with every variable bound.
    void validate() const;

private:
    std::array<std::string, 4> text_;
};

/// System message sent ahead of every role prompt; states the reply schema.
std::string system_message(AgentRole role);

}  // namespace attnmask::agent
