#include "attnmask/agent/backend.hpp"

namespace attnmask::agent {

const char* to_string(AgentRole role) {
    switch (role) {
        case AgentRole::Expander: return "expander";
        case AgentRole::Optimizer: return "optimizer";
        case AgentRole::Extractor: return "extractor";
        case AgentRole::Filter: return "filter";
    }
    return "unknown";
}

std::optional<AgentRole> parse_role(std::string_view name) {
    for (auto r : {AgentRole::Expander, AgentRole::Optimizer, AgentRole::Extractor, AgentRole::Filter})
        if (name == to_string(r)) return r;
    return std::nullopt;
}

}  // namespace attnmask::agent
