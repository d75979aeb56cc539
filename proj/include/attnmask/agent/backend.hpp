#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace attnmask::agent {

enum class AgentRole { Expander, Optimizer, Extractor, Filter };

const char* to_string(AgentRole role);
std::optional<AgentRole> parse_role(std::string_view name);

struct ChatMessage {
    std::string role;  // "system" | "user" | "assistant"
    std::string content;
};

struct SamplingConfig {
    double temperature = 0.3;
    double top_p = 1.0;
    int max_tokens = 512;
};

struct ChatRequest {
    AgentRole role = AgentRole::Expander;
    std::vector<ChatMessage> messages;
    SamplingConfig sampling;
};

/// One chat-completion endpoint. Implementations must be safe to share
/// between concurrently running sessions. complete() throws BackendError
/// when the endpoint fails after its own retry budget.
class ChatBackend {
public:
    virtual ~ChatBackend() = default;
    virtual std::string complete(const ChatRequest& request) = 0;
    virtual std::string describe() const = 0;
};

}  // namespace attnmask::agent
