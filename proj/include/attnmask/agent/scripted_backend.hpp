#pragma once

#include "attnmask/agent/backend.hpp"

#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace attnmask::agent {

struct ScriptedResponse {
    /// When set, the request must come from this role.
    std::optional<AgentRole> role;
    std::string content;
    /// Non-empty: the call fails with BackendError(error) instead of replying.
    std::string error;
};

/// Replays a fixed list of replies in order. Script file format:
///   {"responses": [{"role": "optimizer", "verdict": "good", "payload": "..."},
///                  {"role": "expander", "content": "raw text"},
///                  {"role": "filter", "error": "connection refused"}]}
/// verdict/payload entries are serialized into the structured reply format.
class ScriptedBackend : public ChatBackend {
public:
    explicit ScriptedBackend(std::vector<ScriptedResponse> script);
    ScriptedBackend(ScriptedBackend&& other) noexcept;
    static ScriptedBackend from_json(const std::string& text);
    static ScriptedBackend from_file(const std::filesystem::path& path);

    /// Throws InvariantError on a role mismatch or when the script is exhausted.
    std::string complete(const ChatRequest& request) override;
    std::string describe() const override;

    std::size_t calls() const;
    std::size_t remaining() const;
    std::vector<ChatRequest> requests() const;

private:
    mutable std::mutex mutex_;
    std::vector<ScriptedResponse> script_;
    std::vector<ChatRequest> requests_;
    std::size_t next_ = 0;
};

}  // namespace attnmask::agent
