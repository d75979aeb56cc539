#pragma once

#include "attnmask/agent/backend.hpp"

#include <chrono>
#include <string>

namespace attnmask::agent {

struct OpenAiConfig {
    /// Scheme, host, optional port and path prefix, e.g. "https://api.openai.com/v1".
    std::string base_url = "https://api.openai.com/v1";
    std::string model = "gpt-3.5-turbo";
    /// Environment variable holding the bearer token; no Authorization header when unset.
    std::string api_key_env = "OPENAI_API_KEY";
    std::chrono::milliseconds timeout{30000};
    /// Extra attempts after the first on transport errors, 429 and 5xx.
    int retries = 2;
    std::chrono::milliseconds backoff{500};

    void validate() const;
};

/// Request body for POST {base_url}/chat/completions.
std::string build_chat_payload(const OpenAiConfig& config, const ChatRequest& request);
/// choices[0].message.content of a chat-completion response body.
std::string parse_chat_reply(const std::string& body);

class OpenAiBackend : public ChatBackend {
public:
    explicit OpenAiBackend(OpenAiConfig config);

    std::string complete(const ChatRequest& request) override;
    std::string describe() const override;

    const OpenAiConfig& config() const { return config_; }

private:
    OpenAiConfig config_;
    std::string origin_;  // scheme://host[:port]
    std::string path_;    // prefix + "/chat/completions"
};

}  // namespace attnmask::agent
