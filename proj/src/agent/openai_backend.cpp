#include "attnmask/agent/openai_backend.hpp"

#include "attnmask/error.hpp"

#include <httplib.h>
#include <json.hpp>

#include <cstdlib>
#include <thread>

namespace attnmask::agent {

using nlohmann::json;

void OpenAiConfig::validate() const {
    if (base_url.rfind("http://", 0) != 0 && base_url.rfind("https://", 0) != 0)
        throw ConfigError("backend base_url must start with http:// or https://: " + base_url);
    if (model.empty()) throw ConfigError("backend model name is empty");
    if (timeout.count() <= 0) throw ConfigError("backend timeout must be positive");
    if (retries < 0) throw ConfigError("backend retries must be >= 0");
    if (backoff.count() < 0) throw ConfigError("backend backoff must be >= 0");
}

std::string build_chat_payload(const OpenAiConfig& config, const ChatRequest& request) {
    json messages = json::array();
    for (const auto& m : request.messages) messages.push_back({{"role", m.role}, {"content", m.content}});
    json body = {{"model", config.model},
                 {"messages", messages},
                 {"temperature", request.sampling.temperature},
                 {"top_p", request.sampling.top_p},
                 {"max_tokens", request.sampling.max_tokens}};
    return body.dump();
}

std::string parse_chat_reply(const std::string& body) {
    json doc;
    try {
        doc = json::parse(body);
    } catch (const json::exception& e) {
        throw BackendError(std::string("chat response is not JSON: ") + e.what());
    }
    const auto* content = [&]() -> const json* {
        if (!doc.is_object() || !doc.contains("choices") || !doc["choices"].is_array() || doc["choices"].empty())
            return nullptr;
        const auto& choice = doc["choices"][0];
        if (!choice.is_object() || !choice.contains("message")) return nullptr;
        const auto& msg = choice["message"];
        if (!msg.is_object() || !msg.contains("content") || !msg["content"].is_string()) return nullptr;
        return &msg["content"];
    }();
    if (!content) throw BackendError("chat response has no choices[0].message.content");
    return content->get<std::string>();
}

OpenAiBackend::OpenAiBackend(OpenAiConfig config) : config_(std::move(config)) {
    config_.validate();
    const auto scheme_end = config_.base_url.find("://") + 3;
    const auto slash = config_.base_url.find('/', scheme_end);
    origin_ = config_.base_url.substr(0, slash);
    std::string prefix = slash == std::string::npos ? "" : config_.base_url.substr(slash);
    while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
    path_ = prefix + "/chat/completions";
}

std::string OpenAiBackend::describe() const { return config_.model + " @ " + origin_ + path_; }

std::string OpenAiBackend::complete(const ChatRequest& request) {
    const std::string payload = build_chat_payload(config_, request);
    httplib::Headers headers;
    if (const char* key = std::getenv(config_.api_key_env.c_str()); key && *key)
        headers.emplace("Authorization", std::string("Bearer ") + key);

    std::string last_error;
    for (int attempt = 0; attempt <= config_.retries; ++attempt) {
        if (attempt > 0 && config_.backoff.count() > 0)
            std::this_thread::sleep_for(config_.backoff * (1 << std::min(attempt - 1, 6)));

        // A client per request keeps the backend shareable across threads.
        httplib::Client client(origin_);
        const auto secs = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
        const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(config_.timeout - secs);
        client.set_connection_timeout(secs.count(), usecs.count());
        client.set_read_timeout(secs.count(), usecs.count());
        client.set_write_timeout(secs.count(), usecs.count());

        auto res = client.Post(path_, headers, payload, "application/json");
        if (!res) {
            last_error = "transport error: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status == 200) return parse_chat_reply(res->body);
        last_error = "HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200);
        if (res->status != 429 && res->status < 500) break;
    }
    throw BackendError(describe() + " failed: " + last_error);
}

}  // namespace attnmask::agent
