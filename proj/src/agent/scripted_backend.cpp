#include "attnmask/agent/scripted_backend.hpp"

#include "attnmask/error.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace attnmask::agent {

using nlohmann::json;

ScriptedBackend::ScriptedBackend(std::vector<ScriptedResponse> script) : script_(std::move(script)) {}

ScriptedBackend::ScriptedBackend(ScriptedBackend&& other) noexcept {
    std::lock_guard lock(other.mutex_);
    script_ = std::move(other.script_);
    requests_ = std::move(other.requests_);
    next_ = other.next_;
}

ScriptedBackend ScriptedBackend::from_json(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("mock script is not valid JSON: ") + e.what());
    }
    if (!doc.is_object() || !doc.contains("responses") || !doc["responses"].is_array())
        throw ConfigError("mock script needs a \"responses\" array");
    std::vector<ScriptedResponse> script;
    for (const auto& entry : doc["responses"]) {
        if (!entry.is_object()) throw ConfigError("mock script entries must be objects");
        ScriptedResponse r;
        if (entry.contains("role")) {
            const auto name = entry["role"].get<std::string>();
            r.role = parse_role(name);
            if (!r.role) throw ConfigError("mock script has unknown role \"" + name + "\"");
        }
        if (entry.contains("error")) {
            r.error = entry["error"].get<std::string>();
            if (r.error.empty()) r.error = "scripted failure";
        } else if (entry.contains("content")) {
            r.content = entry["content"].get<std::string>();
        } else if (entry.contains("payload")) {
            json reply = {{"payload", entry["payload"]}};
            if (entry.contains("verdict")) reply["verdict"] = entry["verdict"];
            r.content = reply.dump();
        } else {
            throw ConfigError("mock script entry needs content, payload or error");
        }
        script.push_back(std::move(r));
    }
    return ScriptedBackend(std::move(script));
}

ScriptedBackend ScriptedBackend::from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open mock script " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return from_json(ss.str());
}

std::string ScriptedBackend::complete(const ChatRequest& request) {
    std::lock_guard lock(mutex_);
    requests_.push_back(request);
    if (next_ >= script_.size())
        throw InvariantError("mock script exhausted after " + std::to_string(script_.size()) + " replies (" +
                             to_string(request.role) + " asked for more)");
    const ScriptedResponse& r = script_[next_++];
    if (r.role && *r.role != request.role)
        throw InvariantError("mock reply " + std::to_string(next_) + " is for " + to_string(*r.role) + " but " +
                             to_string(request.role) + " called");
    if (!r.error.empty()) throw BackendError(r.error);
    return r.content;
}

std::string ScriptedBackend::describe() const { return "scripted mock (" + std::to_string(script_.size()) + " replies)"; }

std::size_t ScriptedBackend::calls() const {
    std::lock_guard lock(mutex_);
    return requests_.size();
}

std::size_t ScriptedBackend::remaining() const {
    std::lock_guard lock(mutex_);
    return script_.size() - next_;
}

std::vector<ChatRequest> ScriptedBackend::requests() const {
    std::lock_guard lock(mutex_);
    return requests_;
}

}  // namespace attnmask::agent
