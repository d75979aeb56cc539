#pragma once

#include "attnmask/agent/backend.hpp"
#include "attnmask/agent/templates.hpp"

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace attnmask::agent {

struct AgentCaps {
    std::size_t max_opt = 3;
    std::size_t max_revisions = 2;

    void validate() const;
    /// Backend calls a session may make when no reply needs a retry.
    std::size_t call_budget() const { return 1 + max_opt * (max_revisions + 1) + 2 * (max_revisions + 1); }
};

std::vector<std::string> default_stoplist();

struct AgentOptions {
    AgentCaps caps;
    SamplingConfig sampling;
    std::vector<std::string> stoplist = default_stoplist();
};

struct TranscriptEntry {
    AgentRole role = AgentRole::Expander;
    std::string request;
    std::string response;
    /// Set when the backend call itself failed.
    std::string error;
};

struct AgentSession {
    std::vector<std::string> keywords;
    std::string draft;
    std::string optimized;
    std::vector<std::string> nouns;
    std::vector<std::string> filtered;
    /// Optimizer rounds in the most recent Extension Agent pass.
    std::size_t opt_rounds = 0;
    std::size_t revision_rounds = 0;
    bool opt_cap_hit = false;
    bool revision_cap_hit = false;
    /// The filter backend failed and only the stoplist was applied.
    bool filter_degraded = false;
    std::size_t retries = 0;
    std::vector<std::string> warnings;
    std::vector<TranscriptEntry> transcript;

    std::size_t backend_calls() const { return transcript.size(); }
};

struct ExtractionResult {
    std::vector<std::string> nouns;
    bool revise = false;
};

struct FilterResult {
    std::vector<std::string> nouns;
    bool revise = false;
    bool degraded = false;
};

/// ASCII case folding used by every containment check.
std::string casefold(std::string_view s);

/// Runs the Extension Agent (expander + optimizer) and the Extraction Agent
/// (extractor + filter) against one backend. A session is strictly
/// sequential; one Orchestrator may serve several threads if the backend can.
class Orchestrator {
public:
    explicit Orchestrator(ChatBackend& backend, RoleTemplates templates = {}, AgentOptions options = {});

    /// Keyword-checked draft; one re-prompt when a keyword is missing.
    std::string expand(const std::vector<std::string>& keywords, AgentSession& session);
    /// Optimizer loop until verdict "good" or caps.max_opt rounds.
    std::string optimize(const std::vector<std::string>& keywords, const std::string& prompt, AgentSession& session);
    /// Nouns not present in the prompt are dropped with a warning.
    ExtractionResult extract_nouns(const std::string& prompt, AgentSession& session);
    /// Backend filter intersected with `nouns` (order kept), then the stoplist.
    FilterResult filter_abstract(const std::string& prompt, const std::vector<std::string>& nouns,
                                 AgentSession& session);

    /// Full loop. `session` holds everything gathered so far even when this throws.
    void run(const std::vector<std::string>& keywords, AgentSession& session,
             const std::optional<std::string>& prompt = std::nullopt);
    AgentSession run_session(const std::vector<std::string>& keywords,
                             const std::optional<std::string>& prompt = std::nullopt);

    const AgentOptions& options() const { return options_; }

private:
    std::string extension_agent(const std::vector<std::string>& keywords, const std::optional<std::string>& prompt,
                                AgentSession& session);
    std::string call(AgentRole role, std::vector<ChatMessage> messages, AgentSession& session);

    ChatBackend* backend_;
    RoleTemplates templates_;
    AgentOptions options_;
};

/// Session (including the full transcript) as pretty-printed JSON.
std::string session_to_json(const AgentSession& session);

}  // namespace attnmask::agent
