#include "attnmask/agent/orchestrator.hpp"

#include "attnmask/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>

namespace attnmask::agent {

using nlohmann::json;

namespace {

struct Structured {
    bool revise = false;
    json payload;
};

std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

/// Strips ``` fences and surrounding prose, then parses the outermost JSON value.
std::optional<json> parse_json_reply(const std::string& content) {
    std::string text = trim(content);
    if (text.rfind("```", 0) == 0) {
        const auto nl = text.find('\n');
        const auto close = text.rfind("```");
        if (nl != std::string::npos && close > nl) text = trim(text.substr(nl + 1, close - nl - 1));
    }
    auto attempt = [](const std::string& s) -> std::optional<json> {
        try {
            return json::parse(s);
        } catch (const json::exception&) {
            return std::nullopt;
        }
    };
    if (auto j = attempt(text)) return j;
    for (auto [open, close] : {std::pair{'{', '}'}, std::pair{'[', ']'}}) {
        const auto b = text.find(open);
        const auto e = text.rfind(close);
        if (b != std::string::npos && e != std::string::npos && e > b)
            if (auto j = attempt(text.substr(b, e - b + 1))) return j;
    }
    return std::nullopt;
}

std::optional<bool> parse_verdict(const json& j) {
    if (!j.contains("verdict") || !j["verdict"].is_string()) return std::nullopt;
    const std::string v = casefold(j["verdict"].get<std::string>());
    if (v == "good") return false;
    if (v == "revise") return true;
    return std::nullopt;
}

std::optional<Structured> parse_string_reply(const std::string& content) {
    const auto j = parse_json_reply(content);
    if (!j || !j->is_object() || !j->contains("payload") || !(*j)["payload"].is_string()) return std::nullopt;
    const auto verdict = parse_verdict(*j);
    if (!verdict) return std::nullopt;
    if (trim((*j)["payload"].get<std::string>()).empty()) return std::nullopt;
    return Structured{*verdict, (*j)["payload"]};
}

/// Object with a string-array payload, or a bare array (verdict "good").
std::optional<Structured> parse_list_reply(const std::string& content) {
    const auto j = parse_json_reply(content);
    if (!j) return std::nullopt;
    Structured s;
    if (j->is_array()) {
        s.payload = *j;
    } else if (j->is_object() && j->contains("payload")) {
        s.payload = (*j)["payload"];
        if (j->contains("verdict")) {
            const auto verdict = parse_verdict(*j);
            if (!verdict) return std::nullopt;
            s.revise = *verdict;
        }
    } else {
        return std::nullopt;
    }
    if (!s.payload.is_array()) return std::nullopt;
    for (const auto& item : s.payload)
        if (!item.is_string()) return std::nullopt;
    return s;
}

std::vector<std::string> string_list(const json& payload) {
    std::vector<std::string> out;
    for (const auto& item : payload) {
        std::string s = trim(item.get<std::string>());
        if (!s.empty()) out.push_back(std::move(s));
    }
    return out;
}

std::string join(const std::vector<std::string>& items) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i) out += ", ";
        out += items[i];
    }
    return out;
}

bool contains_folded(const std::string& haystack_folded, const std::string& needle) {
    return haystack_folded.find(casefold(needle)) != std::string::npos;
}

const char* kReformat =
    "Your reply could not be parsed. Reply again with only a JSON object of the form "
    "{\"verdict\": \"good\" or \"revise\", \"payload\": ...}.";

}  // namespace

void AgentCaps::validate() const {
    if (max_opt == 0) throw ConfigError("max_opt must be at least 1");
}

std::vector<std::string> default_stoplist() { return {"colorful", "details", "data"}; }

std::string casefold(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

Orchestrator::Orchestrator(ChatBackend& backend, RoleTemplates templates, AgentOptions options)
    : backend_(&backend), templates_(std::move(templates)), options_(std::move(options)) {
    options_.caps.validate();
    templates_.validate();
}

std::string Orchestrator::call(AgentRole role, std::vector<ChatMessage> messages, AgentSession& session) {
    TranscriptEntry entry;
    entry.role = role;
    entry.request = messages.back().content;
    ChatRequest request{role, std::move(messages), options_.sampling};
    try {
        entry.response = backend_->complete(request);
    } catch (const BackendError& e) {
        entry.error = e.what();
        session.transcript.push_back(std::move(entry));
        throw;
    }
    session.transcript.push_back(entry);
    return entry.response;
}

std::string Orchestrator::expand(const std::vector<std::string>& keywords, AgentSession& session) {
    if (keywords.empty()) throw ConfigError("keyword list is empty");
    for (const auto& k : keywords)
        if (trim(k).empty()) throw ConfigError("keyword list contains an empty keyword");

    std::vector<ChatMessage> messages{
        {"system", system_message(AgentRole::Expander)},
        {"user", templates_.render(AgentRole::Expander, {{"keywords", join(keywords)}})}};
    std::vector<std::string> missing;
    for (int attempt = 0; attempt < 2; ++attempt) {
        const std::string reply = call(AgentRole::Expander, messages, session);
        std::string draft = trim(reply);
        if (const auto j = parse_json_reply(reply); j && j->is_object() && j->contains("payload") &&
                                                     (*j)["payload"].is_string())
            draft = trim((*j)["payload"].get<std::string>());

        const std::string folded = casefold(draft);
        missing.clear();
        for (const auto& k : keywords)
            if (!contains_folded(folded, trim(k))) missing.push_back(k);
        if (!draft.empty() && missing.empty()) {
            session.draft = draft;
            return draft;
        }
        if (attempt == 0) {
            ++session.retries;
            messages.push_back({"assistant", reply});
            messages.push_back({"user", draft.empty() ? std::string("The prompt was empty. Write it again.")
                                                      : "The prompt must mention every keyword; missing: " +
                                                            join(missing) + ". Write it again."});
        }
    }
    throw AgentError("keyword-missing",
                     "expander omitted keyword(s) after one retry: " + (missing.empty() ? "<empty prompt>" : join(missing)));
}

std::string Orchestrator::optimize(const std::vector<std::string>& keywords, const std::string& prompt,
                                   AgentSession& session) {
    if (trim(prompt).empty()) throw ConfigError("optimizer needs a nonempty prompt");
    std::string current = prompt;
    session.opt_rounds = 0;
    session.opt_cap_hit = false;
    for (std::size_t round = 0; round < options_.caps.max_opt; ++round) {
        std::vector<ChatMessage> messages{
            {"system", system_message(AgentRole::Optimizer)},
            {"user", templates_.render(AgentRole::Optimizer, {{"keywords", join(keywords)}, {"prompt", current}})}};
        std::string reply = call(AgentRole::Optimizer, messages, session);
        auto parsed = parse_string_reply(reply);
        if (!parsed) {
            ++session.retries;
            messages.push_back({"assistant", reply});
            messages.push_back({"user", kReformat});
            reply = call(AgentRole::Optimizer, messages, session);
            parsed = parse_string_reply(reply);
            if (!parsed) throw AgentError("unparseable-reply", "optimizer reply unparseable after one reformat retry");
        }
        current = trim(parsed->payload.get<std::string>());
        session.opt_rounds = round + 1;
        if (!parsed->revise) {
            session.optimized = current;
            return current;
        }
    }
    session.opt_cap_hit = true;
    session.warnings.push_back("optimizer still requested revision after " + std::to_string(options_.caps.max_opt) +
                               " rounds; using the last draft");
    session.optimized = current;
    return current;
}

ExtractionResult Orchestrator::extract_nouns(const std::string& prompt, AgentSession& session) {
    std::vector<ChatMessage> messages{{"system", system_message(AgentRole::Extractor)},
                                      {"user", templates_.render(AgentRole::Extractor, {{"prompt", prompt}})}};
    std::string reply = call(AgentRole::Extractor, messages, session);
    auto parsed = parse_list_reply(reply);
    if (!parsed) {
        ++session.retries;
        messages.push_back({"assistant", reply});
        messages.push_back({"user", kReformat});
        reply = call(AgentRole::Extractor, messages, session);
        parsed = parse_list_reply(reply);
        if (!parsed) throw AgentError("unparseable-reply", "extractor reply unparseable after one reformat retry");
    }
    ExtractionResult result;
    result.revise = parsed->revise;
    const std::string folded = casefold(prompt);
    for (auto& noun : string_list(parsed->payload)) {
        if (contains_folded(folded, noun))
            result.nouns.push_back(std::move(noun));
        else
            session.warnings.push_back("extractor noun \"" + noun + "\" does not occur in the prompt; dropped");
    }
    session.nouns = result.nouns;
    return result;
}

FilterResult Orchestrator::filter_abstract(const std::string& prompt, const std::vector<std::string>& nouns,
                                           AgentSession& session) {
    std::vector<std::string> stop;
    for (const auto& s : options_.stoplist) stop.push_back(casefold(trim(s)));
    auto stopped = [&](const std::string& n) { return std::find(stop.begin(), stop.end(), casefold(n)) != stop.end(); };

    FilterResult result;
    std::vector<std::string> kept;
    try {
        std::vector<ChatMessage> messages{
            {"system", system_message(AgentRole::Filter)},
            {"user", templates_.render(AgentRole::Filter, {{"prompt", prompt}, {"nouns", json(nouns).dump()}})}};
        std::string reply = call(AgentRole::Filter, messages, session);
        auto parsed = parse_list_reply(reply);
        if (!parsed) {
            ++session.retries;
            messages.push_back({"assistant", reply});
            messages.push_back({"user", kReformat});
            reply = call(AgentRole::Filter, messages, session);
            parsed = parse_list_reply(reply);
            if (!parsed) throw AgentError("unparseable-reply", "filter reply unparseable after one reformat retry");
        }
        result.revise = parsed->revise;
        std::vector<std::string> backend_kept;
        for (const auto& n : string_list(parsed->payload)) backend_kept.push_back(casefold(n));
        for (const auto& n : nouns)
            if (std::find(backend_kept.begin(), backend_kept.end(), casefold(n)) != backend_kept.end())
                kept.push_back(n);
    } catch (const BackendError& e) {
        result.degraded = true;
        session.filter_degraded = true;
        session.warnings.push_back(std::string("filter backend failed (") + e.what() + "); stoplist only");
        kept = nouns;
    }
    for (auto& n : kept)
        if (!stopped(n)) result.nouns.push_back(std::move(n));
    session.filtered = result.nouns;
    return result;
}

std::string Orchestrator::extension_agent(const std::vector<std::string>& keywords,
                                          const std::optional<std::string>& prompt, AgentSession& session) {
    const std::string draft = prompt ? *prompt : expand(keywords, session);
    if (prompt) session.draft = *prompt;
    return optimize(keywords, draft, session);
}

void Orchestrator::run(const std::vector<std::string>& keywords, AgentSession& session,
                       const std::optional<std::string>& prompt) {
    if (keywords.empty()) throw ConfigError("keyword list is empty");
    session = AgentSession{};
    session.keywords = keywords;

    std::string refined = extension_agent(keywords, prompt, session);
    for (;;) {
        const auto extracted = extract_nouns(refined, session);
        const auto filtered = filter_abstract(refined, extracted.nouns, session);
        if (!extracted.revise && !filtered.revise) break;
        if (session.revision_rounds >= options_.caps.max_revisions) {
            session.revision_cap_hit = true;
            session.warnings.push_back("extraction still requested revision after " +
                                       std::to_string(options_.caps.max_revisions) + " revisions");
            break;
        }
        ++session.revision_rounds;
        refined = extension_agent(keywords, refined, session);
    }
    if (session.filtered.empty())
        throw AgentError("empty-foreground", "no concrete foreground nouns survived extraction and filtering");
}

AgentSession Orchestrator::run_session(const std::vector<std::string>& keywords,
                                       const std::optional<std::string>& prompt) {
    AgentSession session;
    run(keywords, session, prompt);
    return session;
}

std::string session_to_json(const AgentSession& s) {
    json transcript = json::array();
    for (const auto& e : s.transcript) {
        json entry = {{"role", to_string(e.role)}, {"request", e.request}, {"response", e.response}};
        if (!e.error.empty()) entry["error"] = e.error;
        transcript.push_back(std::move(entry));
    }
    json doc = {{"keywords", s.keywords},
                {"draft", s.draft},
                {"prompt", s.optimized},
                {"nouns", s.nouns},
                {"foreground", s.filtered},
                {"opt_rounds", s.opt_rounds},
                {"revision_rounds", s.revision_rounds},
                {"opt_cap_hit", s.opt_cap_hit},
                {"revision_cap_hit", s.revision_cap_hit},
                {"filter_degraded", s.filter_degraded},
                {"retries", s.retries},
                {"backend_calls", s.backend_calls()},
                {"warnings", s.warnings},
                {"transcript", transcript}};
    return doc.dump(2);
}

}  // namespace attnmask::agent
