#include "attnmask/agent/orchestrator.hpp"
#include "attnmask/agent/scripted_backend.hpp"
#include "attnmask/error.hpp"
#include "attnmask/random.hpp"
#include "test_support.hpp"

#include <doctest.h>
#include <json.hpp>

#include <algorithm>

using namespace attnmask;
using namespace attnmask::agent;
using nlohmann::json;

namespace {

ScriptedResponse raw(AgentRole role, std::string content) { return {role, std::move(content), {}}; }

ScriptedResponse verdict(AgentRole role, const char* v, const json& payload) {
    return {role, json{{"verdict", v}, {"payload", payload}}.dump(), {}};
}

ScriptedResponse good(AgentRole role, const json& payload) { return verdict(role, "good", payload); }
ScriptedResponse revise(AgentRole role, const json& payload) { return verdict(role, "revise", payload); }
ScriptedResponse failure(AgentRole role, std::string msg) { return {role, {}, std::move(msg)}; }

std::size_t count_role(const AgentSession& s, AgentRole role) {
    return static_cast<std::size_t>(
        std::count_if(s.transcript.begin(), s.transcript.end(), [&](const auto& e) { return e.role == role; }));
}

bool contains(const std::vector<std::string>& v, const std::string& x) {
    return std::find(v.begin(), v.end(), x) != v.end();
}

const std::string kSanta = "Santa beside a glowing Christmas tree";
const std::string kCastle = "a stone castle under a white cloud";

// Any role, any verdict, garbage or transport failures, drawn from a seed.
class ChaosBackend : public ChatBackend {
public:
    explicit ChaosBackend(std::uint64_t seed) : rng_(seed) {}
    std::string complete(const ChatRequest& req) override {
        ++calls;
        const auto r = rng_.below(10);
        if (r == 0) throw BackendError("chaos");
        if (r == 1) return "not json at all";
        const char* v = rng_.below(2) ? "revise" : "good";
        switch (req.role) {
            case AgentRole::Expander: return rng_.below(4) ? "a red box and a blue cup" : "a tree";
            case AgentRole::Optimizer: return json{{"verdict", v}, {"payload", "a red box and a blue cup"}}.dump();
            default: {
                json list = json::array();
                for (const char* w : {"box", "cup", "colorful", "dragon"})
                    if (rng_.below(2)) list.push_back(w);
                return json{{"verdict", v}, {"payload", list}}.dump();
            }
        }
    }
    std::string describe() const override { return "chaos"; }
    std::size_t calls = 0;

private:
    Rng rng_;
};

}  // namespace

TEST_CASE("expander returns a sentence containing every keyword") {
    ScriptedBackend b({raw(AgentRole::Expander, kSanta)});
    Orchestrator o(b);
    AgentSession s;
    CHECK(o.expand({"Christmas", "Santa", "Tree"}, s) == kSanta);
    CHECK(s.transcript.size() == 1);
    CHECK(s.retries == 0);
}

TEST_CASE("empty keyword list is rejected before any call") {
    ScriptedBackend b({});
    Orchestrator o(b);
    AgentSession s;
    CHECK_THROWS_AS(o.expand({}, s), ConfigError);
    CHECK_THROWS_AS(o.run_session({}), ConfigError);
    CHECK(b.calls() == 0);
}

TEST_CASE("expander missing a keyword gets exactly one retry") {
    ScriptedBackend b({raw(AgentRole::Expander, "Santa and Christmas lights"), raw(AgentRole::Expander, kSanta)});
    Orchestrator o(b);
    AgentSession s;
    CHECK(o.expand({"Christmas", "Santa", "Tree"}, s) == kSanta);
    CHECK(count_role(s, AgentRole::Expander) == 2);
    CHECK(s.retries == 1);
    const auto reqs = b.requests();
    REQUIRE(reqs.size() == 2);
    CHECK(reqs[1].messages.back().content.find("Tree") != std::string::npos);

    ScriptedBackend twice({raw(AgentRole::Expander, "Santa"), raw(AgentRole::Expander, "Santa again")});
    Orchestrator o2(twice);
    AgentSession s2;
    try {
        o2.expand({"Santa", "Tree"}, s2);
        FAIL("expected keyword-missing");
    } catch (const AgentError& e) {
        CHECK(e.kind() == "keyword-missing");
    }
    CHECK(s2.transcript.size() == 2);
}

TEST_CASE("optimizer loop") {
    const std::vector<std::string> K{"Santa"};
    SUBCASE("good at once") {
        ScriptedBackend b({good(AgentRole::Optimizer, "first")});
        Orchestrator o(b);
        AgentSession s;
        CHECK(o.optimize(K, "draft", s) == "first");
        CHECK(s.opt_rounds == 1);
        CHECK_FALSE(s.opt_cap_hit);
    }
    SUBCASE("revise, revise, good") {
        ScriptedBackend b({revise(AgentRole::Optimizer, "one"), revise(AgentRole::Optimizer, "two"),
                           good(AgentRole::Optimizer, "three")});
        Orchestrator o(b);
        AgentSession s;
        CHECK(o.optimize(K, "draft", s) == "three");
        CHECK(s.opt_rounds == 3);
        CHECK(s.transcript.size() == 3);
        // Each round sees the previous draft.
        CHECK(b.requests()[1].messages.back().content.find("one") != std::string::npos);
    }
    SUBCASE("always revise stops at the cap") {
        std::vector<ScriptedResponse> script;
        for (int i = 0; i < 5; ++i) script.push_back(revise(AgentRole::Optimizer, "v" + std::to_string(i)));
        ScriptedBackend b(script);
        Orchestrator o(b);
        AgentSession s;
        CHECK(o.optimize(K, "draft", s) == "v2");
        CHECK(s.opt_rounds == 3);
        CHECK(s.opt_cap_hit);
        CHECK(b.remaining() == 2);
    }
    SUBCASE("sampling config travels with each request") {
        ScriptedBackend b({good(AgentRole::Optimizer, "x")});
        Orchestrator o(b);
        AgentSession s;
        o.optimize(K, "draft", s);
        const auto r = b.requests()[0];
        CHECK(r.sampling.temperature == 0.3);
        CHECK(r.sampling.top_p == 1.0);
        CHECK(r.sampling.max_tokens == 512);
    }
}

TEST_CASE("noun extraction") {
    SUBCASE("both nouns present") {
        ScriptedBackend b({raw(AgentRole::Extractor, R"(["castle","cloud"])")});
        Orchestrator o(b);
        AgentSession s;
        CHECK(o.extract_nouns(kCastle, s).nouns == std::vector<std::string>{"castle", "cloud"});
        CHECK(s.warnings.empty());
    }
    SUBCASE("absent noun is dropped with a warning") {
        ScriptedBackend b({good(AgentRole::Extractor, json{"castle", "dragon"})});
        Orchestrator o(b);
        AgentSession s;
        CHECK(o.extract_nouns(kCastle, s).nouns == std::vector<std::string>{"castle"});
        REQUIRE(s.warnings.size() == 1);
        CHECK(s.warnings[0].find("dragon") != std::string::npos);
    }
    SUBCASE("malformed reply then a valid retry") {
        ScriptedBackend b({raw(AgentRole::Extractor, "castle, cloud"),
                           raw(AgentRole::Extractor, "```json\n[\"Castle\", \"cloud\"]\n```")});
        Orchestrator o(b);
        AgentSession s;
        CHECK(o.extract_nouns(kCastle, s).nouns == std::vector<std::string>{"Castle", "cloud"});
        CHECK(s.transcript.size() == 2);
        CHECK(s.retries == 1);
    }
    SUBCASE("malformed twice is an error") {
        ScriptedBackend b({raw(AgentRole::Extractor, "nope"), raw(AgentRole::Extractor, "{\"payload\": 3}")});
        Orchestrator o(b);
        AgentSession s;
        try {
            o.extract_nouns(kCastle, s);
            FAIL("expected unparseable-reply");
        } catch (const AgentError& e) {
            CHECK(e.kind() == "unparseable-reply");
        }
    }
}

TEST_CASE("abstract word filter") {
    const std::string prompt = "colorful bells and stars";
    SUBCASE("stoplist removes colorful even if the backend keeps it") {
        ScriptedBackend b({good(AgentRole::Filter, json{"bells", "colorful", "stars"})});
        Orchestrator o(b);
        AgentSession s;
        const auto r = o.filter_abstract(prompt, {"bells", "colorful", "stars"}, s);
        CHECK(r.nouns == std::vector<std::string>{"bells", "stars"});
        CHECK_FALSE(r.degraded);
    }
    SUBCASE("backend order does not matter, n_fg order does") {
        ScriptedBackend b({good(AgentRole::Filter, json{"stars", "bells", "moon"})});
        Orchestrator o(b);
        AgentSession s;
        CHECK(o.filter_abstract(prompt, {"bells", "colorful", "stars"}, s).nouns ==
              std::vector<std::string>{"bells", "stars"});
    }
    SUBCASE("already concrete is unchanged") {
        ScriptedBackend b({good(AgentRole::Filter, json{"bells", "stars"})});
        Orchestrator o(b);
        AgentSession s;
        CHECK(o.filter_abstract(prompt, {"bells", "stars"}, s).nouns == std::vector<std::string>{"bells", "stars"});
    }
    SUBCASE("unreachable backend falls back to the stoplist") {
        ScriptedBackend b({failure(AgentRole::Filter, "connection refused")});
        Orchestrator o(b);
        AgentSession s;
        const auto r = o.filter_abstract(prompt, {"bells", "colorful", "stars"}, s);
        CHECK(r.nouns == std::vector<std::string>{"bells", "stars"});
        CHECK(r.degraded);
        CHECK(s.filter_degraded);
        REQUIRE(s.transcript.size() == 1);
        CHECK(s.transcript[0].error.find("connection refused") != std::string::npos);
    }
    SUBCASE("custom stoplist") {
        AgentOptions opts;
        opts.stoplist = {"Stars"};
        ScriptedBackend b({good(AgentRole::Filter, json{"bells", "stars"})});
        Orchestrator o(b, {}, opts);
        AgentSession s;
        CHECK(o.filter_abstract(prompt, {"bells", "stars"}, s).nouns == std::vector<std::string>{"bells"});
    }
}

TEST_CASE("full session") {
    const std::vector<std::string> K{"castle", "cloud"};
    SUBCASE("no revision requests") {
        ScriptedBackend b({raw(AgentRole::Expander, "castle and cloud"), good(AgentRole::Optimizer, kCastle),
                           good(AgentRole::Extractor, json{"castle", "cloud"}),
                           good(AgentRole::Filter, json{"castle", "cloud"})});
        Orchestrator o(b);
        const auto s = o.run_session(K);
        CHECK(s.optimized == kCastle);
        CHECK(s.filtered == std::vector<std::string>{"castle", "cloud"});
        CHECK(s.revision_rounds == 0);
        CHECK(count_role(s, AgentRole::Expander) == 1);
        CHECK(count_role(s, AgentRole::Optimizer) == 1);
        CHECK(count_role(s, AgentRole::Extractor) == 1);
        CHECK(count_role(s, AgentRole::Filter) == 1);
        CHECK(b.remaining() == 0);
    }
    SUBCASE("one revision re-enters the extension agent") {
        ScriptedBackend b({raw(AgentRole::Expander, "castle and cloud"), good(AgentRole::Optimizer, "castle, cloud"),
                           revise(AgentRole::Extractor, json{"castle"}), good(AgentRole::Filter, json{"castle"}),
                           good(AgentRole::Optimizer, kCastle), good(AgentRole::Extractor, json{"castle", "cloud"}),
                           good(AgentRole::Filter, json{"castle", "cloud"})});
        Orchestrator o(b);
        const auto s = o.run_session(K);
        CHECK(s.revision_rounds == 1);
        CHECK(s.optimized == kCastle);
        CHECK(s.filtered == std::vector<std::string>{"castle", "cloud"});
        // Two Extension Agent passes: the second refines the optimized prompt.
        CHECK(count_role(s, AgentRole::Optimizer) == 2);
        CHECK(b.requests()[4].messages.back().content.find("castle, cloud") != std::string::npos);
    }
    SUBCASE("always revising stops after the revision cap") {
        std::vector<ScriptedResponse> script{raw(AgentRole::Expander, "castle and cloud")};
        for (int pass = 0; pass < 3; ++pass) {
            script.push_back(good(AgentRole::Optimizer, kCastle));
            script.push_back(revise(AgentRole::Extractor, json{"castle"}));
            script.push_back(revise(AgentRole::Filter, json{"castle"}));
        }
        ScriptedBackend b(script);
        Orchestrator o(b);
        const auto s = o.run_session(K);
        CHECK(s.revision_rounds == 2);
        CHECK(s.revision_cap_hit);
        CHECK(s.filtered == std::vector<std::string>{"castle"});
        CHECK(s.backend_calls() == 10);
    }
    SUBCASE("nothing concrete survives") {
        ScriptedBackend b({raw(AgentRole::Expander, "castle and cloud"), good(AgentRole::Optimizer, kCastle),
                           good(AgentRole::Extractor, json{"dragon"}), good(AgentRole::Filter, json::array())});
        Orchestrator o(b);
        AgentSession s;
        try {
            o.run(K, s);
            FAIL("expected empty-foreground");
        } catch (const AgentError& e) {
            CHECK(e.kind() == "empty-foreground");
        }
        CHECK(s.transcript.size() == 4);
    }
    SUBCASE("a supplied prompt skips the expander") {
        ScriptedBackend b({good(AgentRole::Optimizer, kCastle), good(AgentRole::Extractor, json{"castle"}),
                           good(AgentRole::Filter, json{"castle"})});
        Orchestrator o(b);
        const auto s = o.run_session(K, std::string("castle in a cloud"));
        CHECK(s.draft == "castle in a cloud");
        CHECK(count_role(s, AgentRole::Expander) == 0);
    }
    SUBCASE("role mismatch in the script is loud") {
        ScriptedBackend b({good(AgentRole::Optimizer, kCastle)});
        Orchestrator o(b);
        CHECK_THROWS_AS(o.run_session(K), InvariantError);
    }
}

TEST_CASE("adversarial backends terminate within the call budget and keep the subset chain") {
    for (std::size_t max_opt : {1u, 3u})
        for (std::size_t max_rev : {0u, 2u})
            for (std::uint64_t seed = 0; seed < 200; ++seed) {
                ChaosBackend b(seed);
                AgentOptions opts;
                opts.caps = {max_opt, max_rev};
                Orchestrator o(b, {}, opts);
                AgentSession s;
                bool ok = true;
                try {
                    o.run({"box", "cup"}, s);
                } catch (const Error&) {
                    ok = false;
                }
                REQUIRE(s.backend_calls() == b.calls);
                CHECK(s.backend_calls() <= opts.caps.call_budget() + s.retries);
                CHECK(s.retries <= opts.caps.call_budget());
                CHECK(s.opt_rounds <= max_opt);
                CHECK(s.revision_rounds <= max_rev);
                if (ok) {
                    CHECK_FALSE(s.filtered.empty());
                    const std::string p = casefold(s.optimized);
                    for (const auto& n : s.filtered) {
                        CHECK(contains(s.nouns, n));
                        CHECK(p.find(casefold(n)) != std::string::npos);
                    }
                }
            }
}

TEST_CASE("transcript records every call in order and replays identically") {
    auto script = [] {
        return std::vector<ScriptedResponse>{
            raw(AgentRole::Expander, "castle only"), raw(AgentRole::Expander, "castle and cloud"),
            revise(AgentRole::Optimizer, "castle, cloud"), raw(AgentRole::Optimizer, "garbage"),
            good(AgentRole::Optimizer, kCastle), raw(AgentRole::Extractor, "[\"castle\",\"cloud\",\"dragon\"]"),
            failure(AgentRole::Filter, "timeout")};
    };
    ScriptedBackend a(script()), b(script());
    const auto sa = Orchestrator(a).run_session({"castle", "cloud"});
    const auto sb = Orchestrator(b).run_session({"castle", "cloud"});
    CHECK(session_to_json(sa) == session_to_json(sb));
    REQUIRE(sa.transcript.size() == 7);
    const auto reqs = a.requests();
    const auto scripted = script();
    for (std::size_t i = 0; i < 7; ++i) {
        CHECK(sa.transcript[i].role == *scripted[i].role);
        CHECK(sa.transcript[i].request == reqs[i].messages.back().content);
        CHECK(sa.transcript[i].response == scripted[i].content);
    }
    CHECK(sa.retries == 2);
    CHECK(sa.filter_degraded);
    CHECK(sa.filtered == std::vector<std::string>{"castle", "cloud"});
    const auto doc = json::parse(session_to_json(sa));
    CHECK(doc["transcript"].size() == 7);
    CHECK(doc["transcript"][6]["error"] == "timeout");
}

TEST_CASE("templates") {
    RoleTemplates t;
    CHECK_NOTHROW(t.validate());
    t.set(AgentRole::Filter, "Nouns: {{nouns}} {{unknown}}");
    CHECK_THROWS_AS(t.validate(), ConfigError);
    ScriptedBackend b({});
    CHECK_THROWS_AS(Orchestrator(b, t), ConfigError);

    testing::TempDir dir;
    testing::write_text(dir / "expander.txt", "Keywords: {{keywords}}");
    const auto loaded = RoleTemplates::load(dir.path());
    CHECK(loaded.render(AgentRole::Expander, {{"keywords", "a, b"}}) == "Keywords: a, b");
    CHECK(loaded.text(AgentRole::Optimizer) == RoleTemplates{}.text(AgentRole::Optimizer));
    testing::write_text(dir / "optimizer.txt", "{{prompt");
    CHECK_THROWS_AS(RoleTemplates::load(dir.path()), ConfigError);
    testing::write_text(dir / "optimizer.txt", "{{missing}}");
    CHECK_THROWS_AS(RoleTemplates::load(dir.path()), ConfigError);
    CHECK_THROWS_AS(RoleTemplates::load(dir / "nope"), IoError);
}

TEST_CASE("script files") {
    const auto b = ScriptedBackend::from_json(R"({"responses": [
        {"role": "optimizer", "verdict": "good", "payload": "p"},
        {"role": "extractor", "payload": ["a"]},
        {"role": "filter", "error": "down"},
        {"content": "anything"}]})");
    CHECK(b.remaining() == 4);
    CHECK_THROWS_AS(ScriptedBackend::from_json(R"({"responses": [{"role": "poet", "content": "x"}]})"), ConfigError);
    CHECK_THROWS_AS(ScriptedBackend::from_json("[]"), ConfigError);
    CHECK(parse_role("filter") == AgentRole::Filter);
    CHECK_FALSE(parse_role("judge"));
}

TEST_CASE("caps") {
    CHECK(AgentCaps{}.call_budget() == 16);
    CHECK_THROWS_AS(AgentCaps({0, 2}).validate(), ConfigError);
}
