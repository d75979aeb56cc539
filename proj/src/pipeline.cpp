#include "attnmask/pipeline.hpp"

#include "attnmask/agent/scripted_backend.hpp"
#include "attnmask/compositor.hpp"
#include "attnmask/parallel.hpp"

#include <json.hpp>

#include <chrono>
#include <fstream>
#include <memory>
#include <sstream>

namespace attnmask {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

[[noreturn]] void unknown_key(const std::string& where, const std::string& key) {
    throw ConfigError("unknown config key \"" + key + "\" in " + where);
}

template <typename T>
T get(const json& v, const std::string& key) {
    try {
        return v.get<T>();
    } catch (const json::exception&) {
        throw ConfigError("config key \"" + key + "\" has the wrong type");
    }
}

fs::path resolve(const fs::path& base, const std::string& p) {
    const fs::path path(p);
    return path.is_absolute() || base.empty() ? path : base / path;
}

void apply_outputs(PipelineOutputs& out, const json& obj, const fs::path& base) {
    for (const auto& [k, v] : obj.items()) {
        const auto p = resolve(base, get<std::string>(v, k));
        if (k == "rgba") out.rgba = p;
        else if (k == "mask") out.mask = p;
        else if (k == "trimap") out.trimap = p;
        else if (k == "report") out.report = p;
        else if (k == "heatmap") out.heatmap = p;
        else unknown_key("outputs", k);
    }
}

void apply_agent(AgentSettings& a, const json& obj, const fs::path& base) {
    for (const auto& [k, v] : obj.items()) {
        if (k == "mock") a.mock = resolve(base, get<std::string>(v, k));
        else if (k == "templates") a.templates = resolve(base, get<std::string>(v, k));
        else if (k == "transcript") a.transcript = resolve(base, get<std::string>(v, k));
        else if (k == "prompt") a.prompt = get<std::string>(v, k);
        else if (k == "max_opt") a.caps.max_opt = get<std::size_t>(v, k);
        else if (k == "max_revisions") a.caps.max_revisions = get<std::size_t>(v, k);
        else if (k == "stoplist") a.stoplist = get<std::vector<std::string>>(v, k);
        else unknown_key("agent", k);
    }
}

void apply_backend(agent::OpenAiConfig& b, const json& obj) {
    for (const auto& [k, v] : obj.items()) {
        if (k == "base_url") b.base_url = get<std::string>(v, k);
        else if (k == "model") b.model = get<std::string>(v, k);
        else if (k == "api_key_env") b.api_key_env = get<std::string>(v, k);
        else if (k == "timeout_ms") b.timeout = std::chrono::milliseconds(get<long>(v, k));
        else if (k == "retries") b.retries = get<int>(v, k);
        else if (k == "backoff_ms") b.backoff = std::chrono::milliseconds(get<long>(v, k));
        else unknown_key("backend", k);
    }
}

const char* entropy_tokens_name(EntropyTokens e) { return e == EntropyTokens::Valid ? "valid" : "keywords"; }

std::vector<bool> entropy_mask(const TokenTable& tokens, const std::vector<std::string>& keywords,
                               EntropyTokens mode) {
    if (mode == EntropyTokens::Valid) return tokens.valid;
    std::vector<bool> mask(tokens.size(), false);
    for (const auto& kw : keywords)
        for (std::size_t n : match_keyword(tokens, kw)) mask[n] = true;
    return mask;
}

template <typename Fn>
auto run_stage(const std::string& stage, Fn&& fn) {
    try {
        return fn();
    } catch (const StageError&) {
        throw;
    } catch (const Error& e) {
        throw StageError(stage, e);
    } catch (const std::exception& e) {
        throw StageError(stage, "internal", e.what());
    }
}

class Stopwatch {
public:
    double lap_ms() {
        const auto now = std::chrono::steady_clock::now();
        const double ms = std::chrono::duration<double, std::milli>(now - last_).count();
        last_ = now;
        return ms;
    }

private:
    std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
    if (!out) throw IoError("write failed for " + path.string());
}

void check_output_dir(const fs::path& p) {
    if (p.empty()) return;
    const fs::path dir = p.parent_path().empty() ? fs::path(".") : p.parent_path();
    if (!fs::is_directory(dir)) throw IoError("output directory does not exist: " + dir.string());
}

}  // namespace

void PipelineConfig::resolve_outputs() {
    if (outputs.rgba.empty()) outputs.rgba = out_dir / "rgba.png";
    if (outputs.mask.empty()) outputs.mask = out_dir / "mask.png";
    if (outputs.trimap.empty()) outputs.trimap = out_dir / "trimap.pgm";
    if (outputs.report.empty()) outputs.report = out_dir / "report.json";
}

void PipelineConfig::validate() const {
    if (dump.empty()) throw ConfigError("no dump path given");
    if (image.empty()) throw ConfigError("no image path given");
    if (!fs::is_regular_file(dump)) throw IoError("dump file not found: " + dump.string());
    if (!fs::is_regular_file(image)) throw IoError("image file not found: " + image.string());
    if (keywords.empty()) throw ConfigError(session ? "the agent session needs seed keywords" : "no keywords given");
    if (session && !agent.mock.empty() && !fs::is_regular_file(agent.mock))
        throw IoError("mock script not found: " + agent.mock.string());
    fusion.validate();
    thresholds.validate();
    grabcut.validate();
    agent.caps.validate();
    for (const auto* p : {&outputs.rgba, &outputs.mask, &outputs.trimap, &outputs.report, &outputs.heatmap,
                          &agent.transcript})
        check_output_dir(*p);
}

void apply_config_json(PipelineConfig& c, const std::string& text, const fs::path& base) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw ConfigError("config must be a JSON object");
    for (const auto& [k, v] : doc.items()) {
        if (k == "dump") c.dump = resolve(base, get<std::string>(v, k));
        else if (k == "image") c.image = resolve(base, get<std::string>(v, k));
        else if (k == "out_dir") c.out_dir = resolve(base, get<std::string>(v, k));
        else if (k == "outputs") apply_outputs(c.outputs, v, base);
        else if (k == "keywords") c.keywords = get<std::vector<std::string>>(v, k);
        else if (k == "session") c.session = get<bool>(v, k);
        else if (k == "threads") c.threads = get<unsigned>(v, k);
        else if (k == "agent") apply_agent(c.agent, v, base);
        else if (k == "backend") apply_backend(c.backend, v);
        else if (k == "fusion") {
            for (const auto& [fk, fv] : v.items()) {
                if (fk == "bins") c.fusion.bins = get<std::size_t>(fv, fk);
                else if (fk == "epsilon") c.fusion.epsilon = get<double>(fv, fk);
                else if (fk == "entropy_tokens") {
                    const auto s = get<std::string>(fv, fk);
                    if (s == "valid") c.entropy_tokens = EntropyTokens::Valid;
                    else if (s == "keywords") c.entropy_tokens = EntropyTokens::Keywords;
                    else throw ConfigError("fusion.entropy_tokens must be \"valid\" or \"keywords\"");
                } else unknown_key("fusion", fk);
            }
        } else if (k == "thresholds") {
            for (const auto& [tk, tv] : v.items()) {
                if (tk == "sure_fg") c.thresholds.sure_fg = get<double>(tv, tk);
                else if (tk == "prob_fg") c.thresholds.prob_fg = get<double>(tv, tk);
                else if (tk == "prob_bg") c.thresholds.prob_bg = get<double>(tv, tk);
                else if (tk == "at_latent") c.threshold_at_latent = get<bool>(tv, tk);
                else unknown_key("thresholds", tk);
            }
        } else if (k == "grabcut") {
            for (const auto& [gk, gv] : v.items()) {
                if (gk == "components") c.grabcut.components = get<std::size_t>(gv, gk);
                else if (gk == "gamma") c.grabcut.gamma = get<double>(gv, gk);
                else if (gk == "iterations") c.grabcut.iterations = get<std::size_t>(gv, gk);
                else if (gk == "seed") c.grabcut.seed = get<std::uint64_t>(gv, gk);
                else unknown_key("grabcut", gk);
            }
        } else unknown_key("config", k);
    }
}

PipelineConfig load_pipeline_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    PipelineConfig c;
    apply_config_json(c, ss.str(), path.parent_path());
    return c;
}

StageError::StageError(std::string stage, const Error& inner)
    : Error(inner.kind(), stage + ": " + inner.what()), stage_(std::move(stage)) {}

StageError::StageError(std::string stage, const std::string& kind, const std::string& message)
    : Error(kind, stage + ": " + message), stage_(std::move(stage)) {}

int exit_code_for(const Error& error) {
    const std::string& k = error.kind();
    if (k == "config" || k == "io" || k == "format" || k == "unmatched-keyword") return 1;
    return 2;
}

FusionOutcome fuse_dump(const fs::path& dump, const std::vector<std::string>& keywords, const WeightConfig& cfg,
                        EntropyTokens entropy_tokens, bool drop_unmatched) {
    auto reader = DumpReader::open(dump);
    FusionOutcome out;
    out.header = reader.header();
    out.tokens = reader.tokens();

    std::vector<std::string> used;
    for (const auto& kw : keywords) {
        if (!drop_unmatched || !match_keyword(out.tokens, kw).empty())
            used.push_back(kw);
        else
            out.warnings.push_back("keyword \"" + kw + "\" matches no dump token; skipped");
    }
    if (used.empty()) {
        // Reproduce the unmatched-keyword diagnostics for the first keyword.
        keyword_maps(FusedMap{out.tokens.size(), 0, {}, {}}, out.tokens, {keywords.front()});
        throw ConfigError("no keyword matches a dump token");
    }

    auto mask = entropy_mask(out.tokens, used, entropy_tokens);
    FusionAccumulator acc(out.header.steps, out.header.layers, out.header.num_tokens, out.header.latent_pixels(), cfg,
                          std::move(mask));
    AttentionRecord record;
    while (reader.next(record)) acc.add(extract_cross(record, out.header));
    out.fused = std::move(acc).finish();
    out.selection = keyword_maps(out.fused, out.tokens, used);
    return out;
}

PipelineResult run_pipeline(const PipelineConfig& input, agent::ChatBackend* backend) {
    PipelineConfig config = input;
    config.resolve_outputs();
    config.validate();
    set_thread_count(config.threads);

    PipelineResult result;
    Stopwatch clock;
    json timings = json::object();

    json agent_report = nullptr;
    std::vector<std::string> keywords = config.keywords;
    if (config.session) {
        run_stage("agent", [&] {
            std::unique_ptr<agent::ChatBackend> owned;
            if (!backend) {
                if (!config.agent.mock.empty())
                    owned = std::make_unique<agent::ScriptedBackend>(agent::ScriptedBackend::from_file(config.agent.mock));
                else
                    owned = std::make_unique<agent::OpenAiBackend>(config.backend);
            }
            agent::ChatBackend& chosen = backend ? *backend : *owned;
            auto templates = config.agent.templates.empty() ? agent::RoleTemplates()
                                                            : agent::RoleTemplates::load(config.agent.templates);
            agent::Orchestrator orch(chosen, templates,
                                     agent::AgentOptions{config.agent.caps, {}, config.agent.stoplist});
            agent::AgentSession session;
            try {
                orch.run(config.keywords, session, config.agent.prompt);
            } catch (...) {
                if (!config.agent.transcript.empty()) write_text(config.agent.transcript, agent::session_to_json(session));
                throw;
            }
            if (!config.agent.transcript.empty()) write_text(config.agent.transcript, agent::session_to_json(session));
            keywords = session.filtered;
            for (const auto& w : session.warnings) result.warnings.push_back("agent: " + w);
            if (session.filter_degraded) result.status = RunStatus::Degraded;
            agent_report = json::parse(agent::session_to_json(session));
            agent_report.erase("transcript");
            return 0;
        });
        timings["agent"] = clock.lap_ms();
    }
    result.keywords = keywords;

    FusionOutcome fusion = run_stage("fuse", [&] {
        return fuse_dump(config.dump, keywords, config.fusion, config.entropy_tokens, config.session);
    });
    for (const auto& w : fusion.warnings) result.warnings.push_back("fuse: " + w);
    timings["fuse"] = clock.lap_ms();

    const RgbImage image = run_stage("image", [&] { return read_rgb(config.image); });
    const std::size_t lw = fusion.header.width;
    const std::size_t lh = fusion.header.height;

    Trimap trimap = run_stage("trimap", [&] {
        if (image.width < lw || image.height < lh)
            throw ShapeError("image " + std::to_string(image.width) + "x" + std::to_string(image.height) +
                             " is smaller than the latent grid " + std::to_string(lw) + "x" + std::to_string(lh));
        if (config.threshold_at_latent) {
            const ScalarImage latent{lw, lh, fusion.selection.union_map};
            return resize_trimap_nearest(build_trimap(latent, config.thresholds), image.width, image.height);
        }
        return build_trimap(upsample(fusion.selection.union_map, lw, lh, image.width, image.height),
                            config.thresholds);
    });
    timings["trimap"] = clock.lap_ms();

    const auto counts = trimap.counts();
    if (counts[static_cast<std::size_t>(TrimapLabel::SureBg)] == trimap.pixels()) {
        result.status = RunStatus::Degraded;
        result.warnings.push_back("trimap: keyword map is empty, subject will be empty");
    }

    SegmentationReport seg;
    result.mask = run_stage("segment", [&] { return segment(image, trimap, config.grabcut, &seg); });
    timings["segment"] = clock.lap_ms();
    if (result.mask.count() == 0) {
        result.status = RunStatus::Degraded;
        result.warnings.push_back("segment: empty subject mask");
    }

    run_stage("write", [&] {
        write_rgba_png(config.outputs.rgba, compose(image, result.mask));
        write_mask(config.outputs.mask, result.mask);
        write_gray(config.outputs.trimap, trimap_to_gray(trimap));
        if (!config.outputs.heatmap.empty())
            write_map16_png(config.outputs.heatmap, ScalarImage{lw, lh, fusion.selection.union_map});
        return 0;
    });
    timings["write"] = clock.lap_ms();

    json maps = json::array();
    for (const auto& p : fusion.fused.provenance)
        maps.push_back({{"step", p.step}, {"layer", p.layer}, {"entropy", p.entropy}, {"weight", p.weight}});
    json kws = json::array();
    for (const auto& km : fusion.selection.maps) kws.push_back({{"keyword", km.keyword}, {"tokens", km.token_indices}});

    json report = {
        {"status", result.status == RunStatus::Ok ? "ok" : "degraded"},
        {"dump",
         {{"path", config.dump.string()},
          {"layout", to_string(fusion.header.layout)},
          {"steps", fusion.header.steps},
          {"layers", fusion.header.layers},
          {"num_tokens", fusion.header.num_tokens},
          {"height", fusion.header.height},
          {"width", fusion.header.width},
          {"heads", fusion.header.heads},
          {"tokens", fusion.tokens.tokens},
          {"valid", fusion.tokens.valid}}},
        {"image", {{"path", config.image.string()}, {"width", image.width}, {"height", image.height}}},
        {"keywords", kws},
        {"fusion",
         {{"bins", config.fusion.bins},
          {"epsilon", config.fusion.epsilon},
          {"entropy_tokens", entropy_tokens_name(config.entropy_tokens)},
          {"scale", 1.0 / static_cast<double>(fusion.header.record_count())},
          {"maps", maps}}},
        {"trimap",
         {{"sure_fg", config.thresholds.sure_fg},
          {"prob_fg", config.thresholds.prob_fg},
          {"prob_bg", config.thresholds.prob_bg},
          {"at_latent", config.threshold_at_latent},
          {"counts",
           {{"sure_bg", counts[0]}, {"prob_bg", counts[1]}, {"prob_fg", counts[2]}, {"sure_fg", counts[3]}}}}},
        {"grabcut",
         {{"components", config.grabcut.components},
          {"gamma", config.grabcut.gamma},
          {"seed", config.grabcut.seed},
          {"beta", seg.beta},
          {"hard_link_capacity", seg.hard_link_capacity},
          {"iterations_run", seg.iterations_run},
          {"converged", seg.converged},
          {"trivial", seg.trivial},
          {"energies", seg.energies},
          {"flows", seg.flows},
          {"changed_pixels", seg.changed_pixels}}},
        {"subject_pixels", result.mask.count()},
        {"outputs",
         {{"rgba", config.outputs.rgba.string()},
          {"mask", config.outputs.mask.string()},
          {"trimap", config.outputs.trimap.string()}}},
        {"threads", thread_count()},
        {"warnings", result.warnings},
        {"timings_ms", timings}};
    if (!agent_report.is_null()) report["agent"] = agent_report;
    result.report = report.dump(2);
    run_stage("write", [&] {
        write_text(config.outputs.report, result.report + "\n");
        return 0;
    });
    return result;
}

}  // namespace attnmask
