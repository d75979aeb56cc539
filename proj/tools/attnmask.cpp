// attnmask: subject masks and binary-alpha RGBA images from attention dumps.

#include "attnmask/agent/openai_backend.hpp"
#include "attnmask/agent/orchestrator.hpp"
#include "attnmask/agent/scripted_backend.hpp"
#include "attnmask/compositor.hpp"
#include "attnmask/dump_format.hpp"
#include "attnmask/error.hpp"
#include "attnmask/fusion.hpp"
#include "attnmask/grabcut.hpp"
#include "attnmask/image.hpp"
#include "attnmask/parallel.hpp"
#include "attnmask/pipeline.hpp"
#include "attnmask/random.hpp"
#include "attnmask/scene.hpp"
#include "attnmask/synthetic.hpp"
#include "attnmask/trimap.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <memory>

namespace fs = std::filesystem;
using namespace attnmask;
using nlohmann::json;

namespace {

struct BackendFlags {
    std::string base_url;
    std::string model;
    std::string api_key_env;
    long timeout_ms = 0;
    int retries = -1;

    void add(CLI::App* app) {
        app->add_option("--base-url", base_url, "Chat-completion base URL");
        app->add_option("--model", model, "Model name");
        app->add_option("--api-key-env", api_key_env, "Environment variable holding the API key");
        app->add_option("--timeout-ms", timeout_ms, "Request timeout");
        app->add_option("--retries", retries, "Retry budget per request");
    }
    void apply(agent::OpenAiConfig& c) const {
        if (!base_url.empty()) c.base_url = base_url;
        if (!model.empty()) c.model = model;
        if (!api_key_env.empty()) c.api_key_env = api_key_env;
        if (timeout_ms > 0) c.timeout = std::chrono::milliseconds(timeout_ms);
        if (retries >= 0) c.retries = retries;
    }
};

struct GrabCutFlags {
    GrabCutParams params;

    void add(CLI::App* app) {
        app->add_option("--components", params.components, "GMM components per side")->capture_default_str();
        app->add_option("--gamma", params.gamma, "Smoothness weight")->capture_default_str();
        app->add_option("--iterations", params.iterations, "Maximum GrabCut rounds")->capture_default_str();
        app->add_option("--seed", params.seed, "GMM initialization seed")->capture_default_str();
    }
};

struct ThresholdFlags {
    ThresholdConfig cfg;

    void add(CLI::App* app) {
        app->add_option("--sure-fg", cfg.sure_fg, "SureFg lower bound")->capture_default_str();
        app->add_option("--prob-fg", cfg.prob_fg, "ProbFg lower bound")->capture_default_str();
        app->add_option("--prob-bg", cfg.prob_bg, "ProbBg lower bound")->capture_default_str();
    }
};

EntropyTokens parse_entropy_tokens(const std::string& s) {
    if (s == "valid") return EntropyTokens::Valid;
    if (s == "keywords") return EntropyTokens::Keywords;
    throw ConfigError("--entropy-tokens must be valid or keywords");
}

void write_json(const fs::path& path, const json& doc) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << doc.dump(2) << "\n";
}

GrayImage heatmap(std::span<const float> row, std::size_t w, std::size_t h) {
    std::vector<double> v(row.begin(), row.end());
    const auto norm = min_max_normalize(v);
    GrayImage g{w, h, std::vector<std::uint8_t>(norm.size())};
    for (std::size_t i = 0; i < norm.size(); ++i) g.data[i] = static_cast<std::uint8_t>(std::lround(255.0 * norm[i]));
    return g;
}

GrayImage heatmap(std::span<const double> row, std::size_t w, std::size_t h) {
    const auto norm = min_max_normalize(row);
    GrayImage g{w, h, std::vector<std::uint8_t>(norm.size())};
    for (std::size_t i = 0; i < norm.size(); ++i) g.data[i] = static_cast<std::uint8_t>(std::lround(255.0 * norm[i]));
    return g;
}

std::vector<std::size_t> resolve_tokens(const TokenTable& tokens, const std::vector<std::string>& specs) {
    std::vector<std::size_t> out;
    for (const auto& s : specs) {
        std::size_t idx = 0;
        const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), idx);
        if (ec == std::errc() && ptr == s.data() + s.size()) {
            if (idx >= tokens.size())
                throw UnmatchedKeywordError(s, {"token index must be < " + std::to_string(tokens.size())});
            out.push_back(idx);
            continue;
        }
        auto matched = match_keyword(tokens, s);
        if (matched.empty()) {
            // Let keyword_maps build the candidate list.
            keyword_maps(FusedMap{tokens.size(), 0, {}, {}}, tokens, {s});
        }
        out.insert(out.end(), matched.begin(), matched.end());
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

Background parse_background(const std::string& s) {
    if (s == "white") return Background::solid({255, 255, 255});
    if (s == "black") return Background::solid({0, 0, 0});
    if (s == "checker") return Background::checkerboard();
    if (s.size() == 7 && s[0] == '#') {
        Rgb8 c{};
        for (int i = 0; i < 3; ++i) {
            unsigned v = 0;
            const auto [ptr, ec] = std::from_chars(s.data() + 1 + 2 * i, s.data() + 3 + 2 * i, v, 16);
            if (ec != std::errc() || ptr != s.data() + 3 + 2 * i) throw ConfigError("bad colour " + s);
            c[i] = static_cast<std::uint8_t>(v);
        }
        return Background::solid(c);
    }
    throw ConfigError("--background must be white, black, checker or #rrggbb");
}

json header_json(const DumpHeader& h, const TokenTable& t) {
    return {{"version", h.version},     {"layout", to_string(h.layout)}, {"steps", h.steps},
            {"layers", h.layers},       {"num_tokens", h.num_tokens},    {"height", h.height},
            {"width", h.width},         {"heads", h.heads},              {"text_first", h.text_first},
            {"tokens", t.tokens},       {"valid", t.valid}};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Subject masks and binary-alpha RGBA images from cross-attention dumps"};
    app.require_subcommand(1);
    std::function<int()> action;

    // pipeline
    auto* pipe = app.add_subcommand("pipeline", "Run agent (optional), fusion, trimap, GrabCut and compositing");
    fs::path p_config, p_dump, p_image, p_out_dir, p_heatmap, p_transcript, p_mock;
    std::vector<std::string> p_keywords;
    bool p_session = false, p_latent = false;
    unsigned p_threads = 1;
    std::size_t p_bins = 0;
    double p_epsilon = 0.0;
    std::string p_entropy;
    GrabCutFlags p_gc;
    ThresholdFlags p_th;
    BackendFlags p_backend;
    pipe->add_option("--config", p_config, "JSON config file")->check(CLI::ExistingFile);
    pipe->add_option("--dump", p_dump, "ATND attention dump");
    pipe->add_option("--image", p_image, "Generated RGB image (PNG or PPM)");
    pipe->add_option("--out-dir", p_out_dir, "Directory for rgba.png, mask.png, trimap.pgm, report.json");
    pipe->add_option("--keywords,-k", p_keywords, "Subject keywords (comma separated)")->delimiter(',');
    pipe->add_flag("--session", p_session, "Derive keywords with the agent loop");
    pipe->add_option("--mock", p_mock, "Scripted agent backend")->check(CLI::ExistingFile);
    pipe->add_option("--transcript", p_transcript, "Write the agent transcript here");
    pipe->add_option("--heatmap", p_heatmap, "Also write the union keyword map (16-bit PNG)");
    pipe->add_option("--threads", p_threads, "Worker threads (0 = all cores)");
    pipe->add_option("--bins", p_bins, "Entropy histogram bins");
    pipe->add_option("--epsilon", p_epsilon, "Entropy weight stabilizer");
    pipe->add_option("--entropy-tokens", p_entropy, "valid | keywords");
    pipe->add_flag("--latent-threshold", p_latent, "Threshold at latent resolution, then resize labels");
    p_gc.add(pipe);
    p_th.add(pipe);
    p_backend.add(pipe);
    pipe->callback([&] {
        action = [&]() -> int {
            PipelineConfig c;
            if (!p_config.empty()) c = load_pipeline_config(p_config);
            if (pipe->count("--dump")) c.dump = p_dump;
            if (pipe->count("--image")) c.image = p_image;
            if (pipe->count("--out-dir")) c.out_dir = p_out_dir;
            if (pipe->count("--keywords")) c.keywords = p_keywords;
            if (p_session) c.session = true;
            if (pipe->count("--mock")) c.agent.mock = p_mock;
            if (pipe->count("--transcript")) c.agent.transcript = p_transcript;
            if (pipe->count("--heatmap")) c.outputs.heatmap = p_heatmap;
            if (pipe->count("--threads")) c.threads = p_threads;
            if (pipe->count("--bins")) c.fusion.bins = p_bins;
            if (pipe->count("--epsilon")) c.fusion.epsilon = p_epsilon;
            if (pipe->count("--entropy-tokens")) c.entropy_tokens = parse_entropy_tokens(p_entropy);
            if (p_latent) c.threshold_at_latent = true;
            if (pipe->count("--components")) c.grabcut.components = p_gc.params.components;
            if (pipe->count("--gamma")) c.grabcut.gamma = p_gc.params.gamma;
            if (pipe->count("--iterations")) c.grabcut.iterations = p_gc.params.iterations;
            if (pipe->count("--seed")) c.grabcut.seed = p_gc.params.seed;
            if (pipe->count("--sure-fg")) c.thresholds.sure_fg = p_th.cfg.sure_fg;
            if (pipe->count("--prob-fg")) c.thresholds.prob_fg = p_th.cfg.prob_fg;
            if (pipe->count("--prob-bg")) c.thresholds.prob_bg = p_th.cfg.prob_bg;
            p_backend.apply(c.backend);

            const auto r = run_pipeline(c);
            for (const auto& w : r.warnings) std::cerr << "warning: " << w << "\n";
            std::cout << "subject pixels: " << r.mask.count() << " / " << r.mask.data.size() << "\n";
            return r.status == RunStatus::Ok ? 0 : 3;
        };
    });

    // fuse
    auto* fuse_cmd = app.add_subcommand("fuse", "Entropy-weighted fusion; writes the union keyword map");
    fs::path f_dump, f_out, f_report;
    std::vector<std::string> f_keywords;
    WeightConfig f_cfg;
    std::string f_entropy = "valid";
    fuse_cmd->add_option("--dump", f_dump, "ATND attention dump")->required();
    fuse_cmd->add_option("--keywords,-k", f_keywords, "Keywords (comma separated)")->required()->delimiter(',');
    fuse_cmd->add_option("--out,-o", f_out, "Keyword map, 16-bit PNG at latent resolution")->required();
    fuse_cmd->add_option("--report", f_report, "JSON with per-(t,l) entropies and weights");
    fuse_cmd->add_option("--bins", f_cfg.bins, "Histogram bins")->capture_default_str();
    fuse_cmd->add_option("--epsilon", f_cfg.epsilon, "Weight stabilizer")->capture_default_str();
    fuse_cmd->add_option("--entropy-tokens", f_entropy, "valid | keywords")->capture_default_str();
    fuse_cmd->callback([&] {
        action = [&]() -> int {
            const auto r = fuse_dump(f_dump, f_keywords, f_cfg, parse_entropy_tokens(f_entropy));
            write_map16_png(f_out, ScalarImage{r.header.width, r.header.height, r.selection.union_map});
            if (!f_report.empty()) {
                json maps = json::array();
                for (const auto& p : r.fused.provenance)
                    maps.push_back({{"step", p.step}, {"layer", p.layer}, {"entropy", p.entropy}, {"weight", p.weight}});
                json kws = json::array();
                for (const auto& k : r.selection.maps) kws.push_back({{"keyword", k.keyword}, {"tokens", k.token_indices}});
                write_json(f_report, {{"bins", f_cfg.bins}, {"epsilon", f_cfg.epsilon}, {"maps", maps}, {"keywords", kws}});
            }
            return 0;
        };
    });

    // trimap
    auto* tri_cmd = app.add_subcommand("trimap", "Upsample a keyword map and threshold it into a 4-value trimap");
    fs::path t_map, t_like, t_out;
    std::size_t t_w = 0, t_h = 0;
    bool t_latent = false;
    ThresholdFlags t_th;
    tri_cmd->add_option("--map", t_map, "Keyword map (16-bit PNG from fuse)")->required()->check(CLI::ExistingFile);
    tri_cmd->add_option("--like", t_like, "Take the target size from this image")->check(CLI::ExistingFile);
    tri_cmd->add_option("--width", t_w, "Target width");
    tri_cmd->add_option("--height", t_h, "Target height");
    tri_cmd->add_option("--out,-o", t_out, "Trimap PGM/PNG (codes 255/170/85/0)")->required();
    tri_cmd->add_flag("--latent-threshold", t_latent, "Threshold before resizing");
    t_th.add(tri_cmd);
    tri_cmd->callback([&] {
        action = [&]() -> int {
            const ScalarImage map = read_map16_png(t_map);
            std::size_t w = t_w, h = t_h;
            if (!t_like.empty()) {
                const RgbImage like = read_rgb(t_like);
                w = like.width;
                h = like.height;
            }
            if (w == 0 || h == 0) throw ConfigError("give --like or both --width and --height");
            const Trimap tri = t_latent ? resize_trimap_nearest(build_trimap(map, t_th.cfg), w, h)
                                        : build_trimap(upsample(map.data, map.width, map.height, w, h), t_th.cfg);
            write_gray(t_out, trimap_to_gray(tri));
            return 0;
        };
    });

    // segment
    auto* seg_cmd = app.add_subcommand("segment", "GrabCut an image seeded by a trimap");
    fs::path s_image, s_trimap, s_out, s_report;
    unsigned s_threads = 1;
    GrabCutFlags s_gc;
    seg_cmd->add_option("--image", s_image, "RGB image")->required()->check(CLI::ExistingFile);
    seg_cmd->add_option("--trimap", s_trimap, "Trimap from the trimap command")->required()->check(CLI::ExistingFile);
    seg_cmd->add_option("--out,-o", s_out, "Mask (.png 1-bit or .pgm 0/255)")->required();
    seg_cmd->add_option("--report", s_report, "JSON with per-round energies");
    seg_cmd->add_option("--threads", s_threads, "Worker threads (0 = all cores)");
    s_gc.add(seg_cmd);
    seg_cmd->callback([&] {
        action = [&]() -> int {
            set_thread_count(s_threads);
            const RgbImage image = read_rgb(s_image);
            const Trimap tri = trimap_from_gray(read_gray(s_trimap));
            SegmentationReport rep;
            const SubjectMask mask = segment(image, tri, s_gc.params, &rep);
            write_mask(s_out, mask);
            if (!s_report.empty())
                write_json(s_report, {{"beta", rep.beta},
                                      {"iterations_run", rep.iterations_run},
                                      {"converged", rep.converged},
                                      {"trivial", rep.trivial},
                                      {"energies", rep.energies},
                                      {"flows", rep.flows},
                                      {"changed_pixels", rep.changed_pixels},
                                      {"subject_pixels", mask.count()}});
            if (mask.count() == 0) {
                std::cerr << "warning: empty subject mask\n";
                return 3;
            }
            return 0;
        };
    });

    // compose
    auto* comp_cmd = app.add_subcommand("compose", "Apply a mask as binary alpha");
    fs::path c_image, c_mask, c_out, c_flatten;
    std::string c_background = "checker";
    comp_cmd->add_option("--image", c_image, "RGB image")->required()->check(CLI::ExistingFile);
    comp_cmd->add_option("--mask", c_mask, "Subject mask")->required()->check(CLI::ExistingFile);
    comp_cmd->add_option("--out,-o", c_out, "RGBA PNG")->required();
    comp_cmd->add_option("--flatten", c_flatten, "Also write the RGBA over a background");
    comp_cmd->add_option("--background", c_background, "white | black | checker | #rrggbb")->capture_default_str();
    comp_cmd->callback([&] {
        action = [&]() -> int {
            const RgbaImage rgba = compose(read_rgb(c_image), read_mask(c_mask));
            write_rgba_png(c_out, rgba);
            if (!c_flatten.empty()) write_rgb(c_flatten, flatten(rgba, parse_background(c_background)));
            return 0;
        };
    });

    // agent
    auto* agent_cmd = app.add_subcommand("agent", "Expand keywords into a prompt and extract foreground nouns");
    std::vector<std::string> a_keywords, a_stoplist;
    fs::path a_mock, a_templates, a_transcript;
    std::string a_prompt;
    agent::AgentCaps a_caps;
    BackendFlags a_backend;
    agent_cmd->add_option("--keywords,-k", a_keywords, "Keywords (comma separated)")->required()->delimiter(',');
    agent_cmd->add_option("--mock", a_mock, "Scripted backend script")->check(CLI::ExistingFile);
    agent_cmd->add_option("--prompt", a_prompt, "Start from this prompt instead of expanding");
    agent_cmd->add_option("--templates", a_templates, "Directory of <role>.txt templates")->check(CLI::ExistingDirectory);
    agent_cmd->add_option("--transcript", a_transcript, "Write the full session JSON here");
    agent_cmd->add_option("--max-opt", a_caps.max_opt, "Optimizer round cap")->capture_default_str();
    agent_cmd->add_option("--max-revisions", a_caps.max_revisions, "Revision cap")->capture_default_str();
    agent_cmd->add_option("--stoplist", a_stoplist, "Abstract-word stoplist (comma separated)")->delimiter(',');
    a_backend.add(agent_cmd);
    agent_cmd->callback([&] {
        action = [&]() -> int {
            std::unique_ptr<agent::ChatBackend> backend;
            if (!a_mock.empty()) {
                backend = std::make_unique<agent::ScriptedBackend>(agent::ScriptedBackend::from_file(a_mock));
            } else {
                agent::OpenAiConfig cfg;
                a_backend.apply(cfg);
                backend = std::make_unique<agent::OpenAiBackend>(cfg);
            }
            agent::AgentOptions opts;
            opts.caps = a_caps;
            if (agent_cmd->count("--stoplist")) opts.stoplist = a_stoplist;
            agent::Orchestrator orch(*backend,
                                     a_templates.empty() ? agent::RoleTemplates() : agent::RoleTemplates::load(a_templates),
                                     opts);
            agent::AgentSession session;
            std::optional<std::string> prompt;
            if (!a_prompt.empty()) prompt = a_prompt;
            try {
                orch.run(a_keywords, session, prompt);
            } catch (...) {
                if (!a_transcript.empty()) write_json(a_transcript, json::parse(agent::session_to_json(session)));
                throw;
            }
            if (!a_transcript.empty()) write_json(a_transcript, json::parse(agent::session_to_json(session)));
            for (const auto& w : session.warnings) std::cerr << "warning: " << w << "\n";
            json out = {{"prompt", session.optimized},
                        {"foreground", session.filtered},
                        {"nouns", session.nouns},
                        {"opt_rounds", session.opt_rounds},
                        {"revision_rounds", session.revision_rounds},
                        {"opt_cap_hit", session.opt_cap_hit},
                        {"revision_cap_hit", session.revision_cap_hit},
                        {"filter_degraded", session.filter_degraded},
                        {"backend_calls", session.backend_calls()}};
            std::cout << out.dump(2) << "\n";
            return session.filter_degraded ? 3 : 0;
        };
    });

    // viz
    auto* viz_cmd = app.add_subcommand("viz", "Per-map and fused heatmaps for selected tokens");
    fs::path v_dump, v_out;
    std::vector<std::string> v_tokens;
    std::vector<std::uint32_t> v_steps, v_layers;
    WeightConfig v_cfg;
    viz_cmd->add_option("--dump", v_dump, "ATND attention dump")->required()->check(CLI::ExistingFile);
    viz_cmd->add_option("--tokens", v_tokens, "Token indices or words (comma separated)")->required()->delimiter(',');
    viz_cmd->add_option("--steps", v_steps, "Steps to render (default all)")->delimiter(',');
    viz_cmd->add_option("--layers", v_layers, "Layers to render (default all)")->delimiter(',');
    viz_cmd->add_option("--out-dir", v_out, "Output directory")->required();
    viz_cmd->add_option("--bins", v_cfg.bins, "Histogram bins for the fused map")->capture_default_str();
    viz_cmd->callback([&] {
        action = [&]() -> int {
            auto reader = DumpReader::open(v_dump);
            const auto header = reader.header();
            const auto tokens = resolve_tokens(reader.tokens(), v_tokens);
            for (auto s : v_steps)
                if (s >= header.steps) throw ConfigError("step " + std::to_string(s) + " out of range");
            for (auto l : v_layers)
                if (l >= header.layers) throw ConfigError("layer " + std::to_string(l) + " out of range");
            fs::create_directories(v_out);
            auto wanted = [](const std::vector<std::uint32_t>& list, std::uint32_t v) {
                return list.empty() || std::find(list.begin(), list.end(), v) != list.end();
            };
            FusionAccumulator acc(header.steps, header.layers, header.num_tokens, header.latent_pixels(), v_cfg,
                                  reader.tokens().valid);
            AttentionRecord record;
            std::size_t written = 0;
            while (reader.next(record)) {
                const auto map = extract_cross(record, header);
                if (wanted(v_steps, map.step) && wanted(v_layers, map.layer)) {
                    for (auto n : tokens) {
                        write_gray(v_out / ("token" + std::to_string(n) + "_t" + std::to_string(map.step) + "_l" +
                                            std::to_string(map.layer) + ".png"),
                                   heatmap(map.row(n), header.width, header.height));
                        ++written;
                    }
                }
                acc.add(map);
            }
            const FusedMap fused = std::move(acc).finish();
            for (auto n : tokens) {
                write_gray(v_out / ("token" + std::to_string(n) + "_fused.png"),
                           heatmap(fused.row(n), header.width, header.height));
                ++written;
            }
            std::cout << written << " heatmaps written to " << v_out.string() << "\n";
            return 0;
        };
    });

    // gen-fixture
    auto* gen_cmd = app.add_subcommand("gen-fixture", "Synthetic dump plus a matching image with a known subject");
    fs::path g_out;
    std::uint32_t g_latent = 8, g_steps = 4, g_layers = 2, g_heads = 2, g_delta_token = 2, g_noise_maps = 0;
    std::int64_t g_delta_pixel = -1;
    std::size_t g_scale = 16, g_pad = 1;
    double g_noise = 0.2, g_sigma = 12.0;
    std::uint64_t g_seed = 0;
    std::string g_layout = "cross";
    std::vector<std::string> g_tokens{"a", "\xE2\x96\x81" "red", "\xE2\x96\x81" "apple", "<pad>"};
    std::vector<std::string> g_keywords{"apple"};
    gen_cmd->add_option("--out-dir", g_out, "Output directory")->required();
    gen_cmd->add_option("--latent", g_latent, "Latent grid side")->capture_default_str();
    gen_cmd->add_option("--scale", g_scale, "Image pixels per latent pixel")->capture_default_str();
    gen_cmd->add_option("--steps", g_steps, "Denoising steps")->capture_default_str();
    gen_cmd->add_option("--layers", g_layers, "Captured blocks")->capture_default_str();
    gen_cmd->add_option("--heads", g_heads, "Attention heads")->capture_default_str();
    gen_cmd->add_option("--layout", g_layout, "cross | joint")->capture_default_str();
    gen_cmd->add_option("--tokens", g_tokens, "Token strings (comma separated)")->delimiter(',');
    gen_cmd->add_option("--pad", g_pad, "Trailing padding tokens")->capture_default_str();
    gen_cmd->add_option("--delta-token", g_delta_token, "Token carrying the subject")->capture_default_str();
    gen_cmd->add_option("--delta-pixel", g_delta_pixel, "Latent pixel of the subject (default centre)");
    gen_cmd->add_option("--noise", g_noise, "Noise amplitude of non-subject rows")->capture_default_str();
    gen_cmd->add_option("--noise-maps", g_noise_maps, "Leading maps with no subject signal")->capture_default_str();
    gen_cmd->add_option("--sigma", g_sigma, "Image colour noise")->capture_default_str();
    gen_cmd->add_option("--seed", g_seed, "Seed")->capture_default_str();
    gen_cmd->add_option("--keywords", g_keywords, "Keywords for the written pipeline.json")->delimiter(',');
    gen_cmd->callback([&] {
        action = [&]() -> int {
            if (g_layout != "cross" && g_layout != "joint") throw ConfigError("--layout must be cross or joint");
            if (g_pad >= g_tokens.size()) throw ConfigError("--pad must leave at least one real token");
            if (g_scale == 0 || g_latent < 2) throw ConfigError("--latent must be >= 2 and --scale >= 1");
            SyntheticSpec spec;
            spec.header.layout = g_layout == "cross" ? Layout::CrossOnly : Layout::Joint;
            spec.header.steps = g_steps;
            spec.header.layers = g_layers;
            spec.header.heads = g_heads;
            spec.header.height = spec.header.width = g_latent;
            spec.header.num_tokens = static_cast<std::uint32_t>(g_tokens.size());
            spec.tokens = g_tokens;
            spec.valid.assign(g_tokens.size(), true);
            for (std::size_t i = g_tokens.size() - g_pad; i < g_tokens.size(); ++i) spec.valid[i] = false;
            spec.seed = g_seed;
            const std::uint32_t pixel = g_delta_pixel >= 0 ? static_cast<std::uint32_t>(g_delta_pixel)
                                                           : (g_latent / 2) * g_latent + g_latent / 2;
            MapPattern delta = MapPattern::delta(g_delta_token, pixel);
            delta.noise_amplitude = g_noise;
            spec.default_pattern = delta;
            if (g_noise_maps > 0) {
                spec.per_map.assign(spec.header.record_count(), delta);
                for (std::size_t i = 0; i < std::min<std::size_t>(g_noise_maps, spec.per_map.size()); ++i)
                    spec.per_map[i] = MapPattern::uniform(g_noise);
            }
            spec.validate();

            fs::create_directories(g_out);
            write_synthetic_dump_file(spec, g_out / "dump.atnd");

            const std::size_t side = std::size_t{g_latent} * g_scale;
            const double step = static_cast<double>(side - 1) / static_cast<double>(g_latent - 1);
            const double cx = static_cast<double>(pixel % g_latent) * step;
            const double cy = static_cast<double>(pixel / g_latent) * step;
            const auto truth = disk_mask(side, side, cx, cy, 0.45 * step);
            const auto scene = render_scene(truth, {200, 40, 40}, {40, 90, 200}, g_sigma, mix_seed(g_seed) ^ 0x1A);
            write_rgb(g_out / "image.png", scene.image);
            write_mask(g_out / "truth_mask.png", scene.truth);
            write_json(g_out / "pipeline.json", {{"dump", "dump.atnd"},
                                                 {"image", "image.png"},
                                                 {"out_dir", "."},
                                                 {"keywords", g_keywords},
                                                 {"grabcut", {{"seed", g_seed}}}});
            std::cout << "fixture written to " << g_out.string() << "\n";
            return 0;
        };
    });

    // validate
    auto* val_cmd = app.add_subcommand("validate", "Check an ATND dump and print its header");
    fs::path val_dump;
    bool val_no_softmax = false;
    val_cmd->add_option("--dump", val_dump, "ATND attention dump")->required()->check(CLI::ExistingFile);
    val_cmd->add_flag("--no-softmax", val_no_softmax, "Skip the joint row-sum check");
    val_cmd->callback([&] {
        action = [&]() -> int {
            ReaderOptions opts;
            opts.check_softmax = !val_no_softmax;
            const auto s = validate_dump(val_dump, opts);
            json out = header_json(s.header, s.tokens);
            out["records"] = s.records;
            out["bytes"] = s.bytes;
            std::cout << out.dump(2) << "\n";
            return 0;
        };
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    } catch (const Error& e) {
        std::cerr << "error [" << e.kind() << "]: " << e.what() << "\n";
        return exit_code_for(e);
    }

    try {
        return action ? action() : 1;
    } catch (const Error& e) {
        std::cerr << "error [" << e.kind() << "]: " << e.what() << "\n";
        return exit_code_for(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
