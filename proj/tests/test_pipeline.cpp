#include "attnmask/agent/scripted_backend.hpp"
#include "attnmask/dump_format.hpp"
#include "attnmask/pipeline.hpp"
#include "attnmask/scene.hpp"
#include "attnmask/synthetic.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

#include <doctest.h>
#include <json.hpp>

#include <cmath>

using namespace attnmask;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const fs::path kDelta = fs::path(ATTNMASK_FIXTURES) / "delta";
const fs::path kAgent = fs::path(ATTNMASK_FIXTURES) / "agent";

PipelineConfig delta_config(const testing::TempDir& out) {
    PipelineConfig c = load_pipeline_config(kDelta / "pipeline.json");
    c.out_dir = out.path();
    return c;
}

// Image coordinates of latent pixel (4, 4) on the 8x8 / scale 16 fixture.
std::size_t delta_image_index() {
    const double step = 127.0 / 7.0;
    const auto c = static_cast<std::size_t>(std::lround(4 * step));
    return c * 128 + c;
}

}  // namespace

TEST_CASE("config file resolves paths relative to itself") {
    const auto c = load_pipeline_config(kDelta / "pipeline.json");
    CHECK(c.dump == kDelta / "dump.atnd");
    CHECK(c.image == kDelta / "image.png");
    CHECK(c.keywords == std::vector<std::string>{"apple"});
    CHECK(c.grabcut.components == 5);
    CHECK(c.grabcut.gamma == 50.0);
    CHECK(c.thresholds.sure_fg == 0.8);
}

TEST_CASE("config rejects unknown keys and bad values") {
    PipelineConfig c;
    CHECK_THROWS_AS(apply_config_json(c, R"({"dumpp": "x"})", "."), ConfigError);
    CHECK_THROWS_AS(apply_config_json(c, R"({"grabcut": {"gama": 1}})", "."), ConfigError);
    CHECK_THROWS_AS(apply_config_json(c, R"({"threads": "four"})", "."), ConfigError);
    CHECK_THROWS_AS(apply_config_json(c, R"({"fusion": {"entropy_tokens": "all"}})", "."), ConfigError);
    CHECK_THROWS_AS(apply_config_json(c, "{not json", "."), ConfigError);
    apply_config_json(c, R"({"thresholds": {"sure_fg": 0.7, "at_latent": true}, "agent": {"max_opt": 4}})", "/base");
    CHECK(c.thresholds.sure_fg == 0.7);
    CHECK(c.threshold_at_latent);
    CHECK(c.agent.caps.max_opt == 4);
}

TEST_CASE("end to end on the committed delta fixture") {
    testing::TempDir out;
    const auto r = run_pipeline(delta_config(out));
    CHECK(r.status == RunStatus::Ok);
    CHECK(r.mask.data[delta_image_index()] == 1);
    const auto truth = read_mask(kDelta / "truth_mask.png");
    CHECK(oracle::iou(r.mask, truth) >= 0.95);

    const auto rgba = read_rgba_png(out / "rgba.png");
    CHECK(rgba.alpha(delta_image_index()) == 255);
    CHECK(read_mask(out / "mask.png") == r.mask);
    const auto tri = trimap_from_gray(read_gray(out / "trimap.pgm"));
    CHECK(tri.labels[delta_image_index()] == TrimapLabel::SureFg);

    const auto report = json::parse(testing::read_text(out / "report.json"));
    CHECK(report["status"] == "ok");
    CHECK(report["fusion"]["maps"].size() == 8);
    CHECK(report["subject_pixels"] == r.mask.count());
    for (const char* stage : {"fuse", "trimap", "segment", "write"}) CHECK(report["timings_ms"].contains(stage));
}

TEST_CASE("a keyword on token 0 lands the subject on the delta") {
    testing::TempDir dir;
    SyntheticSpec spec;
    spec.header.layout = Layout::Joint;
    spec.header.steps = 3;
    spec.header.layers = 2;
    spec.header.heads = 1;
    spec.header.num_tokens = 3;
    spec.header.height = spec.header.width = 6;
    spec.tokens = {"cat", "on", "mat"};
    spec.valid = {true, true, true};
    spec.default_pattern = MapPattern::delta(0, 2 * 6 + 3);
    spec.default_pattern.noise_amplitude = 0.3;
    write_synthetic_dump_file(spec, dir / "dump.atnd");
    const double step = 59.0 / 5.0;
    const auto truth = disk_mask(60, 60, 3 * step, 2 * step, 0.45 * step);
    write_rgb(dir / "image.png", render_scene(truth, {230, 200, 20}, {20, 20, 120}, 10.0, 4).image);

    PipelineConfig c;
    c.dump = dir / "dump.atnd";
    c.image = dir / "image.png";
    c.out_dir = dir.path();
    c.keywords = {"cat"};
    const auto r = run_pipeline(c);
    CHECK(r.status == RunStatus::Ok);
    const auto centre = static_cast<std::size_t>(std::lround(2 * step)) * 60 + static_cast<std::size_t>(std::lround(3 * step));
    CHECK(read_rgba_png(dir / "rgba.png").alpha(centre) == 255);
}

TEST_CASE("outputs are byte-identical across runs and thread counts") {
    testing::TempDir a, b, c;
    auto ca = delta_config(a), cb = delta_config(b), cc = delta_config(c);
    cc.threads = 4;
    run_pipeline(ca);
    run_pipeline(cb);
    run_pipeline(cc);
    for (const char* f : {"mask.png", "rgba.png", "trimap.pgm"}) {
        CHECK(testing::read_bytes(a / f) == testing::read_bytes(b / f));
        CHECK(testing::read_bytes(a / f) == testing::read_bytes(c / f));
    }
}

TEST_CASE("the report is enough to re-derive every fusion weight") {
    testing::TempDir out;
    run_pipeline(delta_config(out));
    const auto report = json::parse(testing::read_text(out / "report.json"));
    const double eps = report["fusion"]["epsilon"];
    const std::size_t bins = report["fusion"]["bins"];

    auto reader = DumpReader::open(kDelta / "dump.atnd");
    const auto header = reader.header();
    AttentionRecord rec;
    std::size_t i = 0;
    while (reader.next(rec)) {
        const auto m = extract_cross(rec, header);
        const auto& entry = report["fusion"]["maps"][i++];
        CHECK(entry["step"] == m.step);
        CHECK(entry["layer"] == m.layer);
        const double H = entropy_of_map(m, WeightConfig{eps, bins}, reader.tokens().valid).entropy;
        CHECK(entry["entropy"].get<double>() == H);
        CHECK(entry["weight"].get<double>() == 1.0 / (H + eps));
    }
    CHECK(i == 8);
}

TEST_CASE("an all-constant keyword map degrades to an empty subject") {
    testing::TempDir dir;
    SyntheticSpec spec;
    spec.header.layout = Layout::CrossOnly;
    spec.header.steps = 2;
    spec.header.layers = 1;
    spec.header.num_tokens = 2;
    spec.header.height = spec.header.width = 4;
    spec.tokens = {"ghost", "town"};
    spec.valid = {true, true};
    spec.default_pattern = MapPattern::uniform(0.0);
    write_synthetic_dump_file(spec, dir / "dump.atnd");
    write_rgb(dir / "image.png", RgbImage(16, 16, {100, 100, 100}));
    PipelineConfig c;
    c.dump = dir / "dump.atnd";
    c.image = dir / "image.png";
    c.out_dir = dir.path();
    c.keywords = {"ghost"};
    const auto r = run_pipeline(c);
    CHECK(r.status == RunStatus::Degraded);
    CHECK(r.mask.count() == 0);
    CHECK_FALSE(r.warnings.empty());
    CHECK(read_rgba_png(dir / "rgba.png").data == std::vector<std::uint8_t>(16 * 16 * 4, 0));
}

TEST_CASE("agent session feeds the keyword list") {
    testing::TempDir out;
    auto c = delta_config(out);
    c.session = true;
    c.keywords = {"apple"};
    c.agent.mock = kAgent / "happy.json";
    c.agent.transcript = out / "session.json";
    const auto r = run_pipeline(c);
    CHECK(r.status == RunStatus::Ok);
    CHECK(r.keywords == std::vector<std::string>{"apple"});
    const auto session = json::parse(testing::read_text(out / "session.json"));
    CHECK(session["transcript"].size() == 4);
    const auto report = json::parse(testing::read_text(out / "report.json"));
    CHECK(report["agent"]["foreground"] == json{"apple"});

    SUBCASE("nouns without a dump token are skipped") {
        agent::ScriptedBackend b(agent::ScriptedBackend::from_file(kAgent / "revision.json"));
        testing::TempDir out2;
        auto c2 = delta_config(out2);
        c2.session = true;
        const auto r2 = run_pipeline(c2, &b);
        CHECK(r2.keywords == std::vector<std::string>{"apple", "leaf"});
        bool warned = false;
        for (const auto& w : r2.warnings) warned |= w.find("leaf") != std::string::npos;
        CHECK(warned);
    }
    SUBCASE("a degraded filter degrades the run") {
        testing::TempDir out3;
        auto c3 = delta_config(out3);
        c3.session = true;
        c3.agent.mock = kAgent / "filter_down.json";
        CHECK(run_pipeline(c3).status == RunStatus::Degraded);
    }
}

TEST_CASE("errors carry their stage and map to exit codes") {
    testing::TempDir out;
    auto c = delta_config(out);
    c.dump = out / "missing.atnd";
    try {
        run_pipeline(c);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(exit_code_for(e) == 1);
    }

    auto small = delta_config(out);
    write_rgb(out / "tiny.png", RgbImage(4, 4));
    small.image = out / "tiny.png";
    try {
        run_pipeline(small);
        FAIL("expected an error");
    } catch (const StageError& e) {
        CHECK(e.stage() == "trimap");
        CHECK(e.kind() == "shape");
        CHECK(std::string(e.what()).rfind("trimap: ", 0) == 0);
        CHECK(exit_code_for(e) == 2);
    }

    auto unmatched = delta_config(out);
    unmatched.keywords = {"pear"};
    try {
        run_pipeline(unmatched);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.kind() == "unmatched-keyword");
        CHECK(exit_code_for(e) == 1);
    }
    CHECK(exit_code_for(DegenerateRegionError("x")) == 2);
    CHECK(exit_code_for(BackendError("x")) == 2);
}

TEST_CASE("latent-resolution thresholding is selectable") {
    testing::TempDir a, b;
    auto ca = delta_config(a);
    auto cb = delta_config(b);
    cb.threshold_at_latent = true;
    run_pipeline(ca);
    const auto rb = run_pipeline(cb);
    CHECK(rb.mask.data[delta_image_index()] == 1);
    CHECK(json::parse(testing::read_text(b / "report.json"))["trimap"]["at_latent"] == true);
}
