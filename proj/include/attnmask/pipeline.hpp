#pragma once

#include "attnmask/agent/backend.hpp"
#include "attnmask/agent/openai_backend.hpp"
#include "attnmask/agent/orchestrator.hpp"
#include "attnmask/dump_format.hpp"
#include "attnmask/error.hpp"
#include "attnmask/fusion.hpp"
#include "attnmask/grabcut.hpp"
#include "attnmask/image.hpp"
#include "attnmask/trimap.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace attnmask {

/// Which tokens the per-map entropy averages over.
enum class EntropyTokens { Valid, Keywords };

struct PipelineOutputs {
    std::filesystem::path rgba;
    std::filesystem::path mask;
    std::filesystem::path trimap;
    std::filesystem::path report;
    /// Optional 16-bit PNG of the union keyword map at latent resolution.
    std::filesystem::path heatmap;
};

struct AgentSettings {
    /// Scripted backend script; empty selects the HTTP backend.
    std::filesystem::path mock;
    std::filesystem::path templates;
    std::optional<std::string> prompt;
    agent::AgentCaps caps;
    std::vector<std::string> stoplist = agent::default_stoplist();
    /// Where to write the session transcript; empty skips it.
    std::filesystem::path transcript;
};

struct PipelineConfig {
    std::filesystem::path dump;
    std::filesystem::path image;
    std::filesystem::path out_dir = ".";
    PipelineOutputs outputs;

    std::vector<std::string> keywords;
    /// Derive keywords with the agent loop, seeded by `keywords`.
    bool session = false;

    WeightConfig fusion;
    EntropyTokens entropy_tokens = EntropyTokens::Valid;
    ThresholdConfig thresholds;
    /// Threshold the keyword map at latent resolution, then resize labels.
    bool threshold_at_latent = false;
    GrabCutParams grabcut;
    unsigned threads = 1;

    AgentSettings agent;
    agent::OpenAiConfig backend;

    /// Fills empty output paths from out_dir.
    void resolve_outputs();
    /// Inputs exist, parameters are in range, output directories exist.
    void validate() const;
};

/// Reads a JSON config; relative paths resolve against the file's directory.
PipelineConfig load_pipeline_config(const std::filesystem::path& path);
/// Merges JSON text into `config`. Unknown keys are rejected.
void apply_config_json(PipelineConfig& config, const std::string& text, const std::filesystem::path& base_dir);

/// An error raised inside one named pipeline stage; keeps the inner kind.
class StageError : public Error {
public:
    StageError(std::string stage, const Error& inner);
    StageError(std::string stage, const std::string& kind, const std::string& message);

    const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

/// 1 for configuration and input problems, 2 for failures inside a stage.
int exit_code_for(const Error& error);

struct FusionOutcome {
    DumpHeader header;
    TokenTable tokens;
    FusedMap fused;
    KeywordSelection selection;
    std::vector<std::string> warnings;
};

/// Streams a dump through the fusion accumulator and selects keyword maps.
/// With drop_unmatched, keywords that match no token are skipped with a
/// warning as long as one keyword matches.
FusionOutcome fuse_dump(const std::filesystem::path& dump, const std::vector<std::string>& keywords,
                        const WeightConfig& cfg, EntropyTokens entropy_tokens, bool drop_unmatched = false);

enum class RunStatus { Ok, Degraded };

struct PipelineResult {
    RunStatus status = RunStatus::Ok;
    std::vector<std::string> warnings;
    std::vector<std::string> keywords;
    SubjectMask mask;
    /// The JSON run report, as written to outputs.report.
    std::string report;
};

/// agent -> fuse -> keyword maps -> upsample -> trimap -> segment -> compose.
/// `backend` overrides the one named by the config when session is set.
PipelineResult run_pipeline(const PipelineConfig& config, agent::ChatBackend* backend = nullptr);

}  // namespace attnmask
