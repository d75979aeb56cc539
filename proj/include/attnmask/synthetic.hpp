#pragma once

#include "attnmask/dump_format.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace attnmask {

enum class PatternKind { UniformNoise, Delta, Blend };

/// What one (t,l) map looks like, expressed per token as a spatial
/// distribution over the hw latent pixels.
///
/// UniformNoise: every token row is proportional to 1 + amplitude * u, u ~ U[-1, 1).
///   amplitude 0 gives exactly 1/hw everywhere.
/// Delta: the target token puts `peak` (>= 0.9) of its mass on `pixel`, the
///   rest spread evenly; every other token follows the noise rule.
/// Blend: target row = alpha * delta + (1 - alpha) * noise.
struct MapPattern {
    PatternKind kind = PatternKind::UniformNoise;
    double noise_amplitude = 0.0;
    std::uint32_t token = 0;
    std::uint32_t pixel = 0;
    double peak = 0.95;
    double alpha = 1.0;

    static MapPattern uniform(double amplitude = 0.0) { return {PatternKind::UniformNoise, amplitude}; }
    static MapPattern delta(std::uint32_t token, std::uint32_t pixel, double peak = 0.95) {
        return {PatternKind::Delta, 0.0, token, pixel, peak, 1.0};
    }
    static MapPattern blend(std::uint32_t token, std::uint32_t pixel, double alpha, double amplitude) {
        return {PatternKind::Blend, amplitude, token, pixel, 1.0, alpha};
    }
};

struct SyntheticSpec {
    /// Dimensions, layout and token ordering of the generated dump.
    DumpHeader header;
    /// Optional explicit token strings; defaults to "tok0".."tokN-1", all valid.
    std::vector<std::string> tokens;
    std::vector<bool> valid;
    std::uint64_t seed = 0;
    MapPattern default_pattern;
    /// Optional per-map override, indexed t * layers + l. Empty means use the default.
    std::vector<MapPattern> per_map;

    const MapPattern& pattern_for(std::uint32_t step, std::uint32_t layer) const;
    void validate() const;
};

struct SyntheticDump {
    DumpHeader header;
    TokenTable tokens;
    std::vector<AttentionRecord> records;
};

TokenTable synthetic_tokens(const SyntheticSpec& spec);

/// Per-head token-major spatial rows [head][token][pixel] for one map, each
/// row summing to 1 over the pixels.
std::vector<std::vector<std::vector<double>>> synthetic_rows(const SyntheticSpec& spec, std::uint32_t step,
                                                             std::uint32_t layer);

/// One record in spec.header.layout. Joint records embed the rows in the
/// image-query/text-key block (scaled down only if a query column would
/// otherwise exceed unit mass) and fill the rest so softmax rows sum to 1.
AttentionRecord synthetic_record(const SyntheticSpec& spec, std::uint32_t step, std::uint32_t layer);

SyntheticDump generate_synthetic_dump(const SyntheticSpec& spec);

/// Streams the dump straight to disk, one record in memory at a time.
std::size_t write_synthetic_dump(const SyntheticSpec& spec, std::ostream& out);
std::size_t write_synthetic_dump_file(const SyntheticSpec& spec, const std::filesystem::path& path);

}  // namespace attnmask
