#pragma once

#include "attnmask/dump_format.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace attnmask {

/// Token-major cross-attention block A_C^{t,l}: num_tokens x pixels, heads
/// already averaged.
struct CrossAttentionMap {
    std::uint32_t step = 0;
    std::uint32_t layer = 0;
    std::size_t num_tokens = 0;
    std::size_t pixels = 0;
    std::vector<float> data;

    std::span<const float> row(std::size_t token) const { return {data.data() + token * pixels, pixels}; }
};

struct WeightConfig {
    double epsilon = 1e-6;
    std::size_t bins = 256;

    void validate() const;
};

struct EntropyScore {
    std::uint32_t step = 0;
    std::uint32_t layer = 0;
    /// Mean per-token histogram entropy, in bits.
    double entropy = 0.0;
    std::size_t bins = 0;
};

struct FusionProvenance {
    std::uint32_t step = 0;
    std::uint32_t layer = 0;
    double entropy = 0.0;
    double weight = 0.0;
};

struct FusedMap {
    std::size_t num_tokens = 0;
    std::size_t pixels = 0;
    std::vector<double> data;
    /// One entry per (t,l) in (t-major, l-minor) order.
    std::vector<FusionProvenance> provenance;

    std::span<const double> row(std::size_t token) const { return {data.data() + token * pixels, pixels}; }
};

struct KeywordMap {
    std::string keyword;
    std::vector<std::size_t> token_indices;
    /// Min-max normalized to [0, 1]; all zeros when the raw map is constant.
    std::vector<double> data;
};

struct KeywordSelection {
    std::vector<KeywordMap> maps;
    /// Pixelwise max over `maps`.
    std::vector<double> union_map;
};

/// Slices the image-query / text-key block out of a joint record (honouring
/// header.text_first), averages heads and transposes to token-major. CrossOnly
/// records are head-averaged only.
CrossAttentionMap extract_cross(const AttentionRecord& record, const DumpHeader& header);

/// Shannon entropy (bits) of the histogram of a min-max normalized row.
/// A constant row lands in a single bin and scores 0.
double row_entropy(std::span<const float> row, std::size_t bins);

/// Mean row entropy over the tokens selected by token_mask.
EntropyScore entropy_of_map(const CrossAttentionMap& map, const WeightConfig& cfg,
                            const std::vector<bool>& token_mask);

/// 1 / (H + epsilon).
double weight_of(const EntropyScore& score, const WeightConfig& cfg);

/// Incremental weighted fusion. Maps must be added in canonical (t-major,
/// l-minor) order so the floating point reduction order is fixed; memory is
/// one accumulator plus whatever the caller holds.
class FusionAccumulator {
public:
    FusionAccumulator(std::uint32_t steps, std::uint32_t layers, std::size_t num_tokens, std::size_t pixels,
                      WeightConfig cfg, std::vector<bool> token_mask);

    /// Scores and accumulates one map; returns its provenance entry.
    const FusionProvenance& add(const CrossAttentionMap& map);
    std::size_t added() const { return provenance_.size(); }
    /// Applies the 1/(T*L) factor. Throws if any (t,l) is missing.
    FusedMap finish() &&;

private:
    std::uint32_t steps_;
    std::uint32_t layers_;
    std::size_t num_tokens_;
    std::size_t pixels_;
    WeightConfig cfg_;
    std::vector<bool> mask_;
    std::vector<double> acc_;
    std::vector<FusionProvenance> provenance_;
};

/// Batch form of FusionAccumulator: accepts the maps in any order.
FusedMap fuse(std::vector<CrossAttentionMap> maps, std::uint32_t steps, std::uint32_t layers,
              const WeightConfig& cfg, const std::vector<bool>& token_mask);

/// Case-folds and strips tokenizer word markers ("▁", "Ġ", "##", "</w>").
std::string normalize_token(std::string_view token);

/// Token indices covered by every contiguous run of valid tokens whose
/// normalized concatenation equals the normalized keyword. Empty if none.
std::vector<std::size_t> match_keyword(const TokenTable& tokens, std::string_view keyword);

/// Throws UnmatchedKeywordError (with nearest candidates) for any keyword
/// that matches no token.
KeywordSelection keyword_maps(const FusedMap& fused, const TokenTable& tokens,
                              const std::vector<std::string>& keywords);

/// Min-max normalization with the constant-input -> all-zero rule.
std::vector<double> min_max_normalize(std::span<const double> values);

}  // namespace attnmask
