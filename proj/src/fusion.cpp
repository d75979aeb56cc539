#include "attnmask/fusion.hpp"

#include "attnmask/error.hpp"
#include "attnmask/parallel.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <set>

namespace attnmask {

void WeightConfig::validate() const {
    if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw ConfigError("fusion epsilon must be > 0");
    if (bins < 2) throw ConfigError("histogram bin count must be >= 2");
}

CrossAttentionMap extract_cross(const AttentionRecord& record, const DumpHeader& header) {
    if (record.values.size() != header.record_values())
        throw ShapeError("record (t=" + std::to_string(record.step) + ", l=" + std::to_string(record.layer) +
                         ") does not match header shape");
    const std::size_t N = header.num_tokens;
    const std::size_t hw = header.latent_pixels();
    const std::size_t F = header.heads;
    const double inv_heads = 1.0 / static_cast<double>(F);

    CrossAttentionMap map{record.step, record.layer, N, hw, std::vector<float>(N * hw)};
    const float* src = record.values.data();

    if (header.layout == Layout::CrossOnly) {
        for (std::size_t i = 0; i < N * hw; ++i) {
            double s = 0.0;
            for (std::size_t f = 0; f < F; ++f) s += src[i * F + f];
            map.data[i] = static_cast<float>(s * inv_heads);
        }
        return map;
    }

    // Joint: rows are queries, columns keys. Take image queries x text keys.
    const std::size_t S = header.sequence_length();
    const std::size_t text0 = header.text_first ? 0 : hw;
    const std::size_t image0 = header.text_first ? N : 0;
    parallel_for(
        hw,
        [&](std::size_t begin, std::size_t end) {
            for (std::size_t p = begin; p < end; ++p) {
                const float* qrow = src + (image0 + p) * S * F;
                for (std::size_t n = 0; n < N; ++n) {
                    const float* cell = qrow + (text0 + n) * F;
                    double s = 0.0;
                    for (std::size_t f = 0; f < F; ++f) s += cell[f];
                    map.data[n * hw + p] = static_cast<float>(s * inv_heads);
                }
            }
        },
        64);
    return map;
}

double row_entropy(std::span<const float> row, std::size_t bins) {
    if (row.empty()) return 0.0;
    const auto [lo_it, hi_it] = std::minmax_element(row.begin(), row.end());
    const double lo = *lo_it;
    const double range = static_cast<double>(*hi_it) - lo;
    if (!(range > 0.0)) return 0.0;

    std::vector<std::size_t> counts(bins, 0);
    const double scale = static_cast<double>(bins);
    for (float v : row) {
        const double u = (static_cast<double>(v) - lo) / range;
        auto b = static_cast<std::size_t>(u * scale);
        if (b >= bins) b = bins - 1;
        ++counts[b];
    }
    const double total = static_cast<double>(row.size());
    double h = 0.0;
    for (std::size_t c : counts) {
        if (c == 0) continue;
        const double p = static_cast<double>(c) / total;
        h -= p * std::log2(p);
    }
    return h;
}

EntropyScore entropy_of_map(const CrossAttentionMap& map, const WeightConfig& cfg,
                            const std::vector<bool>& token_mask) {
    cfg.validate();
    if (map.num_tokens == 0 || map.pixels == 0) throw ShapeError("entropy of an empty map");
    if (token_mask.size() != map.num_tokens) throw ShapeError("token mask length differs from map token count");
    const std::size_t selected = static_cast<std::size_t>(std::count(token_mask.begin(), token_mask.end(), true));
    if (selected == 0) throw InvariantError("entropy requires at least one unmasked token");

    std::vector<double> per_token(map.num_tokens, 0.0);
    parallel_for(
        map.num_tokens,
        [&](std::size_t begin, std::size_t end) {
            for (std::size_t n = begin; n < end; ++n)
                if (token_mask[n]) per_token[n] = row_entropy(map.row(n), cfg.bins);
        },
        16);
    double sum = 0.0;
    for (std::size_t n = 0; n < map.num_tokens; ++n)
        if (token_mask[n]) sum += per_token[n];
    return EntropyScore{map.step, map.layer, sum / static_cast<double>(selected), cfg.bins};
}

double weight_of(const EntropyScore& score, const WeightConfig& cfg) { return 1.0 / (score.entropy + cfg.epsilon); }

// ---------------------------------------------------------------- fusion

FusionAccumulator::FusionAccumulator(std::uint32_t steps, std::uint32_t layers, std::size_t num_tokens,
                                     std::size_t pixels, WeightConfig cfg, std::vector<bool> token_mask)
    : steps_(steps),
      layers_(layers),
      num_tokens_(num_tokens),
      pixels_(pixels),
      cfg_(cfg),
      mask_(std::move(token_mask)),
      acc_(num_tokens * pixels, 0.0) {
    cfg_.validate();
    if (steps == 0 || layers == 0) throw ConfigError("fusion needs at least one step and one layer");
    if (mask_.size() != num_tokens) throw ShapeError("token mask length differs from token count");
    provenance_.reserve(std::size_t{steps} * layers);
}

const FusionProvenance& FusionAccumulator::add(const CrossAttentionMap& map) {
    const std::size_t index = provenance_.size();
    if (index >= std::size_t{steps_} * layers_) throw ShapeError("more maps than steps*layers");
    const std::uint32_t t = static_cast<std::uint32_t>(index / layers_);
    const std::uint32_t l = static_cast<std::uint32_t>(index % layers_);
    if (map.step != t || map.layer != l)
        throw ShapeError("fusion expected map (t=" + std::to_string(t) + ", l=" + std::to_string(l) + "), got (t=" +
                         std::to_string(map.step) + ", l=" + std::to_string(map.layer) + ")");
    if (map.num_tokens != num_tokens_ || map.pixels != pixels_ || map.data.size() != acc_.size())
        throw ShapeError("fusion map shape mismatch at (t=" + std::to_string(t) + ", l=" + std::to_string(l) + ")");

    const EntropyScore score = entropy_of_map(map, cfg_, mask_);
    const double w = weight_of(score, cfg_);
    parallel_for(acc_.size(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) acc_[i] += w * static_cast<double>(map.data[i]);
    });
    provenance_.push_back(FusionProvenance{t, l, score.entropy, w});
    return provenance_.back();
}

FusedMap FusionAccumulator::finish() && {
    const std::size_t expected = std::size_t{steps_} * layers_;
    if (provenance_.size() != expected)
        throw ShapeError("fusion is missing maps: got " + std::to_string(provenance_.size()) + " of " +
                         std::to_string(expected));
    const double inv = 1.0 / static_cast<double>(expected);
    for (auto& v : acc_) v *= inv;
    return FusedMap{num_tokens_, pixels_, std::move(acc_), std::move(provenance_)};
}

FusedMap fuse(std::vector<CrossAttentionMap> maps, std::uint32_t steps, std::uint32_t layers,
              const WeightConfig& cfg, const std::vector<bool>& token_mask) {
    if (maps.empty()) throw ShapeError("fusion needs at least one map");
    std::sort(maps.begin(), maps.end(), [](const CrossAttentionMap& a, const CrossAttentionMap& b) {
        return std::pair(a.step, a.layer) < std::pair(b.step, b.layer);
    });
    for (std::size_t i = 1; i < maps.size(); ++i)
        if (maps[i].step == maps[i - 1].step && maps[i].layer == maps[i - 1].layer)
            throw ShapeError("duplicate map (t=" + std::to_string(maps[i].step) +
                             ", l=" + std::to_string(maps[i].layer) + ")");
    if (maps.size() != std::size_t{steps} * layers)
        throw ShapeError("fusion needs exactly steps*layers maps, got " + std::to_string(maps.size()));

    FusionAccumulator acc(steps, layers, maps.front().num_tokens, maps.front().pixels, cfg, token_mask);
    for (const auto& m : maps) acc.add(m);
    return std::move(acc).finish();
}

// ---------------------------------------------------------------- keywords

namespace {

bool starts_with(std::string_view s, std::string_view prefix) { return s.substr(0, prefix.size()) == prefix; }

std::string fold(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

std::string normalize_keyword(std::string_view keyword) {
    std::string out;
    for (char c : keyword)
        if (!std::isspace(static_cast<unsigned char>(c))) out.push_back(c);
    return fold(out);
}

std::size_t edit_distance(const std::string& a, const std::string& b) {
    std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
    std::iota(prev.begin(), prev.end(), std::size_t{0});
    for (std::size_t i = 1; i <= a.size(); ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j)
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

std::vector<std::string> nearest_tokens(const TokenTable& tokens, const std::string& keyword) {
    std::set<std::string> distinct;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (!tokens.valid[i]) continue;
        auto norm = normalize_token(tokens.tokens[i]);
        if (!norm.empty()) distinct.insert(std::move(norm));
    }
    std::vector<std::pair<std::size_t, std::string>> ranked;
    for (const auto& t : distinct) ranked.emplace_back(edit_distance(t, keyword), t);
    std::sort(ranked.begin(), ranked.end());
    std::vector<std::string> out;
    for (std::size_t i = 0; i < ranked.size() && i < 5; ++i) out.push_back(ranked[i].second);
    return out;
}

}  // namespace

std::string normalize_token(std::string_view token) {
    auto trim = [](std::string_view s) {
        while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
        while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
        return s;
    };
    std::string_view s = trim(token);
    constexpr std::string_view kSentencePiece = "\xE2\x96\x81";  // U+2581
    constexpr std::string_view kByteLevel = "\xC4\xA0";          // U+0120
    for (;;) {
        if (starts_with(s, kSentencePiece)) s.remove_prefix(kSentencePiece.size());
        else if (starts_with(s, kByteLevel)) s.remove_prefix(kByteLevel.size());
        else break;
    }
    if (starts_with(s, "##")) s.remove_prefix(2);
    if (s.size() >= 4 && s.substr(s.size() - 4) == "</w>") s.remove_suffix(4);
    return fold(trim(s));
}

std::vector<std::size_t> match_keyword(const TokenTable& tokens, std::string_view keyword) {
    const std::string kw = normalize_keyword(keyword);
    if (kw.empty()) return {};
    std::vector<std::string> norm;
    norm.reserve(tokens.size());
    for (const auto& t : tokens.tokens) norm.push_back(normalize_token(t));

    std::set<std::size_t> hits;
    for (std::size_t i = 0; i < norm.size(); ++i) {
        if (!tokens.valid[i] || norm[i].empty()) continue;
        std::string concat;
        for (std::size_t j = i; j < norm.size() && tokens.valid[j]; ++j) {
            concat += norm[j];
            if (concat.size() > kw.size() || kw.compare(0, concat.size(), concat) != 0) break;
            if (concat.size() == kw.size()) {
                for (std::size_t k = i; k <= j; ++k) hits.insert(k);
                break;
            }
        }
    }
    return {hits.begin(), hits.end()};
}

std::vector<double> min_max_normalize(std::span<const double> values) {
    std::vector<double> out(values.size(), 0.0);
    if (values.empty()) return out;
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    const double range = *hi - *lo;
    if (!(range > 0.0)) return out;
    for (std::size_t i = 0; i < values.size(); ++i) out[i] = std::clamp((values[i] - *lo) / range, 0.0, 1.0);
    return out;
}

KeywordSelection keyword_maps(const FusedMap& fused, const TokenTable& tokens,
                              const std::vector<std::string>& keywords) {
    if (tokens.size() != fused.num_tokens) throw ShapeError("token table does not match fused map");
    if (keywords.empty()) throw ConfigError("at least one keyword is required");

    KeywordSelection out;
    out.union_map.assign(fused.pixels, 0.0);
    for (const auto& kw : keywords) {
        auto indices = match_keyword(tokens, kw);
        if (indices.empty()) throw UnmatchedKeywordError(kw, nearest_tokens(tokens, normalize_keyword(kw)));

        std::vector<double> mean(fused.pixels, 0.0);
        for (std::size_t n : indices) {
            const auto row = fused.row(n);
            for (std::size_t p = 0; p < fused.pixels; ++p) mean[p] += row[p];
        }
        const double inv = 1.0 / static_cast<double>(indices.size());
        for (auto& v : mean) v *= inv;

        KeywordMap km{kw, std::move(indices), min_max_normalize(mean)};
        for (std::size_t p = 0; p < fused.pixels; ++p) out.union_map[p] = std::max(out.union_map[p], km.data[p]);
        out.maps.push_back(std::move(km));
    }
    return out;
}

}  // namespace attnmask
