#include "attnmask/synthetic.hpp"

#include "attnmask/error.hpp"
#include "attnmask/random.hpp"

#include <algorithm>
#include <fstream>

namespace attnmask {

const MapPattern& SyntheticSpec::pattern_for(std::uint32_t step, std::uint32_t layer) const {
    if (per_map.empty()) return default_pattern;
    return per_map[std::size_t{step} * header.layers + layer];
}

void SyntheticSpec::validate() const {
    try {
        header.validate();
    } catch (const ConfigError& e) {
        throw ShapeError(std::string("synthetic spec: ") + e.what());
    }
    if (!tokens.empty() && tokens.size() != header.num_tokens)
        throw ShapeError("synthetic spec: token list length differs from num_tokens");
    if (!valid.empty() && valid.size() != header.num_tokens)
        throw ShapeError("synthetic spec: valid mask length differs from num_tokens");
    if (!per_map.empty() && per_map.size() != header.record_count())
        throw ShapeError("synthetic spec: per_map must list steps*layers patterns");

    auto check = [&](const MapPattern& p) {
        if (p.noise_amplitude < 0.0 || p.noise_amplitude >= 1.0)
            throw ShapeError("synthetic spec: noise amplitude must be in [0, 1)");
        if (p.kind == PatternKind::UniformNoise) return;
        if (p.token >= header.num_tokens) throw ShapeError("synthetic spec: pattern token out of range");
        if (p.pixel >= header.latent_pixels()) throw ShapeError("synthetic spec: pattern pixel out of range");
        if (p.kind == PatternKind::Delta && (p.peak < 0.9 || p.peak > 1.0))
            throw ShapeError("synthetic spec: delta peak must be in [0.9, 1]");
        if (p.kind == PatternKind::Blend && (p.alpha < 0.0 || p.alpha > 1.0 || p.peak <= 0.0 || p.peak > 1.0))
            throw ShapeError("synthetic spec: blend alpha must be in [0, 1]");
    };
    check(default_pattern);
    for (const auto& p : per_map) check(p);
}

TokenTable synthetic_tokens(const SyntheticSpec& spec) {
    TokenTable table;
    if (spec.tokens.empty()) {
        for (std::uint32_t n = 0; n < spec.header.num_tokens; ++n) table.tokens.push_back("tok" + std::to_string(n));
    } else {
        table.tokens = spec.tokens;
    }
    table.valid = spec.valid.empty() ? std::vector<bool>(spec.header.num_tokens, true) : spec.valid;
    return table;
}

namespace {

void noise_row(Rng& rng, double amplitude, std::vector<double>& row) {
    double sum = 0.0;
    for (auto& v : row) {
        v = amplitude > 0.0 ? 1.0 + amplitude * rng.uniform(-1.0, 1.0) : 1.0;
        sum += v;
    }
    for (auto& v : row) v /= sum;
}

void delta_row(std::size_t pixel, double peak, std::vector<double>& row) {
    const std::size_t hw = row.size();
    if (hw == 1) {
        row[0] = 1.0;
        return;
    }
    const double rest = (1.0 - peak) / static_cast<double>(hw - 1);
    std::fill(row.begin(), row.end(), rest);
    row[pixel] = peak;
}

}  // namespace

std::vector<std::vector<std::vector<double>>> synthetic_rows(const SyntheticSpec& spec, std::uint32_t step,
                                                             std::uint32_t layer) {
    const auto& h = spec.header;
    const std::size_t hw = h.latent_pixels();
    const MapPattern& pat = spec.pattern_for(step, layer);
    Rng rng(mix_seed(spec.seed) ^ mix_seed((std::uint64_t{step} << 32) | layer));

    std::vector<std::vector<std::vector<double>>> rows(
        h.heads, std::vector<std::vector<double>>(h.num_tokens, std::vector<double>(hw)));
    std::vector<double> scratch(hw);
    for (std::uint32_t head = 0; head < h.heads; ++head) {
        for (std::uint32_t n = 0; n < h.num_tokens; ++n) {
            auto& row = rows[head][n];
            const bool target = pat.kind != PatternKind::UniformNoise && n == pat.token;
            if (!target) {
                noise_row(rng, pat.noise_amplitude, row);
            } else if (pat.kind == PatternKind::Delta) {
                delta_row(pat.pixel, pat.peak, row);
            } else {
                delta_row(pat.pixel, pat.peak, row);
                noise_row(rng, pat.noise_amplitude, scratch);
                for (std::size_t p = 0; p < hw; ++p) row[p] = pat.alpha * row[p] + (1.0 - pat.alpha) * scratch[p];
            }
        }
    }
    return rows;
}

AttentionRecord synthetic_record(const SyntheticSpec& spec, std::uint32_t step, std::uint32_t layer) {
    const auto& h = spec.header;
    const std::size_t hw = h.latent_pixels();
    const std::size_t N = h.num_tokens;
    const std::size_t F = h.heads;
    const auto rows = synthetic_rows(spec, step, layer);

    AttentionRecord rec;
    rec.step = step;
    rec.layer = layer;
    rec.values.assign(h.record_values(), 0.0f);

    if (h.layout == Layout::CrossOnly) {
        for (std::size_t n = 0; n < N; ++n)
            for (std::size_t p = 0; p < hw; ++p)
                for (std::size_t f = 0; f < F; ++f)
                    rec.values[(n * hw + p) * F + f] = static_cast<float>(rows[f][n][p]);
        return rec;
    }

    // Largest per-query text mass across heads decides the (global) scale.
    double max_column = 0.0;
    for (std::size_t f = 0; f < F; ++f)
        for (std::size_t p = 0; p < hw; ++p) {
            double col = 0.0;
            for (std::size_t n = 0; n < N; ++n) col += rows[f][n][p];
            max_column = std::max(max_column, col);
        }
    const double scale = max_column > 1.0 ? 1.0 / max_column : 1.0;

    const std::size_t S = h.sequence_length();
    auto text_pos = [&](std::size_t n) { return h.text_first ? n : hw + n; };
    auto image_pos = [&](std::size_t p) { return h.text_first ? N + p : p; };
    auto at = [&](std::size_t q, std::size_t k, std::size_t f) -> float& { return rec.values[(q * S + k) * F + f]; };

    const float uniform_row = static_cast<float>(1.0 / static_cast<double>(S));
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t k = 0; k < S; ++k)
            for (std::size_t f = 0; f < F; ++f) at(text_pos(n), k, f) = uniform_row;

    for (std::size_t p = 0; p < hw; ++p) {
        const std::size_t q = image_pos(p);
        for (std::size_t f = 0; f < F; ++f) {
            double text_mass = 0.0;
            for (std::size_t n = 0; n < N; ++n) {
                const float v = static_cast<float>(scale * rows[f][n][p]);
                at(q, text_pos(n), f) = v;
                text_mass += v;
            }
            const float rest = static_cast<float>(std::max(0.0, 1.0 - text_mass) / static_cast<double>(hw));
            for (std::size_t pk = 0; pk < hw; ++pk) at(q, image_pos(pk), f) = rest;
        }
    }
    return rec;
}

SyntheticDump generate_synthetic_dump(const SyntheticSpec& spec) {
    spec.validate();
    SyntheticDump dump{spec.header, synthetic_tokens(spec), {}};
    dump.records.reserve(spec.header.record_count());
    for (std::uint32_t t = 0; t < spec.header.steps; ++t)
        for (std::uint32_t l = 0; l < spec.header.layers; ++l) dump.records.push_back(synthetic_record(spec, t, l));
    return dump;
}

std::size_t write_synthetic_dump(const SyntheticSpec& spec, std::ostream& out) {
    spec.validate();
    DumpWriter writer(out, spec.header, synthetic_tokens(spec));
    for (std::uint32_t t = 0; t < spec.header.steps; ++t)
        for (std::uint32_t l = 0; l < spec.header.layers; ++l) writer.write(synthetic_record(spec, t, l));
    return writer.finish();
}

std::size_t write_synthetic_dump_file(const SyntheticSpec& spec, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    return write_synthetic_dump(spec, out);
}

}  // namespace attnmask
