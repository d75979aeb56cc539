#pragma once

// Straight-line reference computations shared by the unit tests and the
// acceptance runner. Nothing here calls into the library's numeric code.

#include "attnmask/image.hpp"
#include "attnmask/trimap.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

namespace oracle {

/// Two passes: range first, then counts against explicit bin edges.
inline double entropy(const std::vector<float>& row, std::size_t bins) {
    double lo = row[0], hi = row[0];
    for (float v : row) {
        lo = std::min<double>(lo, v);
        hi = std::max<double>(hi, v);
    }
    if (hi == lo) return 0.0;
    const double width = (hi - lo) / static_cast<double>(bins);
    std::vector<double> counts(bins, 0.0);
    for (float v : row) {
        std::size_t k = 0;
        while (k + 1 < bins && static_cast<double>(v) >= lo + static_cast<double>(k + 1) * width) ++k;
        counts[k] += 1.0;
    }
    double h = 0;
    for (double c : counts)
        if (c > 0) {
            const double p = c / static_cast<double>(row.size());
            h -= p * std::log(p);
        }
    return h / std::log(2.0);
}

/// Mean row entropy of a token-major [n][p] map.
inline double map_entropy(const std::vector<float>& m, std::size_t N, std::size_t hw, std::size_t bins = 256) {
    double H = 0;
    for (std::size_t n = 0; n < N; ++n)
        H += entropy(std::vector<float>(m.begin() + n * hw, m.begin() + (n + 1) * hw), bins);
    return H / static_cast<double>(N);
}

/// Weighted fusion over a raw stack indexed [t * L + l][n * hw + p].
inline std::vector<double> fusion(const std::vector<std::vector<float>>& stack, std::size_t N, std::size_t hw,
                                  std::size_t T, std::size_t L, std::vector<double>* weights = nullptr) {
    std::vector<double> out(N * hw, 0.0);
    for (std::size_t l = 0; l < L; ++l)
        for (std::size_t t = 0; t < T; ++t) {
            const auto& m = stack[t * L + l];
            const double W = 1.0 / (map_entropy(m, N, hw) + 1e-6);
            if (weights) weights->push_back(W);
            for (std::size_t i = 0; i < N * hw; ++i) out[i] += W * m[i];
        }
    for (auto& v : out) v /= static_cast<double>(T * L);
    return out;
}

/// Band table written out directly.
inline attnmask::TrimapLabel band(double v) {
    using attnmask::TrimapLabel;
    if (v >= 0.8) return TrimapLabel::SureFg;
    if (v >= 0.2) return TrimapLabel::ProbFg;
    if (v >= 0.1) return TrimapLabel::ProbBg;
    return TrimapLabel::SureBg;
}

struct Edge {
    int a, b;
    double cap, rev;
};

struct SmallGraph {
    int n = 0;
    std::vector<double> src, snk;
    std::vector<Edge> edges;
};

/// Minimum over every source/sink labelling of the nodes; bit i set = node i on the source side.
inline double min_cut(const SmallGraph& g) {
    double best = std::numeric_limits<double>::infinity();
    for (unsigned s = 0; s < (1u << g.n); ++s) {
        double c = 0;
        for (int i = 0; i < g.n; ++i) c += (s >> i & 1) ? g.snk[i] : g.src[i];
        for (const auto& e : g.edges) {
            const bool a = s >> e.a & 1, b = s >> e.b & 1;
            if (a && !b) c += e.cap;
            if (b && !a) c += e.rev;
        }
        best = std::min(best, c);
    }
    return best;
}

inline double iou(const attnmask::SubjectMask& a, const attnmask::SubjectMask& b) {
    std::size_t inter = 0, uni = 0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        inter += a.data[i] && b.data[i];
        uni += a.data[i] || b.data[i];
    }
    return uni ? static_cast<double>(inter) / static_cast<double>(uni) : 1.0;
}

/// Chebyshev distance to a rectangle; negative inside (depth to its edge).
inline long rect_offset(long x, long y, long x0, long y0, long x1, long y1) {
    const long dx = std::max({x0 - x, 0L, x - x1});
    const long dy = std::max({y0 - y, 0L, y - y1});
    if (dx || dy) return std::max(dx, dy);
    return -std::min({x - x0, x1 - x, y - y0, y1 - y}) - 1;
}

/// Square subject with a probable band straddling its edge.
inline attnmask::Trimap loose_trimap(std::size_t size, long x0, long y0, long side, long inner, long outer_fg,
                                     long outer_bg) {
    using attnmask::TrimapLabel;
    attnmask::Trimap t{size, size, std::vector<TrimapLabel>(size * size)};
    for (long y = 0; y < static_cast<long>(size); ++y)
        for (long x = 0; x < static_cast<long>(size); ++x) {
            const long d = rect_offset(x, y, x0, y0, x0 + side - 1, y0 + side - 1);
            TrimapLabel l = TrimapLabel::SureBg;
            if (d <= -inner)
                l = TrimapLabel::SureFg;
            else if (d <= outer_fg)
                l = TrimapLabel::ProbFg;
            else if (d <= outer_bg)
                l = TrimapLabel::ProbBg;
            t.labels[y * size + x] = l;
        }
    return t;
}

}  // namespace oracle
