#include "attnmask/grabcut.hpp"

#include "attnmask/error.hpp"
#include "attnmask/parallel.hpp"

#include <algorithm>
#include <cmath>

namespace attnmask {

namespace {

// Forward half of the 8-neighbourhood; each unordered pair is visited once.
constexpr int kOffsets[4][2] = {{1, 0}, {-1, 1}, {0, 1}, {1, 1}};

double color_distance2(const RgbImage& image, std::size_t a, std::size_t b) {
    double s = 0.0;
    for (int c = 0; c < 3; ++c) {
        const double d = static_cast<double>(image.data[3 * a + c]) - static_cast<double>(image.data[3 * b + c]);
        s += d * d;
    }
    return s;
}

template <typename Fn>
void for_each_pair(const RgbImage& image, Fn&& fn) {
    const auto w = static_cast<long>(image.width);
    const auto h = static_cast<long>(image.height);
    for (long y = 0; y < h; ++y) {
        for (long x = 0; x < w; ++x) {
            for (const auto& off : kOffsets) {
                const long nx = x + off[0];
                const long ny = y + off[1];
                if (nx < 0 || nx >= w || ny >= h) continue;
                const bool diagonal = off[0] != 0 && off[1] != 0;
                fn(static_cast<std::size_t>(y * w + x), static_cast<std::size_t>(ny * w + nx), diagonal);
            }
        }
    }
}

bool is_hard(TrimapLabel l) { return l == TrimapLabel::SureFg || l == TrimapLabel::SureBg; }

}  // namespace

void GrabCutParams::validate() const {
    if (components == 0) throw ConfigError("GrabCut needs at least one GMM component");
    if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw ConfigError("GrabCut gamma must be finite and >= 0");
    if (iterations == 0) throw ConfigError("GrabCut needs at least one iteration");
}

double compute_beta(const RgbImage& image) {
    double total = 0.0;
    std::size_t pairs = 0;
    for_each_pair(image, [&](std::size_t a, std::size_t b, bool) {
        total += color_distance2(image, a, b);
        ++pairs;
    });
    if (pairs == 0 || !(total > 0.0)) return 0.0;
    return 1.0 / (2.0 * total / static_cast<double>(pairs));
}

std::vector<PixelGraph::NLink> neighbour_links(const RgbImage& image, double gamma, double beta) {
    std::vector<PixelGraph::NLink> links;
    links.reserve(image.pixels() * 4);
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    for_each_pair(image, [&](std::size_t a, std::size_t b, bool diagonal) {
        const double cap = gamma * std::exp(-beta * color_distance2(image, a, b)) * (diagonal ? inv_sqrt2 : 1.0);
        links.push_back({static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b), cap});
    });
    return links;
}

double hard_link_capacity(const RgbImage& image, double gamma) {
    std::vector<std::uint8_t> degree(image.pixels(), 0);
    for_each_pair(image, [&](std::size_t a, std::size_t b, bool) {
        ++degree[a];
        ++degree[b];
    });
    std::uint8_t max_degree = 1;
    for (auto d : degree) max_degree = std::max(max_degree, d);
    return 9.0 * gamma * static_cast<double>(max_degree);
}

PixelGraph build_pixel_graph(const RgbImage& image, const Trimap& trimap, const GmmPair& gmms,
                             const std::vector<PixelGraph::NLink>& nlinks, double hard_capacity) {
    const std::size_t n = image.pixels();
    PixelGraph g{image.width, image.height, std::vector<double>(n, 0.0), std::vector<double>(n, 0.0), nlinks};
    parallel_for(n, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            switch (trimap.labels[i]) {
                case TrimapLabel::SureFg: g.source_caps[i] = hard_capacity; break;
                case TrimapLabel::SureBg: g.sink_caps[i] = hard_capacity; break;
                default: {
                    const Color c = pixel_color(image, i);
                    const double d_fg = gmms.foreground.data_energy(c);
                    const double d_bg = gmms.background.data_energy(c);
                    const double base = std::min(d_fg, d_bg);
                    g.source_caps[i] = d_bg - base;
                    g.sink_caps[i] = d_fg - base;
                }
            }
        }
    });
    return g;
}

double grabcut_energy(const RgbImage& image, const SubjectMask& mask, const GmmPair& gmms,
                      const std::vector<PixelGraph::NLink>& nlinks) {
    std::vector<double> data(image.pixels());
    parallel_for(data.size(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            const Gmm& g = mask.data[i] ? gmms.foreground : gmms.background;
            data[i] = g.data_energy(pixel_color(image, i));
        }
    });
    double e = 0.0;
    for (double d : data) e += d;
    for (const auto& link : nlinks)
        if (mask.data[link.a] != mask.data[link.b]) e += link.capacity;
    return e;
}

SubjectMask segment(const RgbImage& image, const Trimap& trimap, const GrabCutParams& params,
                    SegmentationReport* report) {
    params.validate();
    if (image.width != trimap.width || image.height != trimap.height)
        throw ShapeError("image and trimap dimensions differ");
    if (image.data.size() != image.pixels() * 3) throw ShapeError("RGB buffer size mismatch");

    SegmentationReport local;
    SegmentationReport& rep = report ? *report : local;
    rep = SegmentationReport{};

    const std::size_t n = image.pixels();
    const auto counts = trimap.counts();
    const std::size_t fg_candidates =
        counts[static_cast<std::size_t>(TrimapLabel::SureFg)] + counts[static_cast<std::size_t>(TrimapLabel::ProbFg)];
    const std::size_t bg_candidates = n - fg_candidates;
    const std::size_t probable =
        counts[static_cast<std::size_t>(TrimapLabel::ProbFg)] + counts[static_cast<std::size_t>(TrimapLabel::ProbBg)];

    SubjectMask mask{image.width, image.height, std::vector<std::uint8_t>(n)};
    if (probable == 0) {
        for (std::size_t i = 0; i < n; ++i) mask.data[i] = trimap.labels[i] == TrimapLabel::SureFg ? 1 : 0;
        rep.trivial = true;
        rep.converged = true;
        return mask;
    }
    if (fg_candidates == 0) throw DegenerateRegionError("trimap has no foreground candidates");
    if (bg_candidates == 0) throw DegenerateRegionError("trimap has no background candidates");

    for (std::size_t i = 0; i < n; ++i) {
        const auto l = trimap.labels[i];
        mask.data[i] = (l == TrimapLabel::SureFg || l == TrimapLabel::ProbFg) ? 1 : 0;
    }

    const std::size_t k = std::min({params.components, fg_candidates, bg_candidates});
    GmmPair gmms = init_gmms(image, trimap, k, params.seed);
    rep.beta = compute_beta(image);
    rep.hard_link_capacity = hard_link_capacity(image, params.gamma);
    const auto nlinks = neighbour_links(image, params.gamma, rep.beta);
    rep.energies.push_back(grabcut_energy(image, mask, gmms, nlinks));

    std::vector<std::uint8_t> background(n);
    for (std::size_t it = 0; it < params.iterations; ++it) {
        for (std::size_t i = 0; i < n; ++i) background[i] = mask.data[i] ? 0 : 1;
        auto assignments = assign_components(image, mask.data, gmms.foreground);
        const auto bg_assign = assign_components(image, background, gmms.background);
        for (std::size_t i = 0; i < n; ++i)
            if (background[i]) assignments[i] = bg_assign[i];
        gmms = learn_gmms(image, mask, assignments);

        const PixelGraph graph = build_pixel_graph(image, trimap, gmms, nlinks, rep.hard_link_capacity);
        const MaxFlowResult cut = max_flow(graph);

        std::size_t changed = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const auto l = trimap.labels[i];
            std::uint8_t v = cut.source_side[i];
            if (is_hard(l)) v = l == TrimapLabel::SureFg ? 1 : 0;
            if (v != mask.data[i]) ++changed;
            mask.data[i] = v;
        }
        const std::size_t subject = mask.count();
        if (subject == 0) throw DegenerateRegionError("cut left the foreground empty");
        if (subject == n) throw DegenerateRegionError("cut left the background empty");
        rep.flows.push_back(cut.flow);
        rep.changed_pixels.push_back(changed);
        rep.energies.push_back(grabcut_energy(image, mask, gmms, nlinks));
        rep.iterations_run = it + 1;
        if (changed == 0) {
            rep.converged = true;
            break;
        }
    }
    return mask;
}

}  // namespace attnmask
