#include "attnmask/trimap.hpp"

#include "attnmask/error.hpp"

#include <algorithm>
#include <cmath>

namespace attnmask {

const char* to_string(TrimapLabel label) {
    switch (label) {
        case TrimapLabel::SureBg: return "sure_bg";
        case TrimapLabel::ProbBg: return "prob_bg";
        case TrimapLabel::ProbFg: return "prob_fg";
        case TrimapLabel::SureFg: return "sure_fg";
    }
    return "unknown";
}

std::array<std::size_t, 4> Trimap::counts() const {
    std::array<std::size_t, 4> c{};
    for (auto l : labels) ++c[static_cast<std::size_t>(l)];
    return c;
}

void ThresholdConfig::validate() const {
    if (!(0.0 <= prob_bg && prob_bg < prob_fg && prob_fg < sure_fg && sure_fg <= 1.0))
        throw ConfigError("thresholds must satisfy 0 <= prob_bg < prob_fg < sure_fg <= 1");
}

TrimapLabel classify(double value, const ThresholdConfig& cfg) {
    if (value >= cfg.sure_fg) return TrimapLabel::SureFg;
    if (value >= cfg.prob_fg) return TrimapLabel::ProbFg;
    if (value >= cfg.prob_bg) return TrimapLabel::ProbBg;
    return TrimapLabel::SureBg;
}

ScalarImage upsample(std::span<const double> map, std::size_t latent_w, std::size_t latent_h, std::size_t target_w,
                     std::size_t target_h) {
    if (target_w == 0 || target_h == 0) throw ConfigError("upsample target dimensions must be nonzero");
    if (latent_w == 0 || latent_h == 0 || map.size() != latent_w * latent_h)
        throw ShapeError("upsample source does not match its dimensions");
    if (target_w < latent_w || target_h < latent_h)
        throw ConfigError("upsample target must be at least the latent resolution");

    ScalarImage out{target_w, target_h, std::vector<double>(target_w * target_h)};
    const double sx = target_w > 1 ? static_cast<double>(latent_w - 1) / static_cast<double>(target_w - 1) : 0.0;
    const double sy = target_h > 1 ? static_cast<double>(latent_h - 1) / static_cast<double>(target_h - 1) : 0.0;
    for (std::size_t y = 0; y < target_h; ++y) {
        const double fy = static_cast<double>(y) * sy;
        const auto y0 = std::min(static_cast<std::size_t>(fy), latent_h - 1);
        const std::size_t y1 = std::min(y0 + 1, latent_h - 1);
        const double wy = fy - static_cast<double>(y0);
        for (std::size_t x = 0; x < target_w; ++x) {
            const double fx = static_cast<double>(x) * sx;
            const auto x0 = std::min(static_cast<std::size_t>(fx), latent_w - 1);
            const std::size_t x1 = std::min(x0 + 1, latent_w - 1);
            const double wx = fx - static_cast<double>(x0);
            const double top = map[y0 * latent_w + x0] * (1.0 - wx) + map[y0 * latent_w + x1] * wx;
            const double bottom = map[y1 * latent_w + x0] * (1.0 - wx) + map[y1 * latent_w + x1] * wx;
            out.data[y * target_w + x] = std::clamp(top * (1.0 - wy) + bottom * wy, 0.0, 1.0);
        }
    }
    return out;
}

Trimap build_trimap(const ScalarImage& image, const ThresholdConfig& cfg) {
    cfg.validate();
    if (image.data.size() != image.width * image.height) throw ShapeError("trimap source size mismatch");
    Trimap tri{image.width, image.height, std::vector<TrimapLabel>(image.data.size())};
    for (std::size_t i = 0; i < image.data.size(); ++i) {
        const double v = image.data[i];
        if (!std::isfinite(v) || v < 0.0 || v > 1.0)
            throw InvariantError("trimap input value " + std::to_string(v) + " at pixel " + std::to_string(i) +
                                 " is outside [0, 1]");
        tri.labels[i] = classify(v, cfg);
    }
    return tri;
}

Trimap resize_trimap_nearest(const Trimap& trimap, std::size_t target_w, std::size_t target_h) {
    if (target_w == 0 || target_h == 0) throw ConfigError("trimap target dimensions must be nonzero");
    Trimap out{target_w, target_h, std::vector<TrimapLabel>(target_w * target_h)};
    for (std::size_t y = 0; y < target_h; ++y) {
        const std::size_t sy = std::min(trimap.height - 1, y * trimap.height / target_h);
        for (std::size_t x = 0; x < target_w; ++x) {
            const std::size_t sx = std::min(trimap.width - 1, x * trimap.width / target_w);
            out.labels[y * target_w + x] = trimap.labels[sy * trimap.width + sx];
        }
    }
    return out;
}

GrayImage trimap_to_gray(const Trimap& trimap) {
    static constexpr std::uint8_t kCodes[4] = {0, 85, 170, 255};
    GrayImage g{trimap.width, trimap.height, std::vector<std::uint8_t>(trimap.labels.size())};
    for (std::size_t i = 0; i < trimap.labels.size(); ++i) g.data[i] = kCodes[static_cast<std::size_t>(trimap.labels[i])];
    return g;
}

Trimap trimap_from_gray(const GrayImage& gray) {
    Trimap tri{gray.width, gray.height, std::vector<TrimapLabel>(gray.data.size())};
    for (std::size_t i = 0; i < gray.data.size(); ++i) {
        switch (gray.data[i]) {
            case 0: tri.labels[i] = TrimapLabel::SureBg; break;
            case 85: tri.labels[i] = TrimapLabel::ProbBg; break;
            case 170: tri.labels[i] = TrimapLabel::ProbFg; break;
            case 255: tri.labels[i] = TrimapLabel::SureFg; break;
            default:
                throw InvariantError("trimap pixel " + std::to_string(i) + " has code " + std::to_string(gray.data[i]) +
                                     "; expected 0, 85, 170 or 255");
        }
    }
    return tri;
}

}  // namespace attnmask
