#pragma once

#include "attnmask/image.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace attnmask {

enum class TrimapLabel : std::uint8_t { SureBg = 0, ProbBg = 1, ProbFg = 2, SureFg = 3 };

const char* to_string(TrimapLabel label);

struct Trimap {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<TrimapLabel> labels;

    std::size_t pixels() const { return width * height; }
    /// Counts indexed by TrimapLabel value.
    std::array<std::size_t, 4> counts() const;
    bool operator==(const Trimap&) const = default;
};

struct ThresholdConfig {
    double sure_fg = 0.8;
    double prob_fg = 0.2;
    double prob_bg = 0.1;

    void validate() const;
};

/// Band lookup with inclusive lower edges.
TrimapLabel classify(double value, const ThresholdConfig& cfg);

/// Bilinear resize with align-corners sampling, output clamped to [0, 1].
/// `map` is row-major latent_w x latent_h.
ScalarImage upsample(std::span<const double> map, std::size_t latent_w, std::size_t latent_h, std::size_t target_w,
                     std::size_t target_h);

/// Throws InvariantError if a value is outside [0, 1] or not finite.
Trimap build_trimap(const ScalarImage& image, const ThresholdConfig& cfg);

/// Nearest-neighbour label resize (for thresholding at latent resolution).
Trimap resize_trimap_nearest(const Trimap& trimap, std::size_t target_w, std::size_t target_h);

/// Inspection codes: SureFg 255, ProbFg 170, ProbBg 85, SureBg 0.
GrayImage trimap_to_gray(const Trimap& trimap);
Trimap trimap_from_gray(const GrayImage& gray);

}  // namespace attnmask
