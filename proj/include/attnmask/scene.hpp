#pragma once

#include "attnmask/image.hpp"

#include <cstddef>
#include <cstdint>

namespace attnmask {

/// Synthetic test images with a known subject.
struct SubjectScene {
    RgbImage image;
    SubjectMask truth;
};

SubjectMask disk_mask(std::size_t width, std::size_t height, double cx, double cy, double radius);
SubjectMask rect_mask(std::size_t width, std::size_t height, std::size_t x0, std::size_t y0, std::size_t w,
                      std::size_t h);

/// Subject pixels drawn around `fg`, the rest around `bg`, with i.i.d.
/// Gaussian per-channel noise of the given sigma (clamped to [0, 255]).
SubjectScene render_scene(const SubjectMask& truth, Rgb8 fg, Rgb8 bg, double sigma, std::uint64_t seed);

}  // namespace attnmask
