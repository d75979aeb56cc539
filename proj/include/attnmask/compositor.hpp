#pragma once

#include "attnmask/image.hpp"

#include <cstddef>

namespace attnmask {

/// Alpha 255 under the subject, 0 elsewhere; RGB outside the subject is zeroed.
RgbaImage compose(const RgbImage& image, const SubjectMask& mask);

struct Background {
    enum class Kind { Solid, Checkerboard };

    Kind kind = Kind::Solid;
    Rgb8 color = {255, 255, 255};
    Rgb8 alternate = {192, 192, 192};
    std::size_t cell = 8;

    static Background solid(Rgb8 c) { return Background{Kind::Solid, c, c, 1}; }
    static Background checkerboard(std::size_t cell = 8, Rgb8 a = {255, 255, 255}, Rgb8 b = {192, 192, 192}) {
        return Background{Kind::Checkerboard, a, b, cell};
    }

    Rgb8 at(std::size_t x, std::size_t y) const;
};

/// Binary over-compositing: each pixel is the source where alpha > 0,
/// otherwise the background.
RgbImage flatten(const RgbaImage& image, const Background& background);

}  // namespace attnmask
