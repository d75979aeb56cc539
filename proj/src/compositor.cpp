#include "attnmask/compositor.hpp"

#include "attnmask/error.hpp"
#include "attnmask/parallel.hpp"

namespace attnmask {

RgbaImage compose(const RgbImage& image, const SubjectMask& mask) {
    if (image.width != mask.width || image.height != mask.height)
        throw ShapeError("image is " + std::to_string(image.width) + "x" + std::to_string(image.height) +
                         " but mask is " + std::to_string(mask.width) + "x" + std::to_string(mask.height));
    if (image.data.size() != image.pixels() * 3 || mask.data.size() != image.pixels())
        throw ShapeError("image or mask buffer size mismatch");
    RgbaImage out{image.width, image.height, std::vector<std::uint8_t>(image.pixels() * 4, 0)};
    parallel_for(image.pixels(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            if (!mask.data[i]) continue;
            for (int c = 0; c < 3; ++c) out.data[4 * i + c] = image.data[3 * i + c];
            out.data[4 * i + 3] = 255;
        }
    });
    return out;
}

Rgb8 Background::at(std::size_t x, std::size_t y) const {
    if (kind == Kind::Solid || cell == 0) return color;
    return ((x / cell) + (y / cell)) % 2 == 0 ? color : alternate;
}

RgbImage flatten(const RgbaImage& image, const Background& background) {
    if (image.data.size() != image.pixels() * 4) throw ShapeError("RGBA buffer size mismatch");
    RgbImage out(image.width, image.height);
    parallel_for(image.pixels(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            if (image.data[4 * i + 3] > 0)
                out.set(i, {image.data[4 * i], image.data[4 * i + 1], image.data[4 * i + 2]});
            else
                out.set(i, background.at(i % image.width, i / image.width));
        }
    });
    return out;
}

}  // namespace attnmask
