#include "attnmask/scene.hpp"

#include "attnmask/random.hpp"

#include <algorithm>
#include <cmath>

namespace attnmask {

SubjectMask disk_mask(std::size_t width, std::size_t height, double cx, double cy, double radius) {
    SubjectMask m{width, height, std::vector<std::uint8_t>(width * height, 0)};
    const double r2 = radius * radius;
    for (std::size_t y = 0; y < height; ++y)
        for (std::size_t x = 0; x < width; ++x) {
            const double dx = static_cast<double>(x) - cx;
            const double dy = static_cast<double>(y) - cy;
            m.data[y * width + x] = dx * dx + dy * dy <= r2 ? 1 : 0;
        }
    return m;
}

SubjectMask rect_mask(std::size_t width, std::size_t height, std::size_t x0, std::size_t y0, std::size_t w,
                      std::size_t h) {
    SubjectMask m{width, height, std::vector<std::uint8_t>(width * height, 0)};
    for (std::size_t y = y0; y < std::min(height, y0 + h); ++y)
        for (std::size_t x = x0; x < std::min(width, x0 + w); ++x) m.data[y * width + x] = 1;
    return m;
}

SubjectScene render_scene(const SubjectMask& truth, Rgb8 fg, Rgb8 bg, double sigma, std::uint64_t seed) {
    SubjectScene scene{RgbImage(truth.width, truth.height), truth};
    Rng rng(seed);
    for (std::size_t i = 0; i < truth.data.size(); ++i) {
        const Rgb8& base = truth.data[i] ? fg : bg;
        for (int c = 0; c < 3; ++c) {
            const double v = std::round(static_cast<double>(base[c]) + sigma * rng.normal());
            scene.image.data[3 * i + c] = static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
        }
    }
    return scene;
}

}  // namespace attnmask
