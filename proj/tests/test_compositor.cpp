#include "attnmask/compositor.hpp"
#include "attnmask/error.hpp"
#include "attnmask/random.hpp"
#include "test_support.hpp"

#include <doctest.h>

using namespace attnmask;

namespace {

RgbImage random_image(Rng& rng, std::size_t w, std::size_t h) {
    RgbImage img(w, h);
    for (auto& v : img.data) v = static_cast<std::uint8_t>(rng.below(256));
    return img;
}

SubjectMask random_mask(Rng& rng, std::size_t w, std::size_t h) {
    SubjectMask m{w, h, std::vector<std::uint8_t>(w * h)};
    for (auto& v : m.data) v = static_cast<std::uint8_t>(rng.below(2));
    return m;
}

}  // namespace

TEST_CASE("all-true and all-false masks") {
    Rng rng(1);
    const auto img = random_image(rng, 7, 5);
    const auto opaque = compose(img, SubjectMask{7, 5, std::vector<std::uint8_t>(35, 1)});
    for (std::size_t i = 0; i < 35; ++i) {
        CHECK(opaque.alpha(i) == 255);
        for (int c = 0; c < 3; ++c) CHECK(opaque.data[4 * i + c] == img.data[3 * i + c]);
    }
    CHECK(flatten(opaque, Background::solid({1, 2, 3})) == img);

    const auto clear = compose(img, SubjectMask{7, 5, std::vector<std::uint8_t>(35, 0)});
    CHECK(clear.data == std::vector<std::uint8_t>(4 * 35, 0));
    CHECK(flatten(clear, Background::solid({255, 255, 255})) == RgbImage(7, 5, {255, 255, 255}));
}

TEST_CASE("checkerboard mask on solid red") {
    const RgbImage red(6, 4, {255, 0, 0});
    SubjectMask m{6, 4, std::vector<std::uint8_t>(24)};
    for (std::size_t y = 0; y < 4; ++y)
        for (std::size_t x = 0; x < 6; ++x) m.data[y * 6 + x] = (x + y) % 2 == 0;
    const auto rgba = compose(red, m);
    const auto over = flatten(rgba, Background::solid({255, 255, 255}));
    for (std::size_t i = 0; i < 24; ++i) {
        const Rgb8 want = m.data[i] ? Rgb8{255, 0, 0} : Rgb8{255, 255, 255};
        CHECK(over.at(i) == want);
        CHECK(rgba.alpha(i) == (m.data[i] ? 255 : 0));
    }
}

TEST_CASE("checkerboard background cells") {
    const auto bg = Background::checkerboard(2, {9, 9, 9}, {7, 7, 7});
    CHECK(bg.at(0, 0) == Rgb8{9, 9, 9});
    CHECK(bg.at(1, 1) == Rgb8{9, 9, 9});
    CHECK(bg.at(2, 0) == Rgb8{7, 7, 7});
    CHECK(bg.at(2, 2) == Rgb8{9, 9, 9});
}

TEST_CASE("compose then flatten keeps subject pixels bit-exact") {
    Rng rng(2);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t w = 1 + rng.below(40), h = 1 + rng.below(40);
        const auto img = random_image(rng, w, h);
        const auto m = random_mask(rng, w, h);
        const auto rgba = compose(img, m);
        std::size_t hist[256] = {};
        for (std::size_t i = 0; i < rgba.pixels(); ++i) ++hist[rgba.alpha(i)];
        CHECK(hist[0] + hist[255] == w * h);
        const Background bgs[] = {Background::solid({0, 0, 0}),
                                  Background::solid({static_cast<std::uint8_t>(trial), 17, 99}),
                                  Background::checkerboard(1 + rng.below(9))};
        for (const auto& bg : bgs) {
            const auto flat = flatten(rgba, bg);
            for (std::size_t i = 0; i < w * h; ++i) {
                if (m.data[i])
                    REQUIRE(flat.at(i) == img.at(i));
                else
                    REQUIRE(flat.at(i) == bg.at(i % w, i / w));
            }
        }
    }
}

TEST_CASE("dimension mismatch") {
    CHECK_THROWS_AS(compose(RgbImage(4, 4), SubjectMask{4, 3, std::vector<std::uint8_t>(12)}), ShapeError);
}

TEST_CASE("RGBA PNG roundtrip keeps binary alpha") {
    testing::TempDir dir;
    Rng rng(3);
    const auto rgba = compose(random_image(rng, 13, 9), random_mask(rng, 13, 9));
    write_rgba_png(dir / "out.png", rgba);
    CHECK(read_rgba_png(dir / "out.png") == rgba);
}
