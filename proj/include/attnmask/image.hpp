#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace attnmask {

using Rgb8 = std::array<std::uint8_t, 3>;

struct RgbImage {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<std::uint8_t> data;  // interleaved RGB, row-major

    RgbImage() = default;
    RgbImage(std::size_t w, std::size_t h, Rgb8 fill = {0, 0, 0});

    std::size_t pixels() const { return width * height; }
    Rgb8 at(std::size_t index) const { return {data[3 * index], data[3 * index + 1], data[3 * index + 2]}; }
    void set(std::size_t index, Rgb8 c) {
        data[3 * index] = c[0];
        data[3 * index + 1] = c[1];
        data[3 * index + 2] = c[2];
    }
    bool operator==(const RgbImage&) const = default;
};

struct RgbaImage {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<std::uint8_t> data;  // interleaved RGBA, row-major

    std::size_t pixels() const { return width * height; }
    std::uint8_t alpha(std::size_t index) const { return data[4 * index + 3]; }
    bool operator==(const RgbaImage&) const = default;
};

struct GrayImage {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<std::uint8_t> data;

    bool operator==(const GrayImage&) const = default;
};

/// Dense real-valued map, row-major.
struct ScalarImage {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<double> data;

    double at(std::size_t x, std::size_t y) const { return data[y * width + x]; }
};

/// Binary subject mask; true = subject.
struct SubjectMask {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<std::uint8_t> data;  // 0 or 1

    std::size_t count() const;
    bool operator==(const SubjectMask&) const = default;
};

// PNG via libpng; PGM (P5) / PPM (P6) by extension.
RgbImage read_rgb(const std::filesystem::path& path);
void write_rgb(const std::filesystem::path& path, const RgbImage& image);
void write_rgba_png(const std::filesystem::path& path, const RgbaImage& image);
RgbaImage read_rgba_png(const std::filesystem::path& path);

GrayImage read_gray(const std::filesystem::path& path);
void write_gray(const std::filesystem::path& path, const GrayImage& image);

/// 16-bit grayscale PNG holding a [0,1] map (quantized to 1/65535).
void write_map16_png(const std::filesystem::path& path, const ScalarImage& map);
ScalarImage read_map16_png(const std::filesystem::path& path);

/// .pgm writes {0,255}; .png writes a 1-bit grayscale PNG.
void write_mask(const std::filesystem::path& path, const SubjectMask& mask);
/// Any gray image; values >= 128 are subject.
SubjectMask read_mask(const std::filesystem::path& path);

}  // namespace attnmask
