#include "attnmask/image.hpp"

#include "attnmask/error.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>

namespace attnmask {

RgbImage::RgbImage(std::size_t w, std::size_t h, Rgb8 fill) : width(w), height(h), data(w * h * 3) {
    for (std::size_t i = 0; i < w * h; ++i) set(i, fill);
}

std::size_t SubjectMask::count() const {
    return static_cast<std::size_t>(std::count(data.begin(), data.end(), std::uint8_t{1}));
}

namespace {

std::string extension(const std::filesystem::path& path) {
    std::string ext = path.extension().string();
    for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return ext;
}

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
    FilePtr f(std::fopen(path.string().c_str(), mode));
    if (!f) throw IoError(std::string("cannot open ") + path.string());
    return f;
}

// Decoded PNG with no colour management: samples are what the file stores.
struct RawPng {
    std::size_t width = 0;
    std::size_t height = 0;
    int channels = 0;
    int depth = 8;  // 8 or 16
    std::vector<std::uint8_t> bytes;

    unsigned sample(std::size_t index, int channel) const {
        const std::size_t i = index * static_cast<std::size_t>(channels) + static_cast<std::size_t>(channel);
        if (depth == 16) return (unsigned{bytes[2 * i]} << 8) | bytes[2 * i + 1];
        return bytes[i];
    }
};

void png_error_fn(png_structp png, png_const_charp msg) {
    auto* what = static_cast<std::string*>(png_get_error_ptr(png));
    if (what) *what = msg;
    png_longjmp(png, 1);
}

void png_warning_fn(png_structp, png_const_charp) {}

RawPng read_png(const std::filesystem::path& path, bool keep16) {
    FilePtr f = open_file(path, "rb");
    unsigned char sig[8];
    if (std::fread(sig, 1, 8, f.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0)
        throw IoError(path.string() + " is not a PNG file");

    std::string what;
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &what, png_error_fn, png_warning_fn);
    if (!png) throw IoError("libpng read init failed");
    png_infop info = png_create_info_struct(png);
    RawPng out;
    std::vector<png_bytep> rows;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("PNG decode failed for " + path.string() + ": " + what);
    }
    png_init_io(png, f.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);

    const int color = png_get_color_type(png, info);
    const int bit_depth = png_get_bit_depth(png, info);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (bit_depth == 16 && !keep16) png_set_strip_16(png);
    png_set_interlace_handling(png);
    png_read_update_info(png, info);

    out.width = png_get_image_width(png, info);
    out.height = png_get_image_height(png, info);
    out.channels = png_get_channels(png, info);
    out.depth = png_get_bit_depth(png, info);
    const std::size_t rowbytes = png_get_rowbytes(png, info);
    out.bytes.resize(rowbytes * out.height);
    rows.resize(out.height);
    for (std::size_t y = 0; y < out.height; ++y) rows[y] = out.bytes.data() + y * rowbytes;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return out;
}

// `rows` holds tightly packed samples at the given bit depth (1-bit packed MSB first).
void write_png(const std::filesystem::path& path, std::size_t width, std::size_t height, int color_type,
               int bit_depth, const std::vector<std::uint8_t>& packed) {
    FilePtr f = open_file(path, "wb");
    std::string what;
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &what, png_error_fn, png_warning_fn);
    if (!png) throw IoError("libpng write init failed");
    png_infop info = png_create_info_struct(png);
    std::vector<png_bytep> rows(height);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("PNG encode failed for " + path.string() + ": " + what);
    }
    png_init_io(png, f.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), bit_depth, color_type,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    const std::size_t rowbytes = height ? packed.size() / height : 0;
    for (std::size_t y = 0; y < height; ++y) rows[y] = const_cast<png_bytep>(packed.data() + y * rowbytes);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    if (std::fflush(f.get()) != 0) throw IoError("failed writing " + path.string());
}

// ---- netpbm

void skip_ws_and_comments(std::istream& in) {
    for (;;) {
        int c = in.peek();
        if (c == '#') {
            std::string line;
            std::getline(in, line);
        } else if (std::isspace(c)) {
            in.get();
        } else {
            return;
        }
    }
}

struct Netpbm {
    std::size_t width = 0, height = 0;
    int channels = 0;
    std::vector<std::uint8_t> data;
};

Netpbm read_netpbm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::string magic;
    in >> magic;
    if (magic != "P5" && magic != "P6") throw IoError(path.string() + ": only binary PGM (P5) / PPM (P6) supported");
    Netpbm img;
    img.channels = magic == "P5" ? 1 : 3;
    unsigned long w = 0, h = 0, maxval = 0;
    skip_ws_and_comments(in);
    in >> w;
    skip_ws_and_comments(in);
    in >> h;
    skip_ws_and_comments(in);
    in >> maxval;
    if (!in || w == 0 || h == 0) throw IoError(path.string() + ": malformed netpbm header");
    if (maxval != 255) throw IoError(path.string() + ": only maxval 255 supported");
    in.get();
    img.width = w;
    img.height = h;
    img.data.resize(w * h * static_cast<std::size_t>(img.channels));
    in.read(reinterpret_cast<char*>(img.data.data()), static_cast<std::streamsize>(img.data.size()));
    if (static_cast<std::size_t>(in.gcount()) != img.data.size()) throw IoError(path.string() + ": truncated pixels");
    return img;
}

void write_netpbm(const std::filesystem::path& path, std::size_t w, std::size_t h, int channels,
                  const std::vector<std::uint8_t>& data) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << (channels == 1 ? "P5" : "P6") << '\n' << w << ' ' << h << "\n255\n";
    out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
    if (!out) throw IoError("failed writing " + path.string());
}

bool is_netpbm(const std::filesystem::path& path) {
    const auto ext = extension(path);
    return ext == ".pgm" || ext == ".ppm" || ext == ".pnm";
}

}  // namespace

RgbImage read_rgb(const std::filesystem::path& path) {
    RgbImage img;
    if (is_netpbm(path)) {
        auto pnm = read_netpbm(path);
        img.width = pnm.width;
        img.height = pnm.height;
        img.data.resize(img.pixels() * 3);
        for (std::size_t i = 0; i < img.pixels(); ++i)
            for (int c = 0; c < 3; ++c)
                img.data[3 * i + c] = pnm.channels == 1 ? pnm.data[i] : pnm.data[3 * i + c];
        return img;
    }
    auto raw = read_png(path, false);
    img.width = raw.width;
    img.height = raw.height;
    img.data.resize(img.pixels() * 3);
    for (std::size_t i = 0; i < img.pixels(); ++i) {
        for (int c = 0; c < 3; ++c) {
            const int src = raw.channels >= 3 ? c : 0;
            img.data[3 * i + c] = static_cast<std::uint8_t>(raw.sample(i, src));
        }
    }
    return img;
}

void write_rgb(const std::filesystem::path& path, const RgbImage& image) {
    if (image.data.size() != image.pixels() * 3) throw ShapeError("RGB buffer size mismatch");
    if (is_netpbm(path)) return write_netpbm(path, image.width, image.height, 3, image.data);
    write_png(path, image.width, image.height, PNG_COLOR_TYPE_RGB, 8, image.data);
}

void write_rgba_png(const std::filesystem::path& path, const RgbaImage& image) {
    if (image.data.size() != image.pixels() * 4) throw ShapeError("RGBA buffer size mismatch");
    write_png(path, image.width, image.height, PNG_COLOR_TYPE_RGBA, 8, image.data);
}

RgbaImage read_rgba_png(const std::filesystem::path& path) {
    auto raw = read_png(path, false);
    RgbaImage img{raw.width, raw.height, std::vector<std::uint8_t>(raw.width * raw.height * 4)};
    for (std::size_t i = 0; i < img.pixels(); ++i) {
        for (int c = 0; c < 3; ++c)
            img.data[4 * i + c] = static_cast<std::uint8_t>(raw.sample(i, raw.channels >= 3 ? c : 0));
        const bool has_alpha = raw.channels == 2 || raw.channels == 4;
        img.data[4 * i + 3] = has_alpha ? static_cast<std::uint8_t>(raw.sample(i, raw.channels - 1)) : 255;
    }
    return img;
}

GrayImage read_gray(const std::filesystem::path& path) {
    GrayImage img;
    if (is_netpbm(path)) {
        auto pnm = read_netpbm(path);
        if (pnm.channels != 1) throw IoError(path.string() + ": expected a grayscale PGM");
        return GrayImage{pnm.width, pnm.height, std::move(pnm.data)};
    }
    auto raw = read_png(path, false);
    if (raw.channels > 2) throw IoError(path.string() + ": expected a grayscale PNG");
    img.width = raw.width;
    img.height = raw.height;
    img.data.resize(raw.width * raw.height);
    for (std::size_t i = 0; i < img.data.size(); ++i) img.data[i] = static_cast<std::uint8_t>(raw.sample(i, 0));
    return img;
}

void write_gray(const std::filesystem::path& path, const GrayImage& image) {
    if (image.data.size() != image.width * image.height) throw ShapeError("gray buffer size mismatch");
    if (is_netpbm(path)) return write_netpbm(path, image.width, image.height, 1, image.data);
    write_png(path, image.width, image.height, PNG_COLOR_TYPE_GRAY, 8, image.data);
}

void write_map16_png(const std::filesystem::path& path, const ScalarImage& map) {
    if (map.data.size() != map.width * map.height) throw ShapeError("map buffer size mismatch");
    std::vector<std::uint8_t> packed(map.data.size() * 2);
    for (std::size_t i = 0; i < map.data.size(); ++i) {
        const double v = std::clamp(map.data[i], 0.0, 1.0);
        const auto q = static_cast<std::uint16_t>(std::lround(v * 65535.0));
        packed[2 * i] = static_cast<std::uint8_t>(q >> 8);
        packed[2 * i + 1] = static_cast<std::uint8_t>(q & 0xFF);
    }
    write_png(path, map.width, map.height, PNG_COLOR_TYPE_GRAY, 16, packed);
}

ScalarImage read_map16_png(const std::filesystem::path& path) {
    auto raw = read_png(path, true);
    if (raw.channels > 2) throw IoError(path.string() + ": expected a grayscale map");
    ScalarImage map{raw.width, raw.height, std::vector<double>(raw.width * raw.height)};
    const double scale = raw.depth == 16 ? 65535.0 : 255.0;
    for (std::size_t i = 0; i < map.data.size(); ++i) map.data[i] = raw.sample(i, 0) / scale;
    return map;
}

void write_mask(const std::filesystem::path& path, const SubjectMask& mask) {
    if (mask.data.size() != mask.width * mask.height) throw ShapeError("mask buffer size mismatch");
    if (is_netpbm(path)) {
        std::vector<std::uint8_t> gray(mask.data.size());
        for (std::size_t i = 0; i < gray.size(); ++i) gray[i] = mask.data[i] ? 255 : 0;
        return write_netpbm(path, mask.width, mask.height, 1, gray);
    }
    const std::size_t rowbytes = (mask.width + 7) / 8;
    std::vector<std::uint8_t> packed(rowbytes * mask.height, 0);
    for (std::size_t y = 0; y < mask.height; ++y)
        for (std::size_t x = 0; x < mask.width; ++x)
            if (mask.data[y * mask.width + x])
                packed[y * rowbytes + x / 8] |= static_cast<std::uint8_t>(0x80u >> (x % 8));
    write_png(path, mask.width, mask.height, PNG_COLOR_TYPE_GRAY, 1, packed);
}

SubjectMask read_mask(const std::filesystem::path& path) {
    auto gray = read_gray(path);
    SubjectMask mask{gray.width, gray.height, std::vector<std::uint8_t>(gray.data.size())};
    for (std::size_t i = 0; i < gray.data.size(); ++i) mask.data[i] = gray.data[i] >= 128 ? 1 : 0;
    return mask;
}

}  // namespace attnmask
