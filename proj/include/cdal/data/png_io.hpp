#pragma once

#include <png.h>

#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "cdal/core/errors.hpp"

namespace cdal::data {

using cdal::IoError;

// 8-bit raster, interleaved channels. For palette PNGs read with
// keep_palette_indices the pixel values are the raw palette indices, which is
// how multi-class masks encode their class ids.
struct PngImage {
    int width = 0;
    int height = 0;
    int channels = 1;
    bool from_palette = false;
    std::vector<uint8_t> pixels;

    uint8_t at(int y, int x, int c = 0) const {
        return pixels[static_cast<size_t>((static_cast<int64_t>(y) * width + x) * channels + c)];
    }
};

namespace detail {
struct FileCloser {
    std::FILE* fp = nullptr;
    ~FileCloser() {
        if (fp) std::fclose(fp);
    }
};
}  // namespace detail

inline PngImage read_png(const std::string& path, bool keep_palette_indices = false) {
    detail::FileCloser file{std::fopen(path.c_str(), "rb")};
    if (!file.fp) throw IoError("png: cannot open " + path);

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IoError("png: out of memory");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw IoError("png: out of memory");
    }

    PngImage img;
    std::vector<png_bytep> rows;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("png: failed to decode " + path);
    }

    png_init_io(png, file.fp);
    png_read_info(png, info);
    const png_byte color = png_get_color_type(png, info);
    const png_byte depth = png_get_bit_depth(png, info);
    img.from_palette = color == PNG_COLOR_TYPE_PALETTE;

    if (img.from_palette && keep_palette_indices) {
        if (depth < 8) png_set_packing(png);  // one index per byte
    } else {
        if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
        if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
        if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
        if (depth == 16) png_set_strip_16(png);
        png_set_strip_alpha(png);
    }
    png_read_update_info(png, info);

    img.width = static_cast<int>(png_get_image_width(png, info));
    img.height = static_cast<int>(png_get_image_height(png, info));
    img.channels = static_cast<int>(png_get_channels(png, info));
    img.pixels.resize(static_cast<size_t>(img.width) * img.height * img.channels);
    rows.resize(static_cast<size_t>(img.height));
    for (int y = 0; y < img.height; ++y)
        rows[static_cast<size_t>(y)] =
            img.pixels.data() + static_cast<size_t>(y) * img.width * img.channels;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

inline void write_png_gray(const std::string& path, const uint8_t* data, int width, int height) {
    detail::FileCloser file{std::fopen(path.c_str(), "wb")};
    if (!file.fp) throw IoError("png: cannot open for write " + path);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IoError("png: out of memory");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw IoError("png: out of memory");
    }
    std::vector<png_bytep> rows(static_cast<size_t>(height));
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("png: failed to encode " + path);
    }
    png_init_io(png, file.fp);
    png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8,
                 PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    for (int y = 0; y < height; ++y)
        rows[static_cast<size_t>(y)] = const_cast<png_bytep>(data + static_cast<size_t>(y) * width);
    png_set_rows(png, info, rows.data());
    png_write_png(png, info, PNG_TRANSFORM_IDENTITY, nullptr);
    png_destroy_write_struct(&png, &info);
}

// 16-bit grayscale, used for probability maps. Host-order samples are
// byte-swapped on write as PNG stores 16-bit data big-endian.
inline void write_png_gray16(const std::string& path, const uint16_t* data, int width, int height) {
    detail::FileCloser file{std::fopen(path.c_str(), "wb")};
    if (!file.fp) throw IoError("png: cannot open for write " + path);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IoError("png: out of memory");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw IoError("png: out of memory");
    }
    std::vector<png_bytep> rows(static_cast<size_t>(height));
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("png: failed to encode " + path);
    }
    png_init_io(png, file.fp);
    png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 16,
                 PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    for (int y = 0; y < height; ++y)
        rows[static_cast<size_t>(y)] = const_cast<png_bytep>(
            reinterpret_cast<const png_byte*>(data + static_cast<size_t>(y) * width));
    png_set_rows(png, info, rows.data());
    png_write_png(png, info, PNG_TRANSFORM_SWAP_ENDIAN, nullptr);
    png_destroy_write_struct(&png, &info);
}

// Indexed-color mask: pixel value = palette index = class id. The palette
// colors just make the file viewable; loaders read the indices back.
inline void write_png_palette(const std::string& path, const uint8_t* indices, int width,
                              int height, int num_classes) {
    if (num_classes < 1 || num_classes > 256) throw IoError("png: palette size out of range");
    detail::FileCloser file{std::fopen(path.c_str(), "wb")};
    if (!file.fp) throw IoError("png: cannot open for write " + path);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IoError("png: out of memory");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw IoError("png: out of memory");
    }
    std::vector<png_bytep> rows(static_cast<size_t>(height));
    std::vector<png_color> palette(static_cast<size_t>(num_classes));
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("png: failed to encode " + path);
    }
    // Distinct, roughly evenly spread colors; class 0 stays black.
    for (int c = 0; c < num_classes; ++c) {
        const int v = num_classes == 1 ? 0 : (255 * c) / (num_classes - 1);
        palette[static_cast<size_t>(c)] = {static_cast<png_byte>(v),
                                           static_cast<png_byte>(255 - v / 2),
                                           static_cast<png_byte>((c * 97) % 256)};
    }
    png_init_io(png, file.fp);
    png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8,
                 PNG_COLOR_TYPE_PALETTE, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_set_PLTE(png, info, palette.data(), num_classes);
    for (int y = 0; y < height; ++y)
        rows[static_cast<size_t>(y)] = const_cast<png_bytep>(indices + static_cast<size_t>(y) * width);
    png_set_rows(png, info, rows.data());
    png_write_png(png, info, PNG_TRANSFORM_IDENTITY, nullptr);
    png_destroy_write_struct(&png, &info);
}

}  // namespace cdal::data
