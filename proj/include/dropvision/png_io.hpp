#pragma once

#include <cstdio>
#include <filesystem>
#include <memory>
#include <string>

#include <png.h>

#include "dropvision/error.hpp"
#include "dropvision/image.hpp"

namespace dropvision {

namespace detail {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

} // namespace detail

// Reads an 8-bit grayscale or RGB PNG. Palette images are expanded, 16-bit
// depth is stripped to 8, alpha is dropped.
inline RasterImage read_png(const std::filesystem::path& path) {
    detail::FilePtr f(std::fopen(path.string().c_str(), "rb"));
    require(f != nullptr, "read_png: cannot open " + path.string());

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    require(png != nullptr, "read_png: libpng init failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw Error("read_png: libpng info init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw Error("read_png: failed to decode " + path.string());
    }

    png_init_io(png, f.get());
    png_read_info(png, info);

    const png_byte color_type = png_get_color_type(png, info);
    const png_byte bit_depth = png_get_bit_depth(png, info);

    if (bit_depth == 16) png_set_strip_16(png);
    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    png_read_update_info(png, info);

    const int h = static_cast<int>(png_get_image_height(png, info));
    const int w = static_cast<int>(png_get_image_width(png, info));
    const int ch = static_cast<int>(png_get_channels(png, info));
    if (ch != 1 && ch != 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw Error("read_png: unsupported channel count in " + path.string());
    }

    RasterImage img = RasterImage::make(h, w, ch);
    std::vector<png_bytep> rows(h);
    for (int y = 0; y < h; ++y)
        rows[y] = img.pixels.data() + static_cast<std::size_t>(y) * w * ch;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

inline void write_png(const std::filesystem::path& path, const RasterImage& img) {
    detail::FilePtr f(std::fopen(path.string().c_str(), "wb"));
    require(f != nullptr, "write_png: cannot open " + path.string());

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    require(png != nullptr, "write_png: libpng init failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw Error("write_png: libpng info init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw Error("write_png: failed to encode " + path.string());
    }

    png_init_io(png, f.get());
    const int color = img.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB;
    png_set_IHDR(png, info, img.width, img.height, 8, color, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);

    std::vector<png_bytep> rows(img.height);
    for (int y = 0; y < img.height; ++y)
        rows[y] = const_cast<png_bytep>(img.pixels.data()) +
                  static_cast<std::size_t>(y) * img.width * img.channels;
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

// Mask files are 8-bit grayscale: 0 = background, 255 = drop. Anything >= 128
// counts as foreground when loading.
inline BinaryMask read_mask_png(const std::filesystem::path& path) {
    const RasterImage img = to_grayscale(read_png(path));
    BinaryMask mask = BinaryMask::make(img.height, img.width);
    for (std::size_t i = 0; i < mask.values.size(); ++i)
        mask.values[i] = img.pixels[i] >= 128 ? 1 : 0;
    return mask;
}

inline void write_mask_png(const std::filesystem::path& path, const BinaryMask& mask) {
    RasterImage img = RasterImage::make(mask.height, mask.width, 1);
    for (std::size_t i = 0; i < mask.values.size(); ++i)
        img.pixels[i] = mask.values[i] ? 255 : 0;
    write_png(path, img);
}

} // namespace dropvision
