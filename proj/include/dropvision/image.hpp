#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "dropvision/error.hpp"

namespace dropvision {

// 8-bit pixel grid, interleaved channels, row-major.
struct RasterImage {
    int height = 0;
    int width = 0;
    int channels = 0;
    std::vector<std::uint8_t> pixels;

    static RasterImage make(int h, int w, int c, std::uint8_t fill = 0) {
        require(h >= 1 && w >= 1, "RasterImage: height and width must be >= 1");
        require(c == 1 || c == 3, "RasterImage: channels must be 1 or 3");
        RasterImage img;
        img.height = h;
        img.width = w;
        img.channels = c;
        img.pixels.assign(static_cast<std::size_t>(h) * w * c, fill);
        return img;
    }

    std::uint8_t& at(int y, int x, int c = 0) {
        return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    std::uint8_t at(int y, int x, int c = 0) const {
        return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }

    bool same_shape(const RasterImage& o) const {
        return height == o.height && width == o.width && channels == o.channels;
    }
    bool operator==(const RasterImage& o) const {
        return same_shape(o) && pixels == o.pixels;
    }
};

// Per-pixel {0,1} grid. 1 marks the drop.
struct BinaryMask {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> values;

    static BinaryMask make(int h, int w, std::uint8_t fill = 0) {
        require(h >= 1 && w >= 1, "BinaryMask: height and width must be >= 1");
        require(fill == 0 || fill == 1, "BinaryMask: fill must be 0 or 1");
        BinaryMask m;
        m.height = h;
        m.width = w;
        m.values.assign(static_cast<std::size_t>(h) * w, fill);
        return m;
    }

    std::uint8_t& at(int y, int x) { return values[static_cast<std::size_t>(y) * width + x]; }
    std::uint8_t at(int y, int x) const { return values[static_cast<std::size_t>(y) * width + x]; }

    std::size_t foreground_count() const {
        std::size_t n = 0;
        for (const auto v : values) n += v;
        return n;
    }
    bool same_shape(const BinaryMask& o) const { return height == o.height && width == o.width; }
    bool operator==(const BinaryMask& o) const { return same_shape(o) && values == o.values; }
};

// Floating-point pixel grid, e.g. the per-pixel scores a segmentation model emits.
struct ScoreMap {
    int height = 0;
    int width = 0;
    int channels = 1;
    std::vector<float> values;

    static ScoreMap make(int h, int w, int c = 1, float fill = 0.f) {
        require(h >= 1 && w >= 1 && c >= 1, "ScoreMap: bad dimensions");
        ScoreMap s;
        s.height = h;
        s.width = w;
        s.channels = c;
        s.values.assign(static_cast<std::size_t>(h) * w * c, fill);
        return s;
    }
    float& at(int y, int x, int c = 0) {
        return values[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    float at(int y, int x, int c = 0) const {
        return values[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
};

inline std::uint8_t clamp_u8(double v) {
    return static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
}

// Bilinear resize with half-pixel centers, edge clamped.
inline RasterImage resize_image(const RasterImage& img, int out_h, int out_w) {
    require(out_h >= 1 && out_w >= 1, "resize_image: target size must be >= 1");
    if (out_h == img.height && out_w == img.width) return img;

    RasterImage out = RasterImage::make(out_h, out_w, img.channels);
    const double sy = static_cast<double>(img.height) / out_h;
    const double sx = static_cast<double>(img.width) / out_w;
    for (int y = 0; y < out_h; ++y) {
        const double fy = (y + 0.5) * sy - 0.5;
        const int y0 = static_cast<int>(std::floor(fy));
        const double wy = fy - y0;
        const int ya = std::clamp(y0, 0, img.height - 1);
        const int yb = std::clamp(y0 + 1, 0, img.height - 1);
        for (int x = 0; x < out_w; ++x) {
            const double fx = (x + 0.5) * sx - 0.5;
            const int x0 = static_cast<int>(std::floor(fx));
            const double wx = fx - x0;
            const int xa = std::clamp(x0, 0, img.width - 1);
            const int xb = std::clamp(x0 + 1, 0, img.width - 1);
            for (int c = 0; c < img.channels; ++c) {
                const double top = img.at(ya, xa, c) * (1.0 - wx) + img.at(ya, xb, c) * wx;
                const double bot = img.at(yb, xa, c) * (1.0 - wx) + img.at(yb, xb, c) * wx;
                out.at(y, x, c) = clamp_u8(std::lround(top * (1.0 - wy) + bot * wy));
            }
        }
    }
    return out;
}

// Nearest-neighbour resize; keeps values strictly binary.
inline BinaryMask resize_mask(const BinaryMask& mask, int out_h, int out_w) {
    require(out_h >= 1 && out_w >= 1, "resize_mask: target size must be >= 1");
    if (out_h == mask.height && out_w == mask.width) return mask;

    BinaryMask out = BinaryMask::make(out_h, out_w);
    const double sy = static_cast<double>(mask.height) / out_h;
    const double sx = static_cast<double>(mask.width) / out_w;
    for (int y = 0; y < out_h; ++y) {
        const int src_y = std::clamp(static_cast<int>((y + 0.5) * sy), 0, mask.height - 1);
        for (int x = 0; x < out_w; ++x) {
            const int src_x = std::clamp(static_cast<int>((x + 0.5) * sx), 0, mask.width - 1);
            out.at(y, x) = mask.at(src_y, src_x);
        }
    }
    return out;
}

// value 1 where score >= threshold
inline BinaryMask binarize_mask(const ScoreMap& scores, double threshold) {
    require(scores.channels == 1, "binarize_mask: input must be single-channel");
    require(threshold > 0.0 && threshold < 1.0, "binarize_mask: threshold must be in (0,1)");
    BinaryMask out = BinaryMask::make(scores.height, scores.width);
    for (std::size_t i = 0; i < scores.values.size(); ++i)
        out.values[i] = scores.values[i] >= threshold ? 1 : 0;
    return out;
}

inline RasterImage to_grayscale(const RasterImage& img) {
    if (img.channels == 1) return img;
    RasterImage out = RasterImage::make(img.height, img.width, 1);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            const double g = 0.299 * img.at(y, x, 0) + 0.587 * img.at(y, x, 1) +
                             0.114 * img.at(y, x, 2);
            out.at(y, x) = clamp_u8(std::lround(g));
        }
    return out;
}

inline RasterImage to_rgb(const RasterImage& img) {
    if (img.channels == 3) return img;
    RasterImage out = RasterImage::make(img.height, img.width, 3);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < 3; ++c) out.at(y, x, c) = img.at(y, x);
    return out;
}

} // namespace dropvision
