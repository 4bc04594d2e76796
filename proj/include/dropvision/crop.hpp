#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "dropvision/error.hpp"
#include "dropvision/image.hpp"

namespace dropvision {

// Half-open pixel box: rows [top, bottom), columns [left, right).
struct CropRegion {
    int top = 0, left = 0, bottom = 0, right = 0;

    int height() const { return bottom - top; }
    int width() const { return right - left; }
    bool operator==(const CropRegion&) const = default;
};

// Keeps only the largest 4-connected foreground component; empty in, empty out.
inline BinaryMask largest_component(const BinaryMask& mask) {
    const int h = mask.height, w = mask.width;
    std::vector<int> comp(static_cast<std::size_t>(h) * w, -1);
    int best_id = -1;
    std::size_t best_size = 0;
    int next_id = 0;
    std::vector<std::size_t> stack;
    for (std::size_t start = 0; start < mask.values.size(); ++start) {
        if (!mask.values[start] || comp[start] != -1) continue;
        std::size_t size = 0;
        stack.push_back(start);
        comp[start] = next_id;
        while (!stack.empty()) {
            const std::size_t at = stack.back();
            stack.pop_back();
            ++size;
            const int y = static_cast<int>(at) / w, x = static_cast<int>(at) % w;
            const int ny[4] = {y - 1, y + 1, y, y};
            const int nx[4] = {x, x, x - 1, x + 1};
            for (int k = 0; k < 4; ++k) {
                if (ny[k] < 0 || ny[k] >= h || nx[k] < 0 || nx[k] >= w) continue;
                const std::size_t nat = static_cast<std::size_t>(ny[k]) * w + nx[k];
                if (mask.values[nat] && comp[nat] == -1) {
                    comp[nat] = next_id;
                    stack.push_back(nat);
                }
            }
        }
        if (size > best_size) {
            best_size = size;
            best_id = next_id;
        }
        ++next_id;
    }
    BinaryMask out = BinaryMask::make(h, w, 0);
    if (best_id >= 0)
        for (std::size_t i = 0; i < out.values.size(); ++i)
            out.values[i] = comp[i] == best_id ? 1 : 0;
    return out;
}

// Tight foreground bounding box grown by margin_fraction of the box extent on
// each side (rounded to pixels), clamped to the image.
inline CropRegion mask_to_bbox(const BinaryMask& mask, double margin_fraction = 0.05) {
    require(margin_fraction >= 0.0, "mask_to_bbox: margin_fraction must be >= 0");
    int top = mask.height, bottom = -1, left = mask.width, right = -1;
    for (int y = 0; y < mask.height; ++y)
        for (int x = 0; x < mask.width; ++x)
            if (mask.values[static_cast<std::size_t>(y) * mask.width + x]) {
                top = std::min(top, y);
                bottom = std::max(bottom, y);
                left = std::min(left, x);
                right = std::max(right, x);
            }
    require(bottom >= 0, "mask_to_bbox: mask has no foreground pixels");
    CropRegion box{top, left, bottom + 1, right + 1};
    const int my = static_cast<int>(std::lround(margin_fraction * box.height()));
    const int mx = static_cast<int>(std::lround(margin_fraction * box.width()));
    box.top = std::max(0, box.top - my);
    box.bottom = std::min(mask.height, box.bottom + my);
    box.left = std::max(0, box.left - mx);
    box.right = std::min(mask.width, box.right + mx);
    return box;
}

namespace detail {

inline RasterImage crop_image(const RasterImage& img, const CropRegion& box) {
    RasterImage out = RasterImage::make(box.height(), box.width(), img.channels, 0);
    for (int y = 0; y < out.height; ++y)
        for (int x = 0; x < out.width; ++x)
            for (int c = 0; c < img.channels; ++c)
                out.at(y, x, c) = img.at(box.top + y, box.left + x, c);
    return out;
}

inline BinaryMask crop_mask(const BinaryMask& mask, const CropRegion& box) {
    BinaryMask out = BinaryMask::make(box.height(), box.width(), 0);
    for (int y = 0; y < out.height; ++y)
        for (int x = 0; x < out.width; ++x)
            out.values[static_cast<std::size_t>(y) * out.width + x] =
                mask.values[static_cast<std::size_t>(box.top + y) * mask.width + box.left + x];
    return out;
}

} // namespace detail

// Masks the image to the drop, crops to the (margin-expanded) bounding box of
// the largest component, and resizes square. Near-empty masks fall back to
// the whole resized image so a failed finder degrades to the full-image
// pipeline instead of producing a blank crop.
inline RasterImage extract_drop(const RasterImage& image, const BinaryMask& mask, int out_size,
                                double margin_fraction = 0.05) {
    require(image.height == mask.height && image.width == mask.width,
            "extract_drop: image and mask dimensions differ");
    require(out_size >= 1, "extract_drop: out_size must be >= 1");
    const double fg_fraction =
        static_cast<double>(mask.foreground_count()) / static_cast<double>(mask.values.size());
    if (fg_fraction < 0.001) return resize_image(image, out_size, out_size);

    const BinaryMask lc = largest_component(mask);
    const CropRegion box = mask_to_bbox(lc, margin_fraction);

    RasterImage masked = image;
    for (int y = 0; y < image.height; ++y)
        for (int x = 0; x < image.width; ++x)
            if (!lc.values[static_cast<std::size_t>(y) * image.width + x])
                for (int c = 0; c < image.channels; ++c) masked.at(y, x, c) = 0;

    RasterImage cropped = detail::crop_image(masked, box);
    BinaryMask cropped_mask = detail::crop_mask(lc, box);
    RasterImage out = resize_image(cropped, out_size, out_size);
    // Bilinear resampling bleeds interior intensity across the mask edge;
    // re-apply the resized mask so the outside stays exactly zero.
    BinaryMask out_mask = resize_mask(cropped_mask, out_size, out_size);
    for (int y = 0; y < out_size; ++y)
        for (int x = 0; x < out_size; ++x)
            if (!out_mask.values[static_cast<std::size_t>(y) * out_size + x])
                for (int c = 0; c < out.channels; ++c) out.at(y, x, c) = 0;
    return out;
}

} // namespace dropvision
