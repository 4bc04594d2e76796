#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "dropvision/crop.hpp"
#include "dropvision/error.hpp"
#include "dropvision/image.hpp"

namespace dropvision {
namespace detail {

// Separable Gaussian blur on a float plane, reflected borders.
inline std::vector<float> gaussian_blur(const std::vector<float>& src, int h, int w,
                                        double sigma) {
    const int radius = std::max(1, static_cast<int>(std::lround(3.0 * sigma)));
    std::vector<double> kernel(2 * radius + 1);
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        kernel[i + radius] = std::exp(-0.5 * (i * i) / (sigma * sigma));
        sum += kernel[i + radius];
    }
    for (double& k : kernel) k /= sum;

    auto reflect = [](int i, int n) {
        if (i < 0) return -i;
        if (i >= n) return 2 * n - 2 - i;
        return i;
    };
    std::vector<float> tmp(src.size()), out(src.size());
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int i = -radius; i <= radius; ++i)
                acc += kernel[i + radius] * src[static_cast<std::size_t>(y) * w + reflect(x + i, w)];
            tmp[static_cast<std::size_t>(y) * w + x] = static_cast<float>(acc);
        }
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int i = -radius; i <= radius; ++i)
                acc += kernel[i + radius] * tmp[static_cast<std::size_t>(reflect(y + i, h)) * w + x];
            out[static_cast<std::size_t>(y) * w + x] = static_cast<float>(acc);
        }
    return out;
}

inline BinaryMask dilate(const BinaryMask& m, int radius) {
    BinaryMask out = BinaryMask::make(m.height, m.width, 0);
    for (int y = 0; y < m.height; ++y)
        for (int x = 0; x < m.width; ++x) {
            std::uint8_t v = 0;
            for (int dy = -radius; dy <= radius && !v; ++dy)
                for (int dx = -radius; dx <= radius && !v; ++dx) {
                    const int ny = y + dy, nx = x + dx;
                    if (ny >= 0 && ny < m.height && nx >= 0 && nx < m.width &&
                        m.values[static_cast<std::size_t>(ny) * m.width + nx])
                        v = 1;
                }
            out.values[static_cast<std::size_t>(y) * m.width + x] = v;
        }
    return out;
}

inline BinaryMask erode(const BinaryMask& m, int radius) {
    BinaryMask out = BinaryMask::make(m.height, m.width, 0);
    for (int y = 0; y < m.height; ++y)
        for (int x = 0; x < m.width; ++x) {
            std::uint8_t v = 1;
            for (int dy = -radius; dy <= radius && v; ++dy)
                for (int dx = -radius; dx <= radius && v; ++dx) {
                    const int ny = y + dy, nx = x + dx;
                    if (ny < 0 || ny >= m.height || nx < 0 || nx >= m.width ||
                        !m.values[static_cast<std::size_t>(ny) * m.width + nx])
                        v = 0;
                }
            out.values[static_cast<std::size_t>(y) * m.width + x] = v;
        }
    return out;
}

// Fills zero regions not reachable from the border (interior holes).
inline BinaryMask fill_holes(const BinaryMask& m) {
    const int h = m.height, w = m.width;
    std::vector<std::uint8_t> outside(static_cast<std::size_t>(h) * w, 0);
    std::vector<std::size_t> stack;
    auto push = [&](int y, int x) {
        const std::size_t at = static_cast<std::size_t>(y) * w + x;
        if (!m.values[at] && !outside[at]) {
            outside[at] = 1;
            stack.push_back(at);
        }
    };
    for (int x = 0; x < w; ++x) {
        push(0, x);
        push(h - 1, x);
    }
    for (int y = 0; y < h; ++y) {
        push(y, 0);
        push(y, w - 1);
    }
    while (!stack.empty()) {
        const std::size_t at = stack.back();
        stack.pop_back();
        const int y = static_cast<int>(at) / w, x = static_cast<int>(at) % w;
        if (y > 0) push(y - 1, x);
        if (y + 1 < h) push(y + 1, x);
        if (x > 0) push(y, x - 1);
        if (x + 1 < w) push(y, x + 1);
    }
    BinaryMask out = m;
    for (std::size_t i = 0; i < out.values.size(); ++i)
        if (!out.values[i] && !outside[i]) out.values[i] = 1;
    return out;
}

} // namespace detail

// Classical edge-based drop estimate: blur, Sobel gradients, non-maximum
// suppression, double-threshold hysteresis, then closing + hole fill and the
// largest filled region as the drop.
inline BinaryMask canny_baseline_mask(const RasterImage& image, double low_threshold,
                                      double high_threshold) {
    require(low_threshold >= 0.0 && high_threshold <= 255.0 && low_threshold < high_threshold,
            "canny_baseline_mask: thresholds must satisfy 0 <= low < high <= 255");
    const RasterImage gray = image.channels == 1 ? image : to_grayscale(image);
    const int h = gray.height, w = gray.width;

    std::vector<float> plane(static_cast<std::size_t>(h) * w);
    for (std::size_t i = 0; i < plane.size(); ++i) plane[i] = gray.pixels[i];
    plane = detail::gaussian_blur(plane, h, w, 1.4);

    // Sobel gradients (border pixels keep zero gradient).
    std::vector<float> mag(plane.size(), 0.f);
    std::vector<std::uint8_t> dir(plane.size(), 0); // 0:E-W 1:NE-SW 2:N-S 3:NW-SE
    auto at = [&](int y, int x) { return plane[static_cast<std::size_t>(y) * w + x]; };
    for (int y = 1; y + 1 < h; ++y)
        for (int x = 1; x + 1 < w; ++x) {
            const double gx = -at(y - 1, x - 1) - 2 * at(y, x - 1) - at(y + 1, x - 1) +
                              at(y - 1, x + 1) + 2 * at(y, x + 1) + at(y + 1, x + 1);
            const double gy = -at(y - 1, x - 1) - 2 * at(y - 1, x) - at(y - 1, x + 1) +
                              at(y + 1, x - 1) + 2 * at(y + 1, x) + at(y + 1, x + 1);
            const std::size_t i = static_cast<std::size_t>(y) * w + x;
            mag[i] = static_cast<float>(std::hypot(gx, gy));
            double angle = std::atan2(gy, gx) * 180.0 / 3.14159265358979323846;
            if (angle < 0) angle += 180.0;
            if (angle < 22.5 || angle >= 157.5)
                dir[i] = 0;
            else if (angle < 67.5)
                dir[i] = 1;
            else if (angle < 112.5)
                dir[i] = 2;
            else
                dir[i] = 3;
        }

    // Non-maximum suppression along the gradient direction.
    std::vector<float> thin(plane.size(), 0.f);
    for (int y = 1; y + 1 < h; ++y)
        for (int x = 1; x + 1 < w; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * w + x;
            if (mag[i] == 0.f) continue;
            float a = 0.f, b = 0.f;
            switch (dir[i]) {
            case 0: a = mag[i - 1], b = mag[i + 1]; break;
            case 1: a = mag[i - w + 1], b = mag[i + w - 1]; break;
            case 2: a = mag[i - w], b = mag[i + w]; break;
            default: a = mag[i - w - 1], b = mag[i + w + 1]; break;
            }
            if (mag[i] >= a && mag[i] >= b) thin[i] = mag[i];
        }

    // Hysteresis: grow strong edges through weak ones (8-connected).
    BinaryMask edges = BinaryMask::make(h, w, 0);
    std::vector<std::size_t> stack;
    for (std::size_t i = 0; i < thin.size(); ++i)
        if (thin[i] >= high_threshold) {
            edges.values[i] = 1;
            stack.push_back(i);
        }
    while (!stack.empty()) {
        const std::size_t i = stack.back();
        stack.pop_back();
        const int y = static_cast<int>(i) / w, x = static_cast<int>(i) % w;
        for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
                const int ny = y + dy, nx = x + dx;
                if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
                const std::size_t ni = static_cast<std::size_t>(ny) * w + nx;
                if (!edges.values[ni] && thin[ni] >= low_threshold) {
                    edges.values[ni] = 1;
                    stack.push_back(ni);
                }
            }
    }

    // Dilation seals small contour gaps so the interior becomes a hole; fill
    // it while thick, then erode back so the region is not inflated. Radius 3
    // bridges the suppression gaps NMS leaves along shallow elliptical arcs.
    BinaryMask thick = detail::dilate(edges, 3);
    BinaryMask filled = detail::erode(detail::fill_holes(thick), 3);
    return largest_component(filled);
}

} // namespace dropvision
