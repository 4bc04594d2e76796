#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "dropvision/error.hpp"
#include "dropvision/image.hpp"
#include "dropvision/png_io.hpp"

namespace dropvision {

using PlotColor = std::array<std::uint8_t, 3>;

struct PlotSeries {
    std::string label;
    std::vector<double> x, y;
    PlotColor color{0, 0, 0};
};

struct PlotSpec {
    std::string title, x_label, y_label;
    int width = 640;
    int height = 480;
    // When lo == hi the range is taken from the data.
    double x_lo = 0.0, x_hi = 0.0;
    double y_lo = 0.0, y_hi = 0.0;
};

namespace detail {

// 5x7 column-major glyphs for ASCII 32..90; bit k of a column byte is row k.
inline const std::uint8_t* glyph5x7(char ch) {
    static const std::uint8_t table[59][5] = {
        {0x00, 0x00, 0x00, 0x00, 0x00}, {0x00, 0x00, 0x5F, 0x00, 0x00},
        {0x00, 0x07, 0x00, 0x07, 0x00}, {0x14, 0x7F, 0x14, 0x7F, 0x14},
        {0x24, 0x2A, 0x7F, 0x2A, 0x12}, {0x23, 0x13, 0x08, 0x64, 0x62},
        {0x36, 0x49, 0x55, 0x22, 0x50}, {0x00, 0x05, 0x03, 0x00, 0x00},
        {0x00, 0x1C, 0x22, 0x41, 0x00}, {0x00, 0x41, 0x22, 0x1C, 0x00},
        {0x08, 0x2A, 0x1C, 0x2A, 0x08}, {0x08, 0x08, 0x3E, 0x08, 0x08},
        {0x00, 0x50, 0x30, 0x00, 0x00}, {0x08, 0x08, 0x08, 0x08, 0x08},
        {0x00, 0x60, 0x60, 0x00, 0x00}, {0x20, 0x10, 0x08, 0x04, 0x02},
        {0x3E, 0x51, 0x49, 0x45, 0x3E}, {0x00, 0x42, 0x7F, 0x40, 0x00},
        {0x42, 0x61, 0x51, 0x49, 0x46}, {0x21, 0x41, 0x45, 0x4B, 0x31},
        {0x18, 0x14, 0x12, 0x7F, 0x10}, {0x27, 0x45, 0x45, 0x45, 0x39},
        {0x3C, 0x4A, 0x49, 0x49, 0x30}, {0x01, 0x71, 0x09, 0x05, 0x03},
        {0x36, 0x49, 0x49, 0x49, 0x36}, {0x06, 0x49, 0x49, 0x29, 0x1E},
        {0x00, 0x36, 0x36, 0x00, 0x00}, {0x00, 0x56, 0x36, 0x00, 0x00},
        {0x00, 0x08, 0x14, 0x22, 0x41}, {0x14, 0x14, 0x14, 0x14, 0x14},
        {0x41, 0x22, 0x14, 0x08, 0x00}, {0x02, 0x01, 0x51, 0x09, 0x06},
        {0x32, 0x49, 0x79, 0x41, 0x3E}, {0x7E, 0x11, 0x11, 0x11, 0x7E},
        {0x7F, 0x49, 0x49, 0x49, 0x36}, {0x3E, 0x41, 0x41, 0x41, 0x22},
        {0x7F, 0x41, 0x41, 0x22, 0x1C}, {0x7F, 0x49, 0x49, 0x49, 0x41},
        {0x7F, 0x09, 0x09, 0x01, 0x01}, {0x3E, 0x41, 0x41, 0x51, 0x32},
        {0x7F, 0x08, 0x08, 0x08, 0x7F}, {0x00, 0x41, 0x7F, 0x41, 0x00},
        {0x20, 0x40, 0x41, 0x3F, 0x01}, {0x7F, 0x08, 0x14, 0x22, 0x41},
        {0x7F, 0x40, 0x40, 0x40, 0x40}, {0x7F, 0x02, 0x04, 0x02, 0x7F},
        {0x7F, 0x04, 0x08, 0x10, 0x7F}, {0x3E, 0x41, 0x41, 0x41, 0x3E},
        {0x7F, 0x09, 0x09, 0x09, 0x06}, {0x3E, 0x41, 0x51, 0x21, 0x5E},
        {0x7F, 0x09, 0x19, 0x29, 0x46}, {0x46, 0x49, 0x49, 0x49, 0x31},
        {0x01, 0x01, 0x7F, 0x01, 0x01}, {0x3F, 0x40, 0x40, 0x40, 0x3F},
        {0x1F, 0x20, 0x40, 0x20, 0x1F}, {0x7F, 0x20, 0x18, 0x20, 0x7F},
        {0x63, 0x14, 0x08, 0x14, 0x63}, {0x03, 0x04, 0x78, 0x04, 0x03},
        {0x61, 0x51, 0x49, 0x45, 0x43}};
    static const std::uint8_t underscore[5] = {0x40, 0x40, 0x40, 0x40, 0x40};
    if (ch == '_') return underscore;
    const int up = std::toupper(static_cast<unsigned char>(ch));
    if (up < 32 || up > 90) return table[0];
    return table[up - 32];
}

inline void put_pixel(RasterImage& img, int y, int x, const PlotColor& c) {
    if (y < 0 || y >= img.height || x < 0 || x >= img.width) return;
    for (int ch = 0; ch < 3; ++ch) img.at(y, x, ch) = c[ch];
}

} // namespace detail

inline void draw_text(RasterImage& img, int top, int left, const std::string& text,
                      const PlotColor& color) {
    int x = left;
    for (const char ch : text) {
        const std::uint8_t* glyph = detail::glyph5x7(ch);
        for (int col = 0; col < 5; ++col)
            for (int row = 0; row < 7; ++row)
                if (glyph[col] & (1u << row))
                    detail::put_pixel(img, top + row, x + col, color);
        x += 6;
    }
}

inline int text_width(const std::string& text) { return static_cast<int>(text.size()) * 6; }

inline void draw_line(RasterImage& img, int y0, int x0, int y1, int x1,
                      const PlotColor& color) {
    const int dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
    const int sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
    int err = dx + dy;
    while (true) {
        detail::put_pixel(img, y0, x0, color);
        if (x0 == x1 && y0 == y1) break;
        const int e2 = 2 * err;
        if (e2 >= dy) {
            err += dy;
            x0 += sx;
        }
        if (e2 <= dx) {
            err += dx;
            y0 += sy;
        }
    }
}

inline RasterImage render_line_plot(const PlotSpec& spec,
                                    const std::vector<PlotSeries>& series) {
    require(spec.width >= 160 && spec.height >= 120, "render_line_plot: canvas too small");
    RasterImage img = RasterImage::make(spec.height, spec.width, 3, 255);
    const PlotColor black{0, 0, 0};
    const PlotColor grey{200, 200, 200};

    double x_lo = spec.x_lo, x_hi = spec.x_hi, y_lo = spec.y_lo, y_hi = spec.y_hi;
    if (x_lo == x_hi || y_lo == y_hi) {
        bool any = false;
        double dx_lo = 0, dx_hi = 0, dy_lo = 0, dy_hi = 0;
        for (const auto& s : series)
            for (std::size_t i = 0; i < s.x.size(); ++i) {
                if (!any) {
                    dx_lo = dx_hi = s.x[i];
                    dy_lo = dy_hi = s.y[i];
                    any = true;
                } else {
                    dx_lo = std::min(dx_lo, s.x[i]);
                    dx_hi = std::max(dx_hi, s.x[i]);
                    dy_lo = std::min(dy_lo, s.y[i]);
                    dy_hi = std::max(dy_hi, s.y[i]);
                }
            }
        if (!any) dx_hi = dy_hi = 1.0;
        if (x_lo == x_hi) {
            x_lo = dx_lo;
            x_hi = dx_hi > dx_lo ? dx_hi : dx_lo + 1.0;
        }
        if (y_lo == y_hi) {
            y_lo = dy_lo;
            y_hi = dy_hi > dy_lo ? dy_hi : dy_lo + 1.0;
        }
    }

    const int left = 64, right = spec.width - 20;
    const int top = 28, bottom = spec.height - 44;
    auto px = [&](double x) {
        return left + static_cast<int>(std::lround((x - x_lo) / (x_hi - x_lo) * (right - left)));
    };
    auto py = [&](double y) {
        return bottom - static_cast<int>(std::lround((y - y_lo) / (y_hi - y_lo) * (bottom - top)));
    };

    // Grid, frame, tick labels.
    char buf[32];
    for (int t = 0; t <= 4; ++t) {
        const double fx = x_lo + (x_hi - x_lo) * t / 4.0;
        const double fy = y_lo + (y_hi - y_lo) * t / 4.0;
        draw_line(img, top, px(fx), bottom, px(fx), grey);
        draw_line(img, py(fy), left, py(fy), right, grey);
        std::snprintf(buf, sizeof buf, "%.2f", fx);
        draw_text(img, bottom + 6, px(fx) - text_width(buf) / 2, buf, black);
        std::snprintf(buf, sizeof buf, "%.2f", fy);
        draw_text(img, py(fy) - 3, left - 6 - text_width(buf), buf, black);
    }
    draw_line(img, top, left, top, right, black);
    draw_line(img, bottom, left, bottom, right, black);
    draw_line(img, top, left, bottom, left, black);
    draw_line(img, top, right, bottom, right, black);

    draw_text(img, 10, (spec.width - text_width(spec.title)) / 2, spec.title, black);
    draw_text(img, spec.height - 22, (spec.width - text_width(spec.x_label)) / 2, spec.x_label,
              black);
    draw_text(img, 16, 6, spec.y_label, black);

    // Series polylines plus a legend block in the lower-right corner.
    int legend_y = bottom - 12 - 10 * static_cast<int>(series.size());
    for (const auto& s : series) {
        require(s.x.size() == s.y.size(), "render_line_plot: series '" + s.label +
                                              "' has mismatched x/y lengths");
        for (std::size_t i = 1; i < s.x.size(); ++i)
            draw_line(img, py(s.y[i - 1]), px(s.x[i - 1]), py(s.y[i]), px(s.x[i]), s.color);
        if (!s.label.empty()) {
            const int lx = right - 18 - text_width(s.label);
            draw_line(img, legend_y + 3, lx, legend_y + 3, lx + 12, s.color);
            draw_text(img, legend_y, lx + 16, s.label, black);
            legend_y += 10;
        }
    }
    return img;
}

inline void write_plot_png(const std::filesystem::path& path, const PlotSpec& spec,
                           const std::vector<PlotSeries>& series) {
    write_png(path, render_line_plot(spec, series));
}

// Fixed palette cycled by series index.
inline PlotColor plot_color(std::size_t index) {
    static const PlotColor palette[] = {{214, 39, 40},  {31, 119, 180}, {44, 160, 44},
                                        {255, 127, 14}, {148, 103, 189}, {23, 190, 207}};
    return palette[index % (sizeof palette / sizeof palette[0])];
}

} // namespace dropvision
