#pragma once

#include <cmath>
#include <cstdint>
#include <nlohmann/json.hpp>
#include <vector>

#include "dropvision/dataset.hpp"
#include "dropvision/error.hpp"
#include "dropvision/image.hpp"
#include "dropvision/rng.hpp"

namespace dropvision {

// Augmentation suite for image/mask training pairs: gamma, shift, zoom.
struct FinderAugmentSpec {
    double gamma_lo = 0.8;
    double gamma_hi = 1.2;
    double shift_fraction = 0.10; // of image size, each axis
    double zoom_lo = 0.9;
    double zoom_hi = 1.1;
    std::uint64_t seed = 0;

    void validate() const {
        require(gamma_lo > 0.0 && gamma_hi >= gamma_lo, "FinderAugmentSpec: bad gamma range");
        require(zoom_lo > 0.0 && zoom_hi >= zoom_lo, "FinderAugmentSpec: bad zoom range");
        require(shift_fraction >= 0.0 && shift_fraction < 1.0,
                "FinderAugmentSpec: shift_fraction must be in [0,1)");
    }

    static FinderAugmentSpec identity() {
        FinderAugmentSpec s;
        s.gamma_lo = s.gamma_hi = 1.0;
        s.shift_fraction = 0.0;
        s.zoom_lo = s.zoom_hi = 1.0;
        return s;
    }
};

// Augmentation suite for labelled classifier images: flips, per-channel
// intensity shift, spatial shift, zoom.
struct ClassifierAugmentSpec {
    bool horizontal_flip = true;
    bool vertical_flip = true;
    int channel_shift_range = 100; // +/- intensity
    double shift_fraction = 0.10;
    double zoom_lo = 0.9;
    double zoom_hi = 1.1;
    bool independent_channel_shift = true; // one delta per channel vs shared
    std::uint64_t seed = 0;

    void validate() const {
        require(channel_shift_range >= 0 && channel_shift_range <= 255,
                "ClassifierAugmentSpec: channel_shift_range must be in [0,255]");
        require(zoom_lo > 0.0 && zoom_hi >= zoom_lo, "ClassifierAugmentSpec: bad zoom range");
        require(shift_fraction >= 0.0 && shift_fraction < 1.0,
                "ClassifierAugmentSpec: shift_fraction must be in [0,1)");
    }

    static ClassifierAugmentSpec identity() {
        ClassifierAugmentSpec s;
        s.horizontal_flip = s.vertical_flip = false;
        s.channel_shift_range = 0;
        s.shift_fraction = 0.0;
        s.zoom_lo = s.zoom_hi = 1.0;
        return s;
    }
};

inline void to_json(nlohmann::json& j, const FinderAugmentSpec& s) {
    j = {{"gamma_lo", s.gamma_lo},
         {"gamma_hi", s.gamma_hi},
         {"shift_fraction", s.shift_fraction},
         {"zoom_lo", s.zoom_lo},
         {"zoom_hi", s.zoom_hi}};
}

inline void from_json(const nlohmann::json& j, FinderAugmentSpec& s) {
    s.gamma_lo = j.value("gamma_lo", s.gamma_lo);
    s.gamma_hi = j.value("gamma_hi", s.gamma_hi);
    s.shift_fraction = j.value("shift_fraction", s.shift_fraction);
    s.zoom_lo = j.value("zoom_lo", s.zoom_lo);
    s.zoom_hi = j.value("zoom_hi", s.zoom_hi);
}

inline void to_json(nlohmann::json& j, const ClassifierAugmentSpec& s) {
    j = {{"horizontal_flip", s.horizontal_flip},
         {"vertical_flip", s.vertical_flip},
         {"channel_shift_range", s.channel_shift_range},
         {"shift_fraction", s.shift_fraction},
         {"zoom_lo", s.zoom_lo},
         {"zoom_hi", s.zoom_hi},
         {"independent_channel_shift", s.independent_channel_shift}};
}

inline void from_json(const nlohmann::json& j, ClassifierAugmentSpec& s) {
    s.horizontal_flip = j.value("horizontal_flip", s.horizontal_flip);
    s.vertical_flip = j.value("vertical_flip", s.vertical_flip);
    s.channel_shift_range = j.value("channel_shift_range", s.channel_shift_range);
    s.shift_fraction = j.value("shift_fraction", s.shift_fraction);
    s.zoom_lo = j.value("zoom_lo", s.zoom_lo);
    s.zoom_hi = j.value("zoom_hi", s.zoom_hi);
    s.independent_channel_shift = j.value("independent_channel_shift", s.independent_channel_shift);
}

// v -> round(255 * (v/255)^gamma)
inline RasterImage gamma_correct(const RasterImage& image, double gamma) {
    require(gamma > 0.0, "gamma_correct: gamma must be > 0");
    if (gamma == 1.0) return image;
    std::uint8_t lut[256];
    for (int v = 0; v < 256; ++v)
        lut[v] = clamp_u8(std::lround(255.0 * std::pow(v / 255.0, gamma)));
    RasterImage out = image;
    for (auto& p : out.pixels) p = lut[p];
    return out;
}

// Translate by (dx, dy) in pixel units; vacated pixels take the fill value.
inline RasterImage shift(const RasterImage& image, int dx, int dy, std::uint8_t fill = 0) {
    require(std::abs(dx) <= image.width && std::abs(dy) <= image.height,
            "shift: offset exceeds image size");
    if (dx == 0 && dy == 0) return image;
    RasterImage out = RasterImage::make(image.height, image.width, image.channels, fill);
    for (int y = 0; y < image.height; ++y) {
        const int sy = y - dy;
        if (sy < 0 || sy >= image.height) continue;
        for (int x = 0; x < image.width; ++x) {
            const int sx = x - dx;
            if (sx < 0 || sx >= image.width) continue;
            for (int c = 0; c < image.channels; ++c) out.at(y, x, c) = image.at(sy, sx, c);
        }
    }
    return out;
}

inline BinaryMask shift_mask(const BinaryMask& mask, int dx, int dy) {
    if (dx == 0 && dy == 0) return mask;
    BinaryMask out = BinaryMask::make(mask.height, mask.width, 0);
    for (int y = 0; y < mask.height; ++y) {
        const int sy = y - dy;
        if (sy < 0 || sy >= mask.height) continue;
        for (int x = 0; x < mask.width; ++x) {
            const int sx = x - dx;
            if (sx < 0 || sx >= mask.width) continue;
            out.at(y, x) = mask.at(sy, sx);
        }
    }
    return out;
}

// Centre-anchored scale; output keeps the input dimensions. Zooming out pads
// with replicated edge pixels; the image is sampled bilinearly.
inline RasterImage zoom(const RasterImage& image, double factor) {
    require(factor > 0.0, "zoom: factor must be > 0");
    if (factor == 1.0) return image;
    RasterImage out = RasterImage::make(image.height, image.width, image.channels);
    const double cy = image.height / 2.0;
    const double cx = image.width / 2.0;
    for (int y = 0; y < image.height; ++y) {
        const double fy = cy + (y + 0.5 - cy) / factor - 0.5;
        const int y0 = static_cast<int>(std::floor(fy));
        const double wy = fy - y0;
        const int ya = std::clamp(y0, 0, image.height - 1);
        const int yb = std::clamp(y0 + 1, 0, image.height - 1);
        for (int x = 0; x < image.width; ++x) {
            const double fx = cx + (x + 0.5 - cx) / factor - 0.5;
            const int x0 = static_cast<int>(std::floor(fx));
            const double wx = fx - x0;
            const int xa = std::clamp(x0, 0, image.width - 1);
            const int xb = std::clamp(x0 + 1, 0, image.width - 1);
            for (int c = 0; c < image.channels; ++c) {
                const double top = image.at(ya, xa, c) * (1.0 - wx) + image.at(ya, xb, c) * wx;
                const double bot = image.at(yb, xa, c) * (1.0 - wx) + image.at(yb, xb, c) * wx;
                out.at(y, x, c) = clamp_u8(std::lround(top * (1.0 - wy) + bot * wy));
            }
        }
    }
    return out;
}

// Mask variant: nearest-neighbour sampling, zero outside the source bounds.
inline BinaryMask zoom_mask(const BinaryMask& mask, double factor) {
    require(factor > 0.0, "zoom_mask: factor must be > 0");
    if (factor == 1.0) return mask;
    BinaryMask out = BinaryMask::make(mask.height, mask.width, 0);
    const double cy = mask.height / 2.0;
    const double cx = mask.width / 2.0;
    for (int y = 0; y < mask.height; ++y) {
        const double fy = cy + (y + 0.5 - cy) / factor - 0.5;
        const int sy = static_cast<int>(std::lround(fy));
        if (sy < 0 || sy >= mask.height) continue;
        for (int x = 0; x < mask.width; ++x) {
            const double fx = cx + (x + 0.5 - cx) / factor - 0.5;
            const int sx = static_cast<int>(std::lround(fx));
            if (sx < 0 || sx >= mask.width) continue;
            out.at(y, x) = mask.at(sy, sx);
        }
    }
    return out;
}

enum class FlipAxis { Horizontal, Vertical };

inline RasterImage flip(const RasterImage& image, FlipAxis axis) {
    RasterImage out = RasterImage::make(image.height, image.width, image.channels);
    for (int y = 0; y < image.height; ++y)
        for (int x = 0; x < image.width; ++x) {
            const int sy = axis == FlipAxis::Vertical ? image.height - 1 - y : y;
            const int sx = axis == FlipAxis::Horizontal ? image.width - 1 - x : x;
            for (int c = 0; c < image.channels; ++c) out.at(y, x, c) = image.at(sy, sx, c);
        }
    return out;
}

// clamp(v + delta, 0, 255) per channel
inline RasterImage channel_shift(const RasterImage& image, const std::vector<int>& deltas) {
    require(static_cast<int>(deltas.size()) == image.channels,
            "channel_shift: delta count must match channel count");
    for (const int d : deltas)
        require(std::abs(d) <= 255, "channel_shift: |delta| must be <= 255");
    RasterImage out = image;
    for (int y = 0; y < image.height; ++y)
        for (int x = 0; x < image.width; ++x)
            for (int c = 0; c < image.channels; ++c)
                out.at(y, x, c) = clamp_u8(image.at(y, x, c) + deltas[c]);
    return out;
}

// Parameters drawn for one finder augmentation; geometric ones apply to the
// image and its mask identically.
struct FinderAugmentParams {
    double gamma = 1.0;
    int dx = 0, dy = 0;
    double zoom_factor = 1.0;
};

inline FinderAugmentParams sample_finder_params(const FinderAugmentSpec& spec, int height,
                                                int width, Rng& rng) {
    FinderAugmentParams p;
    p.gamma = rng.uniform(spec.gamma_lo, spec.gamma_hi);
    p.dx = static_cast<int>(std::lround(rng.uniform(-spec.shift_fraction, spec.shift_fraction) * width));
    p.dy = static_cast<int>(std::lround(rng.uniform(-spec.shift_fraction, spec.shift_fraction) * height));
    p.zoom_factor = rng.uniform(spec.zoom_lo, spec.zoom_hi);
    return p;
}

inline SegSample apply_finder_params(const SegSample& sample, const FinderAugmentParams& p) {
    SegSample out = sample;
    out.image = zoom(shift(gamma_correct(sample.image, p.gamma), p.dx, p.dy), p.zoom_factor);
    out.mask = zoom_mask(shift_mask(sample.mask, p.dx, p.dy), p.zoom_factor);
    // nearest-neighbour resampling keeps the mask binary; enforce regardless
    for (auto& v : out.mask.values) v = v ? 1 : 0;
    return out;
}

inline SegSample augment_finder_sample(const SegSample& sample, const FinderAugmentSpec& spec,
                                       Rng& rng) {
    spec.validate();
    return apply_finder_params(
        sample, sample_finder_params(spec, sample.image.height, sample.image.width, rng));
}

inline LabeledSample augment_classifier_sample(const LabeledSample& sample,
                                               const ClassifierAugmentSpec& spec, Rng& rng) {
    spec.validate();
    RasterImage img = sample.image;
    if (spec.horizontal_flip && rng.bernoulli(0.5)) img = flip(img, FlipAxis::Horizontal);
    if (spec.vertical_flip && rng.bernoulli(0.5)) img = flip(img, FlipAxis::Vertical);
    if (spec.channel_shift_range > 0) {
        std::vector<int> deltas(img.channels);
        if (spec.independent_channel_shift) {
            for (auto& d : deltas)
                d = rng.uniform_int(-spec.channel_shift_range, spec.channel_shift_range);
        } else {
            const int d = rng.uniform_int(-spec.channel_shift_range, spec.channel_shift_range);
            std::fill(deltas.begin(), deltas.end(), d);
        }
        img = channel_shift(img, deltas);
    }
    const int dx =
        static_cast<int>(std::lround(rng.uniform(-spec.shift_fraction, spec.shift_fraction) * img.width));
    const int dy =
        static_cast<int>(std::lround(rng.uniform(-spec.shift_fraction, spec.shift_fraction) * img.height));
    img = shift(img, dx, dy);
    img = zoom(img, rng.uniform(spec.zoom_lo, spec.zoom_hi));

    LabeledSample out = sample;
    out.image = std::move(img);
    return out;
}

} // namespace dropvision
