#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "dropvision/canny.hpp"
#include "dropvision/metrics.hpp"
#include "dropvision/rng.hpp"

using namespace dropvision;

namespace {

RasterImage constant_image(int size, std::uint8_t value) {
    return RasterImage::make(size, size, 3, value);
}

// High-contrast filled disk on a plain background, with its analytic mask.
std::pair<RasterImage, BinaryMask> disk_scene(int size, double cx, double cy, double r,
                                              int bg = 60, int fg = 210) {
    RasterImage img = RasterImage::make(size, size, 3, 0);
    BinaryMask mask = BinaryMask::make(size, size, 0);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            const double dx = x - cx, dy = y - cy;
            const bool in = dx * dx + dy * dy <= r * r;
            for (int c = 0; c < 3; ++c)
                img.at(y, x, c) = static_cast<std::uint8_t>(in ? fg : bg);
            if (in) mask.values[static_cast<std::size_t>(y) * size + x] = 1;
        }
    return {std::move(img), std::move(mask)};
}

RasterImage ridged_scene(int size, std::uint64_t seed) {
    Rng rng(seed);
    const double theta = rng.uniform(0.0, 3.14159);
    const double freq = rng.uniform(0.35, 0.55);
    const double cxs = std::cos(theta), sys = std::sin(theta);
    RasterImage img = RasterImage::make(size, size, 3, 0);
    const double cx = size / 2.0 + rng.uniform(-4.0, 4.0);
    const double cy = size / 2.0 + rng.uniform(-4.0, 4.0);
    const double r = size * rng.uniform(0.26, 0.34);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            const double ridge = 55.0 * std::sin(freq * (x * cxs + y * sys));
            const double dx = x - cx, dy = y - cy;
            const bool in = dx * dx + dy * dy <= r * r;
            const int v = clamp_u8(static_cast<int>(120 + ridge + (in ? 65 : 0)));
            for (int c = 0; c < 3; ++c) img.at(y, x, c) = static_cast<std::uint8_t>(v);
        }
    return img;
}

} // namespace

TEST_CASE("canny on a uniform image finds nearly nothing", "[canny]") {
    for (int value : {0, 128, 255}) {
        RasterImage img = constant_image(80, static_cast<std::uint8_t>(value));
        BinaryMask mask = canny_baseline_mask(img, 50, 150);
        CHECK(static_cast<double>(mask.foreground_count()) <= 0.01 * 80 * 80);
    }
}

TEST_CASE("canny recovers a high-contrast disk", "[canny]") {
    auto [img, truth] = disk_scene(96, 48, 47, 28);
    BinaryMask mask = canny_baseline_mask(img, 50, 150);
    CHECK(iou(mask, truth) >= 0.8);
}

TEST_CASE("canny threshold choice changes the recovered region on texture", "[canny]") {
    RasterImage img = ridged_scene(96, 5);
    BinaryMask strict = canny_baseline_mask(img, 50, 150);
    BinaryMask loose = canny_baseline_mask(img, 10, 50);
    CHECK(iou(strict, loose) < 0.9);
}

TEST_CASE("canny threshold validation", "[canny]") {
    RasterImage img = constant_image(16, 10);
    CHECK_THROWS_AS(canny_baseline_mask(img, 150, 50), Error);
    CHECK_THROWS_AS(canny_baseline_mask(img, 50, 50), Error);
    CHECK_THROWS_AS(canny_baseline_mask(img, -1, 50), Error);
    CHECK_THROWS_AS(canny_baseline_mask(img, 50, 256), Error);
    CHECK_NOTHROW(canny_baseline_mask(img, 0, 255));
}

TEST_CASE("canny works on grayscale input directly", "[canny]") {
    auto [rgb, truth] = disk_scene(64, 32, 32, 20);
    RasterImage gray = to_grayscale(rgb);
    BinaryMask mask = canny_baseline_mask(gray, 40, 120);
    CHECK(iou(mask, truth) >= 0.8);
}
