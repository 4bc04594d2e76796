#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include "dropvision/image.hpp"
#include "dropvision/png_io.hpp"
#include "dropvision/rng.hpp"

using namespace dropvision;

TEST_CASE("raster image invariants", "[image]") {
    CHECK_THROWS_AS(RasterImage::make(0, 4, 1), Error);
    CHECK_THROWS_AS(RasterImage::make(4, 0, 3), Error);
    CHECK_THROWS_AS(RasterImage::make(4, 4, 2), Error);
    CHECK_THROWS_AS(RasterImage::make(4, 4, 4), Error);
    const auto img = RasterImage::make(2, 3, 3, 7);
    CHECK(img.pixels.size() == 18);
    CHECK(img.at(1, 2, 2) == 7);
}

TEST_CASE("resize keeps a same-size image identical", "[image]") {
    Rng rng(11);
    auto img = RasterImage::make(17, 23, 3);
    for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
    CHECK(resize_image(img, 17, 23) == img);
}

TEST_CASE("resize of a constant image stays constant", "[image]") {
    const auto img = RasterImage::make(31, 19, 1, 143);
    for (const auto [h, w] : {std::pair{7, 7}, {64, 64}, {100, 3}}) {
        const auto out = resize_image(img, h, w);
        CHECK(out.height == h);
        CHECK(out.width == w);
        for (const auto p : out.pixels) CHECK(p == 143);
    }
}

TEST_CASE("resize produces the requested geometry", "[image]") {
    const auto img = RasterImage::make(512, 512, 3, 99);
    const auto out = resize_image(img, 299, 299);
    CHECK(out.height == 299);
    CHECK(out.width == 299);
    CHECK(out.channels == 3);
}

TEST_CASE("bilinear resize interpolates midpoints", "[image]") {
    // one black and one white column, doubled in width: the inner two
    // columns land at 1/4 and 3/4 between the sources
    auto img = RasterImage::make(1, 2, 1);
    img.at(0, 0) = 0;
    img.at(0, 1) = 200;
    const auto out = resize_image(img, 1, 4);
    CHECK(out.at(0, 0) == 0);
    CHECK(out.at(0, 1) == 50);
    CHECK(out.at(0, 2) == 150);
    CHECK(out.at(0, 3) == 200);
}

TEST_CASE("binarize thresholds inclusively", "[image]") {
    auto s = ScoreMap::make(1, 3);
    s.at(0, 0) = 0.4f;
    s.at(0, 1) = 0.5f;
    s.at(0, 2) = 0.6f;
    const auto m = binarize_mask(s, 0.5);
    CHECK(m.at(0, 0) == 0);
    CHECK(m.at(0, 1) == 1);
    CHECK(m.at(0, 2) == 1);

    auto ones = ScoreMap::make(4, 4, 1, 0.9f);
    CHECK(binarize_mask(ones, 0.5).foreground_count() == 16);
    auto zeros = ScoreMap::make(4, 4, 1, 0.0f);
    CHECK(binarize_mask(zeros, 0.5).foreground_count() == 0);
}

TEST_CASE("binarize rejects bad input", "[image]") {
    const auto multi = ScoreMap::make(2, 2, 3);
    CHECK_THROWS_AS(binarize_mask(multi, 0.5), Error);
    const auto s = ScoreMap::make(2, 2);
    CHECK_THROWS_AS(binarize_mask(s, 0.0), Error);
    CHECK_THROWS_AS(binarize_mask(s, 1.0), Error);
}

TEST_CASE("binarize is monotone in the threshold", "[image]") {
    Rng rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        auto s = ScoreMap::make(rng.uniform_int(1, 16), rng.uniform_int(1, 16));
        for (auto& v : s.values) v = static_cast<float>(rng.uniform());
        const double t1 = rng.uniform(0.05, 0.5);
        const double t2 = rng.uniform(t1, 0.95);
        const auto lo = binarize_mask(s, t1);
        const auto hi = binarize_mask(s, t2);
        for (std::size_t i = 0; i < lo.values.size(); ++i) {
            CHECK(hi.values[i] <= lo.values[i]); // raising threshold never adds pixels
        }
    }
}

TEST_CASE("mask resize stays binary", "[image]") {
    Rng rng(6);
    auto m = BinaryMask::make(15, 11);
    for (auto& v : m.values) v = rng.bernoulli(0.4) ? 1 : 0;
    const auto out = resize_mask(m, 40, 9);
    CHECK(out.height == 40);
    CHECK(out.width == 9);
    for (const auto v : out.values) CHECK((v == 0 || v == 1));
    CHECK(resize_mask(m, 15, 11) == m);
}

TEST_CASE("png round trip", "[image]") {
    const auto dir = std::filesystem::temp_directory_path() / "dropvision_png_test";
    std::filesystem::create_directories(dir);

    Rng rng(3);
    auto rgb = RasterImage::make(9, 13, 3);
    for (auto& p : rgb.pixels) p = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
    write_png(dir / "rgb.png", rgb);
    CHECK(read_png(dir / "rgb.png") == rgb);

    auto gray = RasterImage::make(5, 7, 1);
    for (auto& p : gray.pixels) p = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
    write_png(dir / "gray.png", gray);
    CHECK(read_png(dir / "gray.png") == gray);

    auto mask = BinaryMask::make(6, 8);
    for (auto& v : mask.values) v = rng.bernoulli(0.5) ? 1 : 0;
    write_mask_png(dir / "mask.png", mask);
    CHECK(read_mask_png(dir / "mask.png") == mask);

    CHECK_THROWS_AS(read_png(dir / "missing.png"), Error);
    std::filesystem::remove_all(dir);
}

TEST_CASE("grayscale and rgb conversions", "[image]") {
    auto rgb = RasterImage::make(2, 2, 3);
    rgb.at(0, 0, 0) = 255; // pure red
    const auto gray = to_grayscale(rgb);
    CHECK(gray.channels == 1);
    CHECK(gray.at(0, 0) == 76); // round(0.299 * 255)
    const auto back = to_rgb(gray);
    CHECK(back.channels == 3);
    CHECK(back.at(0, 0, 0) == 76);
    CHECK(back.at(0, 0, 1) == 76);
}
