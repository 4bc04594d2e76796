#include <catch2/catch_amalgamated.hpp>

#include "dropvision/augment.hpp"
#include "dropvision/rng.hpp"

using namespace dropvision;

namespace {

RasterImage random_image(Rng& rng, int h, int w, int c) {
    auto img = RasterImage::make(h, w, c);
    for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
    return img;
}

SegSample random_seg_sample(Rng& rng, int size) {
    SegSample s;
    s.image = random_image(rng, size, size, 3);
    s.mask = BinaryMask::make(size, size);
    for (auto& v : s.mask.values) v = rng.bernoulli(0.3) ? 1 : 0;
    s.id = "t";
    return s;
}

} // namespace

TEST_CASE("gamma correction basics", "[augment]") {
    Rng rng(1);
    const auto img = random_image(rng, 6, 7, 3);
    CHECK(gamma_correct(img, 1.0) == img);

    auto ends = RasterImage::make(1, 2, 1);
    ends.at(0, 0) = 0;
    ends.at(0, 1) = 255;
    for (const double g : {0.5, 0.8, 1.2, 2.0}) {
        const auto out = gamma_correct(ends, g);
        CHECK(out.at(0, 0) == 0);
        CHECK(out.at(0, 1) == 255);
    }

    auto mid = RasterImage::make(1, 1, 1);
    mid.at(0, 0) = 64;
    CHECK(gamma_correct(mid, 2.0).at(0, 0) == 16);

    CHECK_THROWS_AS(gamma_correct(img, 0.0), Error);
    CHECK_THROWS_AS(gamma_correct(img, -1.0), Error);
}

TEST_CASE("shift moves content and fills vacated pixels", "[augment]") {
    Rng rng(2);
    const auto img = random_image(rng, 8, 8, 1);
    CHECK(shift(img, 0, 0) == img);

    const auto flat = RasterImage::make(5, 5, 3, 99);
    CHECK(shift(flat, 2, -1, 99) == flat);

    auto one = RasterImage::make(8, 8, 1, 0);
    one.at(3, 3) = 200; // (x=3, y=3)
    const auto moved = shift(one, 2, 1);
    CHECK(moved.at(4, 5) == 200); // (x=5, y=4)
    CHECK(moved.at(3, 3) == 0);

    auto m = BinaryMask::make(4, 4);
    m.at(1, 1) = 1;
    const auto sm = shift_mask(m, 1, 2);
    CHECK(sm.at(3, 2) == 1);
    CHECK(sm.foreground_count() == 1);
}

TEST_CASE("zoom identity and constants", "[augment]") {
    Rng rng(3);
    const auto img = random_image(rng, 10, 12, 3);
    CHECK(zoom(img, 1.0) == img);

    const auto flat = RasterImage::make(9, 9, 1, 55);
    for (const double f : {0.7, 0.9, 1.1, 1.6}) {
        const auto out = zoom(flat, f);
        for (const auto p : out.pixels) CHECK(p == 55);
    }
}

TEST_CASE("zoom scales a centred square", "[augment]") {
    auto img = RasterImage::make(64, 64, 1, 0);
    for (int y = 27; y <= 36; ++y)
        for (int x = 27; x <= 36; ++x) img.at(y, x) = 255; // 10 px wide
    const auto out = zoom(img, 1.1);
    int min_x = 64, max_x = -1;
    for (int y = 0; y < 64; ++y)
        for (int x = 0; x < 64; ++x)
            if (out.at(y, x) > 127) {
                min_x = std::min(min_x, x);
                max_x = std::max(max_x, x);
            }
    const int width = max_x - min_x + 1;
    CHECK(width >= 10);
    CHECK(width <= 12); // 11 +/- 1
}

TEST_CASE("flip is an involution", "[augment]") {
    Rng rng(4);
    const auto img = random_image(rng, 7, 9, 3);
    CHECK(flip(flip(img, FlipAxis::Horizontal), FlipAxis::Horizontal) == img);
    CHECK(flip(flip(img, FlipAxis::Vertical), FlipAxis::Vertical) == img);

    // symmetric image is unchanged
    auto sym = RasterImage::make(3, 4, 1);
    for (int y = 0; y < 3; ++y)
        for (int x = 0; x < 4; ++x) sym.at(y, x) = static_cast<std::uint8_t>(10 * std::min(x, 3 - x) + y);
    CHECK(flip(sym, FlipAxis::Horizontal) == sym);

    // index formula: (r, c) -> (r, W-1-c)
    auto one = RasterImage::make(5, 6, 1, 0);
    one.at(2, 1) = 77;
    CHECK(flip(one, FlipAxis::Horizontal).at(2, 4) == 77);
    one = RasterImage::make(5, 6, 1, 0);
    one.at(1, 2) = 77;
    CHECK(flip(one, FlipAxis::Vertical).at(3, 2) == 77);
}

TEST_CASE("channel shift adds and clamps", "[augment]") {
    Rng rng(5);
    const auto img = random_image(rng, 4, 4, 3);
    CHECK(channel_shift(img, {0, 0, 0}) == img);

    auto bright = RasterImage::make(1, 1, 3, 200);
    CHECK(channel_shift(bright, {100, 100, 100}).at(0, 0, 0) == 255);

    auto v = RasterImage::make(1, 1, 3, 50);
    const auto out = channel_shift(v, {10, -20, 0});
    CHECK(out.at(0, 0, 0) == 60);
    CHECK(out.at(0, 0, 1) == 30);
    CHECK(out.at(0, 0, 2) == 50);

    CHECK_THROWS_AS(channel_shift(img, {1, 2}), Error);
    CHECK_THROWS_AS(channel_shift(img, {300, 0, 0}), Error);
}

TEST_CASE("finder augmentation respects the identity spec", "[augment]") {
    Rng data_rng(6);
    const auto sample = random_seg_sample(data_rng, 16);
    Rng rng(9);
    const auto out = augment_finder_sample(sample, FinderAugmentSpec::identity(), rng);
    CHECK(out.image == sample.image);
    CHECK(out.mask == sample.mask);
}

TEST_CASE("finder augmentation is deterministic for a fixed seed", "[augment]") {
    Rng data_rng(7);
    const auto sample = random_seg_sample(data_rng, 24);
    FinderAugmentSpec spec;
    for (int trial = 0; trial < 100; ++trial) {
        Rng a(1000 + trial), b(1000 + trial);
        const auto out_a = augment_finder_sample(sample, spec, a);
        const auto out_b = augment_finder_sample(sample, spec, b);
        REQUIRE(out_a.image == out_b.image);
        REQUIRE(out_a.mask == out_b.mask);
    }
}

TEST_CASE("finder augmentation keeps the mask binary and matched", "[augment]") {
    Rng data_rng(8);
    FinderAugmentSpec spec;
    for (int trial = 0; trial < 30; ++trial) {
        const auto sample = random_seg_sample(data_rng, 20);
        Rng rng(trial);
        const auto out = augment_finder_sample(sample, spec, rng);
        REQUIRE(out.image.height == sample.image.height);
        REQUIRE(out.image.width == sample.image.width);
        REQUIRE(out.image.channels == sample.image.channels);
        REQUIRE(out.mask.height == out.image.height);
        REQUIRE(out.mask.width == out.image.width);
        for (const auto v : out.mask.values) REQUIRE((v == 0 || v == 1));
    }
}

TEST_CASE("finder geometric transforms hit image and mask identically", "[augment]") {
    Rng data_rng(9);
    FinderAugmentSpec spec;
    for (int trial = 0; trial < 30; ++trial) {
        const auto sample = random_seg_sample(data_rng, 18);
        Rng rng(500 + trial), replay(500 + trial);
        const auto out = augment_finder_sample(sample, spec, rng);
        // re-draw the same parameters and transform the mask separately
        const auto p = sample_finder_params(spec, 18, 18, replay);
        const auto mask_alone = zoom_mask(shift_mask(sample.mask, p.dx, p.dy), p.zoom_factor);
        REQUIRE(out.mask == mask_alone);
    }
}

TEST_CASE("classifier augmentation preserves label and shape", "[augment]") {
    Rng data_rng(10);
    LabeledSample sample;
    sample.image = random_image(data_rng, 20, 20, 3);
    sample.label = ClassLabel::Precipitate;
    sample.id = "x";

    Rng rng(77);
    const auto same = augment_classifier_sample(sample, ClassifierAugmentSpec::identity(), rng);
    CHECK(same.image == sample.image);
    CHECK(same.label == sample.label);

    ClassifierAugmentSpec spec;
    for (int trial = 0; trial < 50; ++trial) {
        Rng a(trial), b(trial);
        const auto out = augment_classifier_sample(sample, spec, a);
        REQUIRE(out.label == sample.label);
        REQUIRE(out.image.height == sample.image.height);
        REQUIRE(out.image.width == sample.image.width);
        REQUIRE(out.image.channels == sample.image.channels);
        const auto again = augment_classifier_sample(sample, spec, b);
        REQUIRE(out.image == again.image);
    }
}
