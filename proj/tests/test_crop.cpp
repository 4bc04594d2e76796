#include <catch2/catch_amalgamated.hpp>

#include <queue>
#include <set>

#include "dropvision/crop.hpp"
#include "dropvision/rng.hpp"

using namespace dropvision;

namespace {

BinaryMask mask_from_rows(const std::vector<std::string>& rows) {
    BinaryMask m = BinaryMask::make(static_cast<int>(rows.size()),
                                    static_cast<int>(rows[0].size()), 0);
    for (int y = 0; y < m.height; ++y)
        for (int x = 0; x < m.width; ++x)
            m.values[static_cast<std::size_t>(y) * m.width + x] = rows[y][x] == '#' ? 1 : 0;
    return m;
}

// Independent flood-fill oracle: all 4-connected components with sizes.
std::vector<std::vector<std::size_t>> oracle_components(const BinaryMask& m) {
    std::vector<std::vector<std::size_t>> comps;
    std::vector<bool> seen(m.values.size(), false);
    for (std::size_t s = 0; s < m.values.size(); ++s) {
        if (!m.values[s] || seen[s]) continue;
        std::vector<std::size_t> comp;
        std::queue<std::size_t> q;
        q.push(s);
        seen[s] = true;
        while (!q.empty()) {
            const std::size_t at = q.front();
            q.pop();
            comp.push_back(at);
            const int y = static_cast<int>(at) / m.width, x = static_cast<int>(at) % m.width;
            const int ny[4] = {y - 1, y + 1, y, y};
            const int nx[4] = {x, x, x - 1, x + 1};
            for (int k = 0; k < 4; ++k) {
                if (ny[k] < 0 || ny[k] >= m.height || nx[k] < 0 || nx[k] >= m.width) continue;
                const std::size_t nat = static_cast<std::size_t>(ny[k]) * m.width + nx[k];
                if (m.values[nat] && !seen[nat]) {
                    seen[nat] = true;
                    q.push(nat);
                }
            }
        }
        comps.push_back(std::move(comp));
    }
    return comps;
}

RasterImage gradient_image(int h, int w, int channels = 3) {
    RasterImage img = RasterImage::make(h, w, channels, 0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < channels; ++c)
                img.at(y, x, c) = static_cast<std::uint8_t>((x * 7 + y * 3 + c * 41 + 20) % 256);
    return img;
}

} // namespace

TEST_CASE("largest_component keeps a single blob intact", "[crop]") {
    BinaryMask m = mask_from_rows({
        "........",
        ".###....",
        ".###....",
        "........",
    });
    BinaryMask out = largest_component(m);
    CHECK(out.values == m.values);
}

TEST_CASE("largest_component of empty mask is empty", "[crop]") {
    BinaryMask m = BinaryMask::make(6, 9, 0);
    CHECK(largest_component(m).foreground_count() == 0);
}

TEST_CASE("largest_component picks the bigger of two blobs", "[crop]") {
    // 20-pixel blob (5x4) vs 5-pixel blob, diagonal contact does not join.
    BinaryMask m = mask_from_rows({
        "#####...",
        "#####...",
        "#####...",
        "#####...",
        ".....#..",
        ".....##.",
        ".....##.",
        "........",
    });
    auto comps = oracle_components(m);
    REQUIRE(comps.size() == 2);
    BinaryMask out = largest_component(m);
    CHECK(out.foreground_count() == 20);
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 5; ++x)
            CHECK(out.values[static_cast<std::size_t>(y) * 8 + x] == 1);
    for (std::size_t i : comps[1]) CHECK(out.values[i] == 0);
}

TEST_CASE("largest_component matches a brute-force oracle on random masks", "[crop]") {
    Rng rng(314);
    for (int trial = 0; trial < 120; ++trial) {
        const int h = rng.uniform_int(1, 14), w = rng.uniform_int(1, 14);
        BinaryMask m = BinaryMask::make(h, w, 0);
        const double density = rng.uniform(0.2, 0.7);
        for (auto& v : m.values) v = rng.bernoulli(density) ? 1 : 0;

        BinaryMask out = largest_component(m);
        auto comps = oracle_components(m);
        if (comps.empty()) {
            CHECK(out.foreground_count() == 0);
            continue;
        }
        std::size_t best = 0;
        for (const auto& c : comps) best = std::max(best, c.size());
        CHECK(out.foreground_count() == best);
        // Output is a subset of the input and is one oracle component.
        for (std::size_t i = 0; i < m.values.size(); ++i)
            if (out.values[i]) CHECK(m.values[i] == 1);
        bool matched = false;
        for (const auto& c : comps) {
            if (c.size() != best) continue;
            bool all = true;
            for (std::size_t i : c)
                if (!out.values[i]) all = false;
            if (all) matched = true;
        }
        CHECK(matched);
    }
}

TEST_CASE("mask_to_bbox of all-ones mask with zero margin is the full image", "[crop]") {
    BinaryMask m = BinaryMask::make(12, 9, 1);
    CropRegion box = mask_to_bbox(m, 0.0);
    CHECK(box == CropRegion{0, 0, 12, 9});
}

TEST_CASE("mask_to_bbox tight box and margin arithmetic", "[crop]") {
    BinaryMask m = BinaryMask::make(100, 100, 0);
    for (int y = 10; y <= 20; ++y)
        for (int x = 30; x <= 50; ++x) m.values[static_cast<std::size_t>(y) * 100 + x] = 1;

    CropRegion tight = mask_to_bbox(m, 0.0);
    CHECK(tight == CropRegion{10, 30, 21, 51});

    // 5% of height 11 -> 0.55 -> 1 pixel; 5% of width 21 -> 1.05 -> 1 pixel.
    CropRegion grown = mask_to_bbox(m, 0.05);
    CHECK(grown == CropRegion{9, 29, 22, 52});
}

TEST_CASE("mask_to_bbox clamps margins at the image border", "[crop]") {
    BinaryMask m = BinaryMask::make(10, 10, 0);
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x) m.values[static_cast<std::size_t>(y) * 10 + x] = 1;
    CropRegion box = mask_to_bbox(m, 0.5);
    CHECK(box.top == 0);
    CHECK(box.left == 0);
    CHECK(box.bottom == 10);
    CHECK(box.right == 10);
}

TEST_CASE("mask_to_bbox rejects empty masks and bad margins", "[crop]") {
    BinaryMask empty = BinaryMask::make(5, 5, 0);
    CHECK_THROWS_WITH(mask_to_bbox(empty, 0.0),
                      Catch::Matchers::ContainsSubstring("no foreground"));
    BinaryMask one = BinaryMask::make(5, 5, 1);
    CHECK_THROWS_AS(mask_to_bbox(one, -0.1), Error);
}

TEST_CASE("mask_to_bbox with zero margin is minimal", "[crop]") {
    Rng rng(159);
    for (int trial = 0; trial < 100; ++trial) {
        const int h = rng.uniform_int(2, 16), w = rng.uniform_int(2, 16);
        BinaryMask m = BinaryMask::make(h, w, 0);
        const int count = rng.uniform_int(1, h * w / 2 + 1);
        for (int i = 0; i < count; ++i)
            m.values[static_cast<std::size_t>(rng.uniform_int(0, h * w - 1))] = 1;
        if (m.foreground_count() == 0) m.values[0] = 1;

        CropRegion box = mask_to_bbox(m, 0.0);
        // Every foreground pixel inside the box...
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                if (m.values[static_cast<std::size_t>(y) * w + x]) {
                    CHECK(y >= box.top);
                    CHECK(y < box.bottom);
                    CHECK(x >= box.left);
                    CHECK(x < box.right);
                }
        // ...and every side touches one (shrinking would lose a pixel).
        auto row_has_fg = [&](int y) {
            for (int x = box.left; x < box.right; ++x)
                if (m.values[static_cast<std::size_t>(y) * w + x]) return true;
            return false;
        };
        auto col_has_fg = [&](int x) {
            for (int y = box.top; y < box.bottom; ++y)
                if (m.values[static_cast<std::size_t>(y) * w + x]) return true;
            return false;
        };
        CHECK(row_has_fg(box.top));
        CHECK(row_has_fg(box.bottom - 1));
        CHECK(col_has_fg(box.left));
        CHECK(col_has_fg(box.right - 1));
    }
}

TEST_CASE("extract_drop with an all-ones mask equals a plain resize", "[crop]") {
    RasterImage img = gradient_image(40, 60);
    BinaryMask all = BinaryMask::make(40, 60, 1);
    RasterImage out = extract_drop(img, all, 32, 0.0);
    RasterImage plain = resize_image(img, 32, 32);
    CHECK(out == plain);
}

TEST_CASE("extract_drop falls back to the whole image on near-empty masks", "[crop]") {
    RasterImage img = gradient_image(50, 50);
    BinaryMask empty = BinaryMask::make(50, 50, 0);
    RasterImage out = extract_drop(img, empty, 24, 0.05);
    CHECK(out == resize_image(img, 24, 24));

    // One pixel of 2500 is 0.04% < 0.1%: still fallback.
    BinaryMask speck = empty;
    speck.values[1275] = 1;
    CHECK(extract_drop(img, speck, 24, 0.05) == resize_image(img, 24, 24));
}

TEST_CASE("extract_drop zeroes everything outside the resized mask", "[crop]") {
    // Cluttered image: bright noise everywhere, circular drop in the center.
    Rng rng(77);
    const int size = 64;
    RasterImage img = RasterImage::make(size, size, 3, 0);
    for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng.uniform_int(40, 255));
    BinaryMask mask = BinaryMask::make(size, size, 0);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            const double dx = x - 32.0, dy = y - 30.0;
            if (dx * dx + dy * dy <= 18.0 * 18.0)
                mask.values[static_cast<std::size_t>(y) * size + x] = 1;
        }

    const int out_size = 48;
    RasterImage out = extract_drop(img, mask, out_size, 0.05);
    REQUIRE(out.height == out_size);
    REQUIRE(out.width == out_size);
    REQUIRE(out.channels == 3);

    // Recompute the resized mask the same way to locate the outside region.
    const BinaryMask lc = largest_component(mask);
    const CropRegion box = mask_to_bbox(lc, 0.05);
    BinaryMask cropped = BinaryMask::make(box.height(), box.width(), 0);
    for (int y = 0; y < cropped.height; ++y)
        for (int x = 0; x < cropped.width; ++x)
            cropped.values[static_cast<std::size_t>(y) * cropped.width + x] =
                lc.values[static_cast<std::size_t>(box.top + y) * size + box.left + x];
    BinaryMask resized = resize_mask(cropped, out_size, out_size);

    std::size_t inside_nonzero = 0;
    for (int y = 0; y < out_size; ++y)
        for (int x = 0; x < out_size; ++x) {
            const bool in = resized.values[static_cast<std::size_t>(y) * out_size + x] != 0;
            if (!in) {
                for (int c = 0; c < 3; ++c) REQUIRE(out.at(y, x, c) == 0);
            } else {
                for (int c = 0; c < 3; ++c) inside_nonzero += out.at(y, x, c) > 0;
            }
        }
    // The drop pixels survive and fill most of the frame.
    CHECK(inside_nonzero > 0);
    CHECK(resized.foreground_count() >
          static_cast<std::size_t>(out_size) * out_size / 2);
}

TEST_CASE("extract_drop keeps only the dominant component", "[crop]") {
    RasterImage img = gradient_image(40, 40, 1);
    BinaryMask mask = BinaryMask::make(40, 40, 0);
    for (int y = 5; y < 25; ++y)
        for (int x = 5; x < 25; ++x) mask.values[static_cast<std::size_t>(y) * 40 + x] = 1;
    mask.values[static_cast<std::size_t>(35) * 40 + 35] = 1; // stray satellite pixel

    RasterImage out = extract_drop(img, mask, 20, 0.0);
    REQUIRE(out.height == 20);
    // The stray pixel is outside the chosen component's box, so the output
    // equals the resized 20x20 block.
    RasterImage block = RasterImage::make(20, 20, 1, 0);
    for (int y = 0; y < 20; ++y)
        for (int x = 0; x < 20; ++x) block.at(y, x, 0) = img.at(5 + y, 5 + x, 0);
    CHECK(out == resize_image(block, 20, 20));
}

TEST_CASE("extract_drop rejects mismatched dimensions", "[crop]") {
    RasterImage img = gradient_image(30, 30);
    BinaryMask mask = BinaryMask::make(30, 31, 1);
    CHECK_THROWS_WITH(extract_drop(img, mask, 16, 0.05),
                      Catch::Matchers::ContainsSubstring("dimensions differ"));
}
