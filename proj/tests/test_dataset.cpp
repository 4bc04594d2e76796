#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <set>

#include "dropvision/dataset.hpp"
#include "dropvision/png_io.hpp"

using namespace dropvision;
namespace fs = std::filesystem;

namespace {

// Writes a small on-disk dataset and returns its root.
fs::path make_dataset(const std::string& name, int count, bool with_masks,
                      const std::string& label = "Clear") {
    const fs::path root = fs::temp_directory_path() / ("dropvision_ds_" + name);
    fs::remove_all(root);
    fs::create_directories(root / "images");
    if (with_masks) fs::create_directories(root / "masks");

    std::ofstream csv(root / "manifest.csv");
    csv << "id,image,mask,label,source_tag\n";
    for (int i = 0; i < count; ++i) {
        const std::string id = "s" + std::to_string(i);
        const auto img = RasterImage::make(8, 8, 3, static_cast<std::uint8_t>(i * 10 % 255));
        write_png(root / "images" / (id + ".png"), img);
        std::string mask_field;
        if (with_masks) {
            auto m = BinaryMask::make(8, 8);
            m.at(4, 4) = 1;
            write_mask_png(root / "masks" / (id + ".png"), m);
            mask_field = "masks/" + id + ".png";
        }
        csv << id << ",images/" << id << ".png," << mask_field << ',' << label << ",srcA\n";
    }
    return root;
}

} // namespace

TEST_CASE("manifest load preserves counts", "[dataset]") {
    const auto root = make_dataset("count", 3, true);
    const auto m = load_manifest(root);
    CHECK(m.size() == 3);
    CHECK(m.all_have_masks());
    CHECK(m.all_have_labels());
    fs::remove_all(root);
}

TEST_CASE("manifest errors name the offending entry", "[dataset]") {
    const auto root = make_dataset("missing", 2, false);
    fs::remove(root / "images" / "s1.png");
    CHECK_THROWS_WITH(load_manifest(root), Catch::Matchers::ContainsSubstring("s1"));
    fs::remove_all(root);
}

TEST_CASE("others label is rejected", "[dataset]") {
    const auto root = make_dataset("others", 2, false, "Others");
    CHECK_THROWS_WITH(load_manifest(root), Catch::Matchers::ContainsSubstring("excluded"));
    fs::remove_all(root);
}

TEST_CASE("unknown label is rejected", "[dataset]") {
    const auto root = make_dataset("badlabel", 1, false, "Sparkly");
    CHECK_THROWS_WITH(load_manifest(root), Catch::Matchers::ContainsSubstring("Sparkly"));
    fs::remove_all(root);
}

TEST_CASE("duplicate ids are rejected", "[dataset]") {
    const auto root = make_dataset("dup", 2, false);
    std::ofstream csv(root / "manifest.csv", std::ios::app);
    csv << "s0,images/s0.png,,Clear,srcA\n";
    csv.close();
    CHECK_THROWS_WITH(load_manifest(root), Catch::Matchers::ContainsSubstring("duplicate"));
    fs::remove_all(root);
}

TEST_CASE("manifest round trips through save", "[dataset]") {
    const auto root = make_dataset("roundtrip", 4, true);
    const auto m = load_manifest(root);
    save_manifest(m);
    const auto again = load_manifest(root);
    REQUIRE(again.size() == m.size());
    for (std::size_t i = 0; i < m.size(); ++i) {
        CHECK(again.entries[i].id == m.entries[i].id);
        CHECK(again.entries[i].image_path == m.entries[i].image_path);
        CHECK(again.entries[i].mask_path == m.entries[i].mask_path);
        CHECK(again.entries[i].label == m.entries[i].label);
        CHECK(again.entries[i].source_tag == m.entries[i].source_tag);
    }
    fs::remove_all(root);
}

TEST_CASE("split sizes follow rounding", "[dataset]") {
    DatasetManifest m;
    for (int i = 0; i < 150; ++i)
        m.entries.push_back({"id" + std::to_string(i), "x.png", "", std::nullopt, "s"});
    const auto [train, eval] = split_dataset(m, {0.6, 7});
    CHECK(train.size() == 90);
    CHECK(eval.size() == 60);

    DatasetManifest ten;
    for (int i = 0; i < 10; ++i)
        ten.entries.push_back({"id" + std::to_string(i), "x.png", "", std::nullopt, "s"});
    const auto [t7, e3] = split_dataset(ten, {0.7, 1});
    CHECK(t7.size() == 7);
    CHECK(e3.size() == 3);
}

TEST_CASE("split is deterministic for a fixed seed", "[dataset]") {
    DatasetManifest m;
    for (int i = 0; i < 37; ++i)
        m.entries.push_back({"id" + std::to_string(i), "x.png", "", std::nullopt, "s"});
    const auto [a_train, a_eval] = split_dataset(m, {0.55, 99});
    const auto [b_train, b_eval] = split_dataset(m, {0.55, 99});
    REQUIRE(a_train.size() == b_train.size());
    for (std::size_t i = 0; i < a_train.size(); ++i)
        CHECK(a_train.entries[i].id == b_train.entries[i].id);
    for (std::size_t i = 0; i < a_eval.size(); ++i)
        CHECK(a_eval.entries[i].id == b_eval.entries[i].id);
}

TEST_CASE("split partitions the manifest", "[dataset]") {
    Rng rng(123);
    for (int trial = 0; trial < 60; ++trial) {
        const int n = rng.uniform_int(2, 1000);
        DatasetManifest m;
        for (int i = 0; i < n; ++i)
            m.entries.push_back({"id" + std::to_string(i), "x.png", "", std::nullopt, "s"});
        double frac = rng.uniform(0.05, 0.95);
        // keep both sides nonempty for this trial
        const auto n_train = std::lround(frac * n);
        if (n_train == 0 || n_train == n) {
            frac = 0.5;
        }
        const auto [train, eval] = split_dataset(m, {frac, rng.next_u64()});
        std::set<std::string> ids;
        for (const auto& e : train.entries) ids.insert(e.id);
        for (const auto& e : eval.entries) ids.insert(e.id);
        CHECK(ids.size() == static_cast<std::size_t>(n)); // disjoint and covering
        CHECK(train.size() + eval.size() == static_cast<std::size_t>(n));
    }
}

TEST_CASE("degenerate splits are rejected", "[dataset]") {
    DatasetManifest m;
    m.entries.push_back({"a", "x.png", "", std::nullopt, "s"});
    m.entries.push_back({"b", "x.png", "", std::nullopt, "s"});
    CHECK_THROWS_AS(split_dataset(m, {0.1, 0}), Error); // round(0.2) == 0
    DatasetManifest one;
    one.entries.push_back({"a", "x.png", "", std::nullopt, "s"});
    CHECK_THROWS_AS(split_dataset(one, {0.5, 0}), Error);
}

TEST_CASE("samples load through the manifest", "[dataset]") {
    const auto root = make_dataset("samples", 2, true, "Crystals");
    const auto m = load_manifest(root);
    const auto seg = load_seg_samples(m);
    REQUIRE(seg.size() == 2);
    CHECK(seg[0].mask.height == seg[0].image.height);
    CHECK(seg[0].mask.foreground_count() == 1);
    const auto labeled = load_labeled_samples(m);
    REQUIRE(labeled.size() == 2);
    CHECK(labeled[1].label == ClassLabel::Crystals);
    CHECK(labeled[1].source_tag == "srcA");
    fs::remove_all(root);
}
