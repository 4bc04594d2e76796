#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "dropvision/error.hpp"
#include "dropvision/image.hpp"
#include "dropvision/png_io.hpp"
#include "dropvision/rng.hpp"

namespace dropvision {

// The three crystallization states handled by the classifier.
enum class ClassLabel { Clear = 0, Crystals = 1, Precipitate = 2 };

inline constexpr int kNumClasses = 3;

inline const char* label_to_string(ClassLabel label) {
    switch (label) {
        case ClassLabel::Clear: return "Clear";
        case ClassLabel::Crystals: return "Crystals";
        case ClassLabel::Precipitate: return "Precipitate";
    }
    return "?";
}

inline ClassLabel label_from_string(const std::string& s) {
    if (s == "Clear") return ClassLabel::Clear;
    if (s == "Crystals") return ClassLabel::Crystals;
    if (s == "Precipitate") return ClassLabel::Precipitate;
    if (s == "Others" || s == "others")
        throw Error("label 'Others' is excluded from this task");
    throw Error("unknown class label '" + s + "'");
}

struct LabeledSample {
    RasterImage image;
    ClassLabel label = ClassLabel::Clear;
    std::string source_tag;
    std::string id;
};

struct SegSample {
    RasterImage image;
    BinaryMask mask;
    std::string source_tag;
    std::string id;
};

struct ManifestEntry {
    std::string id;
    std::string image_path; // relative to root
    std::string mask_path;  // relative to root, empty if absent
    std::optional<ClassLabel> label;
    std::string source_tag;
};

struct DatasetManifest {
    std::filesystem::path root;
    std::vector<ManifestEntry> entries;

    std::size_t size() const { return entries.size(); }
    bool all_have_masks() const {
        return std::all_of(entries.begin(), entries.end(),
                           [](const ManifestEntry& e) { return !e.mask_path.empty(); });
    }
    bool all_have_labels() const {
        return std::all_of(entries.begin(), entries.end(),
                           [](const ManifestEntry& e) { return e.label.has_value(); });
    }
};

struct SplitSpec {
    double train_fraction = 0.6;
    std::uint64_t seed = 0;
};

namespace detail {

inline std::vector<std::string> split_csv_row(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.push_back("");
    return out;
}

inline constexpr const char* kManifestHeader = "id,image,mask,label,source_tag";

} // namespace detail

// Reads root/manifest.csv and checks that every referenced file exists.
inline DatasetManifest load_manifest(const std::filesystem::path& root) {
    const auto csv_path = root / "manifest.csv";
    std::ifstream in(csv_path);
    require(in.good(), "load_manifest: missing manifest file " + csv_path.string());

    DatasetManifest manifest;
    manifest.root = root;

    std::string line;
    require(static_cast<bool>(std::getline(in, line)), "load_manifest: empty manifest " + csv_path.string());
    if (!line.empty() && line.back() == '\r') line.pop_back();
    require(line == detail::kManifestHeader,
            "load_manifest: bad header in " + csv_path.string() + " (expected '" +
                detail::kManifestHeader + "')");

    std::set<std::string> seen_ids;
    int row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = detail::split_csv_row(line);
        require(fields.size() == 5, "load_manifest: row " + std::to_string(row) +
                                        " has " + std::to_string(fields.size()) +
                                        " fields, expected 5");
        ManifestEntry e;
        e.id = fields[0];
        e.image_path = fields[1];
        e.mask_path = fields[2];
        e.source_tag = fields[4];
        require(!e.id.empty(), "load_manifest: row " + std::to_string(row) + " has empty id");
        require(seen_ids.insert(e.id).second, "load_manifest: duplicate id '" + e.id + "'");
        require(!e.image_path.empty(), "load_manifest: entry '" + e.id + "' has no image path");
        if (!fields[3].empty()) {
            try {
                e.label = label_from_string(fields[3]);
            } catch (const Error& err) {
                throw Error("load_manifest: entry '" + e.id + "': " + err.what());
            }
        }
        require(std::filesystem::exists(root / e.image_path),
                "load_manifest: entry '" + e.id + "' references missing image " + e.image_path);
        if (!e.mask_path.empty())
            require(std::filesystem::exists(root / e.mask_path),
                    "load_manifest: entry '" + e.id + "' references missing mask " + e.mask_path);
        manifest.entries.push_back(std::move(e));
    }
    return manifest;
}

inline void save_manifest(const DatasetManifest& manifest) {
    const auto csv_path = manifest.root / "manifest.csv";
    std::ofstream out(csv_path);
    require(out.good(), "save_manifest: cannot write " + csv_path.string());
    out << detail::kManifestHeader << "\n";
    for (const auto& e : manifest.entries) {
        out << e.id << ',' << e.image_path << ',' << e.mask_path << ','
            << (e.label ? label_to_string(*e.label) : "") << ',' << e.source_tag << "\n";
    }
    require(out.good(), "save_manifest: write failed for " + csv_path.string());
}

// Seeded shuffle, then a prefix of round(train_fraction * N) entries becomes
// the training half. Deterministic for a fixed seed.
inline std::pair<DatasetManifest, DatasetManifest> split_dataset(const DatasetManifest& manifest,
                                                                 const SplitSpec& spec) {
    require(spec.train_fraction > 0.0 && spec.train_fraction < 1.0,
            "split_dataset: train_fraction must be in (0,1)");
    const std::size_t n = manifest.size();
    require(n >= 2, "split_dataset: need at least 2 entries");

    std::vector<ManifestEntry> shuffled = manifest.entries;
    Rng rng(spec.seed);
    rng.shuffle(shuffled);

    const std::size_t n_train =
        static_cast<std::size_t>(std::lround(spec.train_fraction * static_cast<double>(n)));
    require(n_train >= 1 && n_train < n,
            "split_dataset: split would leave one side empty (n=" + std::to_string(n) +
                ", train_fraction=" + std::to_string(spec.train_fraction) + ")");

    DatasetManifest train, eval;
    train.root = eval.root = manifest.root;
    train.entries.assign(shuffled.begin(), shuffled.begin() + static_cast<long>(n_train));
    eval.entries.assign(shuffled.begin() + static_cast<long>(n_train), shuffled.end());
    return {std::move(train), std::move(eval)};
}

inline LabeledSample load_labeled_sample(const DatasetManifest& manifest, const ManifestEntry& e) {
    require(e.label.has_value(), "entry '" + e.id + "' has no class label");
    LabeledSample s;
    s.image = read_png(manifest.root / e.image_path);
    s.label = *e.label;
    s.source_tag = e.source_tag;
    s.id = e.id;
    return s;
}

inline SegSample load_seg_sample(const DatasetManifest& manifest, const ManifestEntry& e) {
    require(!e.mask_path.empty(), "entry '" + e.id + "' has no mask");
    SegSample s;
    s.image = read_png(manifest.root / e.image_path);
    s.mask = read_mask_png(manifest.root / e.mask_path);
    require(s.mask.height == s.image.height && s.mask.width == s.image.width,
            "entry '" + e.id + "': mask dimensions differ from image");
    s.source_tag = e.source_tag;
    s.id = e.id;
    return s;
}

inline std::vector<LabeledSample> load_labeled_samples(const DatasetManifest& manifest) {
    std::vector<LabeledSample> out;
    out.reserve(manifest.size());
    for (const auto& e : manifest.entries) out.push_back(load_labeled_sample(manifest, e));
    return out;
}

inline std::vector<SegSample> load_seg_samples(const DatasetManifest& manifest) {
    std::vector<SegSample> out;
    out.reserve(manifest.size());
    for (const auto& e : manifest.entries) out.push_back(load_seg_sample(manifest, e));
    return out;
}

} // namespace dropvision
