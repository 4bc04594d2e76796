#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <string>
#include <utility>
#include <vector>

#include "dropvision/canny.hpp"
#include "dropvision/dataset.hpp"
#include "dropvision/error.hpp"
#include "dropvision/image.hpp"
#include "dropvision/png_io.hpp"
#include "dropvision/rng.hpp"

namespace dropvision {

struct SynthConfig {
    int image_size = 96;
    double drop_radius_lo = 0.25; // fraction of image size
    double drop_radius_hi = 0.40;
    double background_clutter = 0.3; // distractor density in [0,1]
    double noise_sigma = 3.0;
    std::uint64_t seed = 0;

    void validate() const {
        require(image_size >= 16, "SynthConfig: image_size must be >= 16");
        require(drop_radius_lo > 0.0 && drop_radius_lo <= drop_radius_hi &&
                    drop_radius_hi <= 0.5,
                "SynthConfig: drop radius range must lie within (0, 0.5]");
        require(background_clutter >= 0.0 && background_clutter <= 1.0,
                "SynthConfig: background_clutter must be in [0,1]");
        require(noise_sigma >= 0.0, "SynthConfig: noise_sigma must be non-negative");
    }
};

inline void to_json(nlohmann::json& j, const SynthConfig& c) {
    j = {{"image_size", c.image_size},
         {"drop_radius_lo", c.drop_radius_lo},
         {"drop_radius_hi", c.drop_radius_hi},
         {"background_clutter", c.background_clutter},
         {"noise_sigma", c.noise_sigma},
         {"seed", c.seed}};
}

inline void from_json(const nlohmann::json& j, SynthConfig& c) {
    c.image_size = j.value("image_size", c.image_size);
    c.drop_radius_lo = j.value("drop_radius_lo", c.drop_radius_lo);
    c.drop_radius_hi = j.value("drop_radius_hi", c.drop_radius_hi);
    c.background_clutter = j.value("background_clutter", c.background_clutter);
    c.noise_sigma = j.value("noise_sigma", c.noise_sigma);
    c.seed = j.value("seed", c.seed);
}

// Per-equipment rendering style: lighting offset, drop outline, plate finish.
struct SourceProfile {
    std::string name;
    int lighting_bias = 0;
    std::string drop_shape = "ellipse";    // ellipse | polygon | annulus
    std::string plate_texture = "plain";   // plain | ridged

    void validate() const {
        require(!name.empty(), "SourceProfile: name must be nonempty");
        require(drop_shape == "ellipse" || drop_shape == "polygon" || drop_shape == "annulus",
                "SourceProfile: drop_shape must be ellipse, polygon or annulus");
        require(plate_texture == "plain" || plate_texture == "ridged",
                "SourceProfile: plate_texture must be plain or ridged");
    }
};

inline void to_json(nlohmann::json& j, const SourceProfile& p) {
    j = {{"name", p.name},
         {"lighting_bias", p.lighting_bias},
         {"drop_shape", p.drop_shape},
         {"plate_texture", p.plate_texture}};
}

inline void from_json(const nlohmann::json& j, SourceProfile& p) {
    p.name = j.value("name", p.name);
    p.lighting_bias = j.value("lighting_bias", p.lighting_bias);
    p.drop_shape = j.value("drop_shape", p.drop_shape);
    p.plate_texture = j.value("plate_texture", p.plate_texture);
}

// Three heterogeneous defaults emulating distinct imaging setups.
inline std::vector<SourceProfile> default_source_profiles() {
    return {{"site_a", 0, "ellipse", "plain"},
            {"site_b", 14, "polygon", "ridged"},
            {"site_c", -10, "annulus", "plain"}};
}

namespace detail {

constexpr double kPlateBase = 150.0;
constexpr double kDropDelta = -35.0;
constexpr double kRimDelta = -28.0;

struct DropGeometry {
    BinaryMask mask;
    double cx = 0.0, cy = 0.0;
    double extent = 0.0; // outer radius scale in pixels
};

inline DropGeometry sample_drop_geometry(const SynthConfig& cfg, const SourceProfile& profile,
                                         Rng& rng) {
    const int size = cfg.image_size;
    DropGeometry g;
    g.mask = BinaryMask::make(size, size, 0);
    g.cx = size * (0.5 + rng.uniform(-0.05, 0.05));
    g.cy = size * (0.5 + rng.uniform(-0.05, 0.05));
    const double r = size * rng.uniform(cfg.drop_radius_lo, cfg.drop_radius_hi);
    g.extent = r;

    auto fill = [&](auto&& inside) {
        for (int y = 0; y < size; ++y)
            for (int x = 0; x < size; ++x)
                if (inside(x + 0.5, y + 0.5))
                    g.mask.values[static_cast<std::size_t>(y) * size + x] = 1;
    };

    if (profile.drop_shape == "ellipse" || profile.drop_shape == "annulus") {
        const double rx = r;
        const double ry = r * rng.uniform(0.8, 1.0);
        const bool ring = profile.drop_shape == "annulus";
        const double inner = 0.45;
        fill([&](double x, double y) {
            const double nx = (x - g.cx) / rx, ny = (y - g.cy) / ry;
            const double d2 = nx * nx + ny * ny;
            return d2 <= 1.0 && (!ring || d2 >= inner * inner);
        });
    } else {
        const int k = rng.uniform_int(5, 8);
        std::vector<double> px(k), py(k), angles(k);
        for (int i = 0; i < k; ++i)
            angles[i] = 2.0 * 3.14159265358979323846 * (i + rng.uniform(0.1, 0.9)) / k;
        for (int i = 0; i < k; ++i) {
            const double rr = r * rng.uniform(0.85, 1.0);
            px[i] = g.cx + rr * std::cos(angles[i]);
            py[i] = g.cy + rr * std::sin(angles[i]);
        }
        // Convex fill: the point must be on one side of every directed edge.
        fill([&](double x, double y) {
            for (int i = 0; i < k; ++i) {
                const int j = (i + 1) % k;
                const double cross =
                    (px[j] - px[i]) * (y - py[i]) - (py[j] - py[i]) * (x - px[i]);
                if (cross < 0.0) return false;
            }
            return true;
        });
    }
    return g;
}

// Paints a rotated bar clipped to a pixel predicate.
template <typename Keep>
inline void paint_bar(std::vector<double>& plane, int size, double cx, double cy,
                      double half_len, double half_wid, double theta, double value,
                      Keep&& keep) {
    const double c = std::cos(theta), s = std::sin(theta);
    const int reach = static_cast<int>(std::ceil(half_len + half_wid)) + 1;
    const int y0 = std::max(0, static_cast<int>(cy) - reach);
    const int y1 = std::min(size - 1, static_cast<int>(cy) + reach);
    const int x0 = std::max(0, static_cast<int>(cx) - reach);
    const int x1 = std::min(size - 1, static_cast<int>(cx) + reach);
    for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) {
            const double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
            const double u = dx * c + dy * s, v = -dx * s + dy * c;
            if (std::abs(u) <= half_len && std::abs(v) <= half_wid &&
                keep(y, x))
                plane[static_cast<std::size_t>(y) * size + x] = value;
        }
}

inline std::vector<std::size_t> mask_pixels(const BinaryMask& mask) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < mask.values.size(); ++i)
        if (mask.values[i]) out.push_back(i);
    return out;
}

} // namespace detail

// Renders one plate: textured background, clutter strictly outside the drop,
// the drop with a darkened rim, label-dependent interior content, then noise.
// Stage RNG streams are derived independently so changing one knob (say
// clutter density) leaves the other stages bitwise unchanged.
inline std::pair<SegSample, LabeledSample> generate_sample(const SynthConfig& cfg,
                                                           const SourceProfile& profile,
                                                           ClassLabel label,
                                                           std::uint64_t seed) {
    cfg.validate();
    profile.validate();
    const int size = cfg.image_size;
    Rng geom_rng(derive_seed(seed, "synth-geom"));
    Rng content_rng(derive_seed(seed, "synth-content"));
    Rng clutter_rng(derive_seed(seed, "synth-clutter"));
    Rng noise_rng(derive_seed(seed, "synth-noise"));

    const detail::DropGeometry geo = detail::sample_drop_geometry(cfg, profile, geom_rng);
    const BinaryMask& mask = geo.mask;

    // Plate background.
    const double base = detail::kPlateBase + profile.lighting_bias;
    std::vector<double> plane(static_cast<std::size_t>(size) * size, base);
    if (profile.plate_texture == "ridged") {
        const double period = geom_rng.uniform(7.0, 12.0);
        const double phase = geom_rng.uniform(0.0, 2.0 * 3.14159265358979323846);
        const double amp = 12.0;
        for (int y = 0; y < size; ++y) {
            const double ridge = amp * std::sin(2.0 * 3.14159265358979323846 * y / period + phase);
            for (int x = 0; x < size; ++x)
                plane[static_cast<std::size_t>(y) * size + x] += ridge;
        }
    }

    // Distractor shapes, clipped so they never touch the drop mask.
    const BinaryMask keep_out = detail::dilate(mask, 3);
    const int clutter_count =
        static_cast<int>(std::lround(cfg.background_clutter * 12.0));
    auto outside_mask = [&](int y, int x) {
        return !mask.values[static_cast<std::size_t>(y) * size + x];
    };
    for (int i = 0; i < clutter_count; ++i) {
        double cx = 0.0, cy = 0.0;
        bool placed = false;
        for (int attempt = 0; attempt < 40 && !placed; ++attempt) {
            cx = clutter_rng.uniform(2.0, size - 2.0);
            cy = clutter_rng.uniform(2.0, size - 2.0);
            placed = !keep_out.values[static_cast<std::size_t>(cy) * size +
                                      static_cast<std::size_t>(cx)];
        }
        const double hl = clutter_rng.uniform(0.03, 0.10) * size;
        const double hw = hl * clutter_rng.uniform(0.2, 1.0);
        const double theta = clutter_rng.uniform(0.0, 3.14159265358979323846);
        const double delta = (clutter_rng.bernoulli(0.5) ? 1.0 : -1.0) *
                             clutter_rng.uniform(40.0, 80.0);
        if (placed)
            detail::paint_bar(plane, size, cx, cy, hl, hw, theta, base + delta, outside_mask);
    }

    // Drop fluid over everything inside the mask, with a darkened rim band.
    const BinaryMask interior = detail::erode(mask, 2);
    const double drop_base = base + detail::kDropDelta;
    for (std::size_t i = 0; i < plane.size(); ++i)
        if (mask.values[i]) plane[i] = interior.values[i] ? drop_base : drop_base + detail::kRimDelta;

    // Label-dependent interior content.
    const std::vector<std::size_t> inside = detail::mask_pixels(interior);
    auto inside_interior = [&](int y, int x) {
        return interior.values[static_cast<std::size_t>(y) * size + x] != 0;
    };
    if (label == ClassLabel::Clear) {
        // Smooth interior: gentle radial shading only.
        for (const std::size_t i : inside) {
            const double y = static_cast<double>(i / size) + 0.5 - geo.cy;
            const double x = static_cast<double>(i % size) + 0.5 - geo.cx;
            plane[i] -= 10.0 * std::min(1.0, std::hypot(x, y) / geo.extent);
        }
    } else if (label == ClassLabel::Crystals && !inside.empty()) {
        const int shards = content_rng.uniform_int(4, 9);
        for (int sI = 0; sI < shards; ++sI) {
            const std::size_t at =
                inside[static_cast<std::size_t>(content_rng.uniform_int(
                    0, static_cast<int>(inside.size()) - 1))];
            const double scy = static_cast<double>(at / size) + 0.5;
            const double scx = static_cast<double>(at % size) + 0.5;
            const double hl = content_rng.uniform(0.15, 0.35) * geo.extent;
            const double hw = hl * content_rng.uniform(0.25, 0.5);
            const double theta = content_rng.uniform(0.0, 3.14159265358979323846);
            const double delta = (sI % 2 == 0 ? 1.0 : -1.0) * content_rng.uniform(60.0, 90.0);
            detail::paint_bar(plane, size, scx, scy, hl, hw, theta, drop_base + delta,
                              inside_interior);
        }
    } else if (label == ClassLabel::Precipitate && !inside.empty()) {
        const int grains = std::max(8, static_cast<int>(inside.size()) / 12);
        for (int gI = 0; gI < grains; ++gI) {
            const std::size_t at =
                inside[static_cast<std::size_t>(content_rng.uniform_int(
                    0, static_cast<int>(inside.size()) - 1))];
            const int gy = static_cast<int>(at / size), gx = static_cast<int>(at % size);
            const int radius = content_rng.uniform_int(0, 1);
            const double delta = (content_rng.bernoulli(0.5) ? 1.0 : -1.0) *
                                 content_rng.uniform(25.0, 55.0);
            for (int dy = -radius; dy <= radius; ++dy)
                for (int dx = -radius; dx <= radius; ++dx) {
                    const int ny = gy + dy, nx = gx + dx;
                    if (ny >= 0 && ny < size && nx >= 0 && nx < size &&
                        inside_interior(ny, nx))
                        plane[static_cast<std::size_t>(ny) * size + nx] = drop_base + delta;
                }
        }
    }

    // Emit three channels with independent sensor noise.
    RasterImage img = RasterImage::make(size, size, 3, 0);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            const double v = plane[static_cast<std::size_t>(y) * size + x];
            for (int c = 0; c < 3; ++c) {
                const double n =
                    cfg.noise_sigma > 0.0 ? noise_rng.normal(0.0, cfg.noise_sigma) : 0.0;
                img.at(y, x, c) = clamp_u8(static_cast<int>(std::lround(v + n)));
            }
        }

    SegSample seg;
    seg.image = img;
    seg.mask = mask;
    seg.source_tag = profile.name;
    LabeledSample labeled;
    labeled.image = std::move(img);
    labeled.label = label;
    labeled.source_tag = profile.name;
    return {std::move(seg), std::move(labeled)};
}

// Writes a balanced dataset (per_class samples per label per profile) in the
// standard layout, with the generator settings stored beside the manifest.
inline DatasetManifest generate_dataset(const SynthConfig& cfg,
                                        const std::vector<SourceProfile>& profiles,
                                        int per_class, const std::filesystem::path& root) {
    cfg.validate();
    require(per_class >= 1, "generate_dataset: per_class must be >= 1");
    require(!profiles.empty(), "generate_dataset: profiles must be nonempty");
    for (const auto& p : profiles) p.validate();
    for (std::size_t i = 0; i < profiles.size(); ++i)
        for (std::size_t j = i + 1; j < profiles.size(); ++j)
            require(profiles[i].name != profiles[j].name,
                    "generate_dataset: duplicate profile name '" + profiles[i].name + "'");

    std::error_code ec;
    std::filesystem::create_directories(root / "images", ec);
    require(!ec, "generate_dataset: cannot create " + (root / "images").string());
    std::filesystem::create_directories(root / "masks", ec);
    require(!ec, "generate_dataset: cannot create " + (root / "masks").string());

    DatasetManifest manifest;
    manifest.root = root;
    const ClassLabel labels[] = {ClassLabel::Clear, ClassLabel::Crystals,
                                 ClassLabel::Precipitate};
    for (const SourceProfile& profile : profiles)
        for (const ClassLabel label : labels)
            for (int k = 0; k < per_class; ++k) {
                std::string id = profile.name;
                id += '_';
                id += label_to_string(label);
                id += '_';
                id += std::to_string(k);
                auto [seg, labeled] =
                    generate_sample(cfg, profile, label, derive_seed(cfg.seed, id));
                ManifestEntry e;
                e.id = id;
                e.image_path = "images/" + id + ".png";
                e.mask_path = "masks/" + id + ".png";
                e.label = label;
                e.source_tag = profile.name;
                write_png(root / e.image_path, seg.image);
                write_mask_png(root / e.mask_path, seg.mask);
                manifest.entries.push_back(std::move(e));
            }
    save_manifest(manifest);

    nlohmann::json settings = {{"config", cfg}, {"profiles", profiles}};
    std::ofstream out(root / "synthconfig.json");
    require(out.good(), "generate_dataset: cannot write synthconfig.json under " + root.string());
    out << settings.dump(2) << "\n";
    require(out.good(), "generate_dataset: write failed for synthconfig.json");
    return manifest;
}

} // namespace dropvision
