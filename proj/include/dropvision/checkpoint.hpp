#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <string>
#include <utility>
#include <vector>

#include "dropvision/error.hpp"
#include "dropvision/layers.hpp"

namespace dropvision {

// Single-file model container: magic, format version, JSON header describing
// kind/config/tensor index, then raw little-endian float32 payloads in index
// order.
inline constexpr char kCheckpointMagic[4] = {'D', 'V', 'C', 'P'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointTensor {
    std::string name;
    std::vector<int> shape;
    std::vector<float> data;
    std::size_t numel() const {
        std::size_t total = 1;
        for (int d : shape) total *= static_cast<std::size_t>(d);
        return total;
    }
};

struct Checkpoint {
    std::string kind;
    nlohmann::json config;
    std::vector<CheckpointTensor> tensors;

    const CheckpointTensor* find(const std::string& name) const {
        for (const auto& t : tensors)
            if (t.name == name) return &t;
        return nullptr;
    }
};

inline void save_checkpoint(const std::filesystem::path& path, const std::string& kind,
                            const nlohmann::json& config,
                            const std::vector<nn::Param*>& params) {
    nlohmann::json header;
    header["kind"] = kind;
    header["config"] = config;
    auto& index = header["tensors"] = nlohmann::json::array();
    for (const nn::Param* p : params)
        index.push_back({{"name", p->name}, {"shape", p->shape}});
    const std::string head = header.dump();

    std::ofstream out(path, std::ios::binary);
    require(out.good(), "save_checkpoint: cannot open '" + path.string() + "' for writing");
    out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
    const std::uint32_t version = kCheckpointVersion;
    out.write(reinterpret_cast<const char*>(&version), sizeof(version));
    const std::uint64_t head_len = head.size();
    out.write(reinterpret_cast<const char*>(&head_len), sizeof(head_len));
    out.write(head.data(), static_cast<std::streamsize>(head.size()));
    for (const nn::Param* p : params)
        out.write(reinterpret_cast<const char*>(p->w.data()),
                  static_cast<std::streamsize>(p->w.size() * sizeof(float)));
    require(out.good(), "save_checkpoint: short write to '" + path.string() + "'");
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), "load_checkpoint: cannot open '" + path.string() + "'");
    char magic[4];
    in.read(magic, sizeof(magic));
    require(in.good() && std::memcmp(magic, kCheckpointMagic, 4) == 0,
            "load_checkpoint: '" + path.string() + "' is not a model checkpoint");
    std::uint32_t version = 0;
    in.read(reinterpret_cast<char*>(&version), sizeof(version));
    require(in.good() && version == kCheckpointVersion,
            "load_checkpoint: unsupported format version " + std::to_string(version) +
                " (expected " + std::to_string(kCheckpointVersion) + ")");
    std::uint64_t head_len = 0;
    in.read(reinterpret_cast<char*>(&head_len), sizeof(head_len));
    require(in.good(), "load_checkpoint: truncated header length");
    std::string head(head_len, '\0');
    in.read(head.data(), static_cast<std::streamsize>(head_len));
    require(in.good(), "load_checkpoint: truncated header");

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(head);
    } catch (const nlohmann::json::exception& e) {
        throw Error("load_checkpoint: malformed header: " + std::string(e.what()));
    }
    Checkpoint ckpt;
    ckpt.kind = header.at("kind").get<std::string>();
    ckpt.config = header.value("config", nlohmann::json::object());
    for (const auto& entry : header.at("tensors")) {
        CheckpointTensor t;
        t.name = entry.at("name").get<std::string>();
        t.shape = entry.at("shape").get<std::vector<int>>();
        t.data.resize(t.numel());
        in.read(reinterpret_cast<char*>(t.data.data()),
                static_cast<std::streamsize>(t.data.size() * sizeof(float)));
        require(in.good(), "load_checkpoint: truncated payload for tensor '" + t.name + "'");
        ckpt.tensors.push_back(std::move(t));
    }
    return ckpt;
}

// Restores every parameter from the checkpoint; the parameter set must match
// the checkpoint index exactly.
inline void apply_checkpoint(const Checkpoint& ckpt, const std::vector<nn::Param*>& params) {
    for (nn::Param* p : params) {
        const CheckpointTensor* t = ckpt.find(p->name);
        require(t != nullptr, "apply_checkpoint: checkpoint has no tensor '" + p->name + "'");
        require(t->shape == p->shape, "apply_checkpoint: shape mismatch for layer '" + p->name +
                                          "' (checkpoint tensor does not fit)");
        p->w = t->data;
    }
}

// Partial initialization from a pretrained file: copies tensors whose names
// match, skipping parameters under skip_prefix (the fresh classification
// head). Returns the number of tensors loaded.
inline int load_pretrained(const Checkpoint& ckpt, const std::vector<nn::Param*>& params,
                           const std::string& skip_prefix = "head.") {
    int loaded = 0;
    for (nn::Param* p : params) {
        if (!skip_prefix.empty() && p->name.rfind(skip_prefix, 0) == 0) continue;
        const CheckpointTensor* t = ckpt.find(p->name);
        if (t == nullptr) continue;
        require(t->shape == p->shape, "load_pretrained: shape mismatch for layer '" + p->name +
                                          "' (pretrained weights do not match the architecture)");
        p->w = t->data;
        ++loaded;
    }
    return loaded;
}

} // namespace dropvision
