#pragma once

// Checkpoint layout, bit-exact:
//   magic "TDCK" | u32 format version (LE) | u64 manifest byte length (LE) |
//   UTF-8 JSON manifest | raw little-endian f32 payload.
// The manifest carries the model config snapshot and the ordered parameter
// table (name, shape, float offset). Parameters are quantized f64 -> f32 on
// save and widened back on load, so a loaded model is an f32 fixed point:
// save(load(ckpt)) is byte-identical.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "transdepth/config.hpp"
#include "transdepth/model.hpp"

namespace td {

inline constexpr uint32_t kCheckpointVersion = 1;

inline void save_checkpoint(const std::string& path, const TransDepthModel& model) {
    ParamList params = model.parameters();
    nlohmann::json manifest;
    manifest["format_version"] = kCheckpointVersion;
    manifest["config"] = model_config_to_json(model.cfg);
    nlohmann::json plist = nlohmann::json::array();
    std::vector<float> payload;
    for (const auto& [name, t] : params) {
        plist.push_back({{"name", name}, {"shape", t.shape()}, {"offset", payload.size()}});
        for (double v : t.data()) payload.push_back(static_cast<float>(v));
    }
    manifest["params"] = plist;
    const std::string mtext = manifest.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot create checkpoint '" + path + "'");
    out.write("TDCK", 4);
    const uint32_t version = kCheckpointVersion;
    out.write(reinterpret_cast<const char*>(&version), sizeof(version));
    const uint64_t mlen = mtext.size();
    out.write(reinterpret_cast<const char*>(&mlen), sizeof(mlen));
    out.write(mtext.data(), static_cast<std::streamsize>(mtext.size()));
    out.write(reinterpret_cast<const char*>(payload.data()),
              static_cast<std::streamsize>(payload.size() * sizeof(float)));
    if (!out) throw IoError("write failed for checkpoint '" + path + "'");
}

inline TransDepthModel load_checkpoint(const std::string& path, uint64_t build_seed = 0) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint '" + path + "'");
    char magic[4];
    uint32_t version = 0;
    uint64_t mlen = 0;
    in.read(magic, 4);
    in.read(reinterpret_cast<char*>(&version), sizeof(version));
    in.read(reinterpret_cast<char*>(&mlen), sizeof(mlen));
    if (!in || std::memcmp(magic, "TDCK", 4) != 0) throw IoError("'" + path + "' is not a TDCK checkpoint");
    if (version != kCheckpointVersion)
        throw IoError("unsupported checkpoint version " + std::to_string(version) + " in '" + path + "'");
    std::string mtext(mlen, '\0');
    in.read(mtext.data(), static_cast<std::streamsize>(mlen));
    if (!in) throw IoError("truncated checkpoint manifest in '" + path + "'");
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(mtext);
    } catch (const nlohmann::json::exception& e) {
        throw IoError("corrupt checkpoint manifest: " + std::string(e.what()));
    }

    ModelConfig cfg = model_config_from_json(manifest.at("config"), "checkpoint.config");
    TransDepthModel model = make_model(cfg, build_seed);
    ParamList params = model.parameters();
    const auto& plist = manifest.at("params");
    if (plist.size() != params.size())
        throw IoError("checkpoint parameter count " + std::to_string(plist.size()) + " != model " +
                      std::to_string(params.size()));
    std::vector<float> payload;
    {
        std::vector<char> rest((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        if (rest.size() % sizeof(float) != 0) throw IoError("checkpoint payload not float-aligned");
        payload.resize(rest.size() / sizeof(float));
        std::memcpy(payload.data(), rest.data(), rest.size());
    }
    for (size_t i = 0; i < params.size(); ++i) {
        const auto& entry = plist.at(i);
        const std::string name = entry.at("name").get<std::string>();
        if (name != params[i].first)
            throw IoError("checkpoint parameter order mismatch: '" + name + "' vs '" + params[i].first + "'");
        const Shape shape = entry.at("shape").get<Shape>();
        Tensor t = params[i].second;
        if (shape != t.shape()) throw IoError("shape mismatch for parameter '" + name + "'");
        const uint64_t offset = entry.at("offset").get<uint64_t>();
        if (offset + t.numel() > payload.size()) throw IoError("checkpoint payload too short for '" + name + "'");
        auto& dst = t.raw_data();
        for (int64_t k = 0; k < t.numel(); ++k) dst[static_cast<size_t>(k)] = static_cast<double>(payload[offset + k]);
    }
    return model;
}

}  // namespace td
