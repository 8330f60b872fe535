#pragma once

// Run configuration: JSON in, strictly validated (any unknown key is an
// error), with defaults matching the toy training profile.

#include <fstream>
#include <set>
#include <string>

#include "json.hpp"
#include "transdepth/model.hpp"

namespace td {

struct TrainingConfig {
    double lr = 1e-4;
    double weight_decay = 0.01;
    int batch_size = 2;
    int steps = 500;
    uint64_t seed = 42;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    int checkpoint_interval = 0;  // 0 = final checkpoint only

    void validate() const {
        if (lr <= 0.0) throw ConfigError("training: lr must be positive");
        if (weight_decay < 0.0) throw ConfigError("training: weight_decay must be >= 0");
        if (batch_size < 1) throw ConfigError("training: batch_size must be >= 1");
        if (steps < 0) throw ConfigError("training: steps must be >= 0");
        if (checkpoint_interval < 0) throw ConfigError("training: checkpoint_interval must be >= 0");
    }
};

enum class DataSource { synth, directory };

struct DataConfig {
    DataSource source = DataSource::synth;
    int image_h = 64;
    int image_w = 64;
    int n_train = 8;
    int n_eval = 4;
    std::string path;  // directory source only

    void validate() const {
        if (image_h % 32 != 0 || image_w % 32 != 0 || image_h <= 0 || image_w <= 0)
            throw ConfigError("data: image dims must be positive multiples of 32");
        if (n_train < 1 || n_eval < 0) throw ConfigError("data: need n_train >= 1, n_eval >= 0");
        if (source == DataSource::directory && path.empty()) throw ConfigError("data: directory source needs a path");
    }
};

struct RunConfig {
    ModelConfig model;
    TrainingConfig training;
    DataConfig data;

    void validate() const {
        model.validate();
        training.validate();
        data.validate();
    }
};

namespace detail {

// Tracks consumed keys; leftovers are config errors with their JSON path.
class StrictObject {
public:
    StrictObject(const nlohmann::json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(path_ + " must be a JSON object");
    }

    bool has(const std::string& key) {
        if (j_.contains(key)) {
            seen_.insert(key);
            return true;
        }
        return false;
    }

    const nlohmann::json& at(const std::string& key) {
        seen_.insert(key);
        return j_.at(key);
    }

    template <class T>
    void load(const std::string& key, T& out) {
        if (!j_.contains(key)) return;
        seen_.insert(key);
        try {
            out = j_.at(key).get<T>();
        } catch (const nlohmann::json::exception&) {
            throw ConfigError("bad value type for " + path_ + "." + key);
        }
    }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!seen_.count(it.key())) throw ConfigError("unknown key '" + path_ + "." + it.key() + "'");
    }

private:
    const nlohmann::json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

template <size_t N>
inline void load_int_array(StrictObject& o, const std::string& key, std::array<int, N>& out, const std::string& path) {
    if (!o.has(key)) return;
    const auto& arr = o.at(key);
    if (!arr.is_array() || arr.size() != N)
        throw ConfigError(path + "." + key + " must be an array of " + std::to_string(N) + " ints");
    for (size_t i = 0; i < N; ++i) out[i] = arr[i].get<int>();
}

}  // namespace detail

inline BackboneConfig backbone_config_from_json(const nlohmann::json& j, const std::string& path) {
    BackboneConfig cfg;
    detail::StrictObject o(j, path);
    o.load("stem_channels", cfg.stem_channels);
    detail::load_int_array(o, "stage_channels", cfg.stage_channels, path);
    detail::load_int_array(o, "blocks_per_stage", cfg.blocks_per_stage, path);
    o.finish();
    return cfg;
}

inline TransformerConfig transformer_config_from_json(const nlohmann::json& j, const std::string& path) {
    TransformerConfig cfg;
    detail::StrictObject o(j, path);
    o.load("enabled", cfg.enabled);
    o.load("num_layers", cfg.num_layers);
    o.load("hidden", cfg.hidden);
    o.load("num_heads", cfg.num_heads);
    o.load("head_dim", cfg.head_dim);
    o.load("mlp_ratio", cfg.mlp_ratio);
    o.load("patch_kernel", cfg.patch_kernel);
    o.load("pre_ln", cfg.pre_ln);
    if (o.has("insertion")) cfg.insertion = parse_insertion(o.at("insertion").get<std::string>());
    o.finish();
    return cfg;
}

inline AGDConfig agd_config_from_json(const nlohmann::json& j, const std::string& path) {
    AGDConfig cfg;
    detail::StrictObject o(j, path);
    o.load("enabled", cfg.enabled);
    o.load("receiving_scale", cfg.receiving_scale);
    o.load("common_width", cfg.common_width);
    o.load("kernel_size", cfg.kernel_size);
    if (o.has("emitting_scales")) {
        cfg.emitting_scales.clear();
        for (const auto& v : o.at("emitting_scales")) cfg.emitting_scales.push_back(v.get<int>());
    }
    if (o.has("message_source")) cfg.message_source = parse_message_source(o.at("message_source").get<std::string>());
    o.finish();
    return cfg;
}

inline LossConfig loss_config_from_json(const nlohmann::json& j, const std::string& path) {
    LossConfig cfg;
    detail::StrictObject o(j, path);
    o.load("lambda", cfg.lambda);
    o.load("alpha", cfg.alpha);
    o.load("min_depth", cfg.min_depth);
    o.load("max_depth", cfg.max_depth);
    o.finish();
    return cfg;
}

inline ModelConfig model_config_from_json(const nlohmann::json& j, const std::string& path = "model") {
    ModelConfig cfg;
    detail::StrictObject o(j, path);
    if (o.has("task")) cfg.task = parse_task(o.at("task").get<std::string>());
    if (o.has("backbone")) cfg.backbone = backbone_config_from_json(o.at("backbone"), path + ".backbone");
    if (o.has("transformer"))
        cfg.transformer = transformer_config_from_json(o.at("transformer"), path + ".transformer");
    if (o.has("agd")) cfg.agd = agd_config_from_json(o.at("agd"), path + ".agd");
    if (o.has("loss")) cfg.loss = loss_config_from_json(o.at("loss"), path + ".loss");
    o.finish();
    return cfg;
}

inline nlohmann::json model_config_to_json(const ModelConfig& cfg) {
    nlohmann::json j;
    j["task"] = task_name(cfg.task);
    j["backbone"] = {{"stem_channels", cfg.backbone.stem_channels},
                     {"stage_channels", cfg.backbone.stage_channels},
                     {"blocks_per_stage", cfg.backbone.blocks_per_stage}};
    j["transformer"] = {{"enabled", cfg.transformer.enabled},
                        {"num_layers", cfg.transformer.num_layers},
                        {"hidden", cfg.transformer.hidden},
                        {"num_heads", cfg.transformer.num_heads},
                        {"head_dim", cfg.transformer.head_dim},
                        {"mlp_ratio", cfg.transformer.mlp_ratio},
                        {"patch_kernel", cfg.transformer.patch_kernel},
                        {"insertion", insertion_name(cfg.transformer.insertion)},
                        {"pre_ln", cfg.transformer.pre_ln}};
    j["agd"] = {{"enabled", cfg.agd.enabled},
                {"receiving_scale", cfg.agd.receiving_scale},
                {"emitting_scales", cfg.agd.emitting_scales},
                {"common_width", cfg.agd.common_width},
                {"kernel_size", cfg.agd.kernel_size},
                {"message_source", message_source_name(cfg.agd.message_source)}};
    j["loss"] = {{"lambda", cfg.loss.lambda},
                 {"alpha", cfg.loss.alpha},
                 {"min_depth", cfg.loss.min_depth},
                 {"max_depth", cfg.loss.max_depth}};
    return j;
}

inline RunConfig run_config_from_json(const nlohmann::json& j) {
    RunConfig cfg;
    detail::StrictObject o(j, "config");
    if (o.has("model")) cfg.model = model_config_from_json(o.at("model"));
    if (o.has("training")) {
        detail::StrictObject t(o.at("training"), "training");
        t.load("lr", cfg.training.lr);
        t.load("weight_decay", cfg.training.weight_decay);
        t.load("batch_size", cfg.training.batch_size);
        t.load("steps", cfg.training.steps);
        t.load("seed", cfg.training.seed);
        t.load("adam_beta1", cfg.training.adam_beta1);
        t.load("adam_beta2", cfg.training.adam_beta2);
        t.load("adam_eps", cfg.training.adam_eps);
        t.load("checkpoint_interval", cfg.training.checkpoint_interval);
        t.finish();
    }
    if (o.has("data")) {
        detail::StrictObject d(o.at("data"), "data");
        if (d.has("source")) {
            const std::string s = d.at("source").get<std::string>();
            if (s == "synth")
                cfg.data.source = DataSource::synth;
            else if (s == "directory")
                cfg.data.source = DataSource::directory;
            else
                throw ConfigError("data.source must be 'synth' or 'directory', got '" + s + "'");
        }
        d.load("image_h", cfg.data.image_h);
        d.load("image_w", cfg.data.image_w);
        d.load("n_train", cfg.data.n_train);
        d.load("n_eval", cfg.data.n_eval);
        d.load("path", cfg.data.path);
        d.finish();
    }
    o.finish();
    cfg.validate();
    return cfg;
}

inline RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("invalid JSON in '" + path + "': " + e.what());
    }
    return run_config_from_json(j);
}

}  // namespace td
