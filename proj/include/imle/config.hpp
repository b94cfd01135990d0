#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "imle/datasets.hpp"
#include "imle/imle.hpp"
#include "imle/models.hpp"

namespace imle {

/// Where training data comes from. Relative paths resolve against the config file's
/// directory.
struct DataSource {
    std::string format = "ring"; // ring | idx | csv
    std::string path;
    bool has_header = false;
    std::size_t limit = 0; // keep the first `limit` rows; 0 keeps all
    // ring only
    std::size_t k = 8;
    double radius = 5.0;
    double stddev = 0.1;
    std::size_t n = 512;
    std::optional<std::uint64_t> seed;
};

/// Parsed `train` configuration. See configs/train.schema.json.
struct TrainRunConfig {
    DataSource data;
    std::string preset = "ring";
    std::vector<std::size_t> layer_sizes; // explicit architecture, overrides the preset
    std::optional<OutputActivation> output_activation;
    ImleConfig imle;
    std::uint64_t seed = 0;
    std::filesystem::path out_dir = "run";
    std::size_t checkpoint_every = 0; // 0: final checkpoint only
    std::size_t snapshot_samples = 0; // > 0: PPM grid of fixed-latent samples at each checkpoint
    std::size_t snapshot_cols = 8;
    std::optional<ImageShape> image_shape;
    nlohmann::json echo; // the config as read, echoed into checkpoints
};

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& obj, const std::set<std::string>& allowed,
                                const std::string& where) {
    if (!obj.is_object()) throw Error(ErrorCode::config, where + " must be a JSON object");
    for (const auto& [key, _] : obj.items()) {
        if (!allowed.count(key)) throw Error(ErrorCode::config, "unknown key '" + key + "' in " + where);
    }
}

template <typename T>
T json_get(const nlohmann::json& obj, const char* key, const std::string& where) {
    try {
        return obj.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw Error(ErrorCode::config, where + "." + key + " has the wrong type");
    }
}

template <typename T>
void json_read(const nlohmann::json& obj, const char* key, T& out, const std::string& where) {
    if (obj.contains(key)) out = json_get<T>(obj, key, where);
}

template <typename T>
void json_read(const nlohmann::json& obj, const char* key, std::optional<T>& out, const std::string& where) {
    if (obj.contains(key)) out = json_get<T>(obj, key, where);
}

inline ImageShape parse_image_shape(const nlohmann::json& v, const std::string& where) {
    std::vector<std::size_t> hw;
    try {
        hw = v.get<std::vector<std::size_t>>();
    } catch (const nlohmann::json::exception&) {
        throw Error(ErrorCode::config, where + " must be [height, width]");
    }
    if (hw.size() != 2 || hw[0] == 0 || hw[1] == 0) throw Error(ErrorCode::config, where + " must be [height, width]");
    return {hw[0], hw[1]};
}

} // namespace detail

inline TrainRunConfig parse_train_config(const nlohmann::json& j, const std::filesystem::path& base_dir = {}) {
    using detail::json_read;
    detail::reject_unknown_keys(j,
                                {"data", "model", "train", "seed", "out_dir", "checkpoint_every",
                                 "snapshot_samples", "snapshot_cols", "image_shape"},
                                "config");
    TrainRunConfig cfg;
    cfg.echo = j;
    if (!j.contains("data")) throw Error(ErrorCode::config, "config needs a 'data' block");

    const auto& d = j.at("data");
    detail::reject_unknown_keys(d, {"format", "path", "has_header", "limit", "k", "radius", "std", "n", "seed"},
                                "data");
    json_read(d, "format", cfg.data.format, "data");
    json_read(d, "path", cfg.data.path, "data");
    json_read(d, "has_header", cfg.data.has_header, "data");
    json_read(d, "limit", cfg.data.limit, "data");
    json_read(d, "k", cfg.data.k, "data");
    json_read(d, "radius", cfg.data.radius, "data");
    json_read(d, "std", cfg.data.stddev, "data");
    json_read(d, "n", cfg.data.n, "data");
    json_read(d, "seed", cfg.data.seed, "data");
    if (cfg.data.format == "idx" || cfg.data.format == "csv") {
        if (cfg.data.path.empty()) throw Error(ErrorCode::config, "data.path is required for format " + cfg.data.format);
        std::filesystem::path p(cfg.data.path);
        if (p.is_relative() && !base_dir.empty()) cfg.data.path = (base_dir / p).lexically_normal().string();
    } else if (cfg.data.format != "ring") {
        throw Error(ErrorCode::config, "data.format must be ring, idx or csv (got '" + cfg.data.format + "')");
    }

    if (j.contains("model")) {
        const auto& m = j.at("model");
        detail::reject_unknown_keys(m, {"preset", "layer_sizes", "output_activation"}, "model");
        json_read(m, "preset", cfg.preset, "model");
        json_read(m, "layer_sizes", cfg.layer_sizes, "model");
        if (m.contains("output_activation")) {
            cfg.output_activation = parse_output_activation(detail::json_get<std::string>(m, "output_activation", "model"));
        }
    }

    if (j.contains("train")) {
        const auto& t = j.at("train");
        detail::reject_unknown_keys(t,
                                    {"m", "K", "L", "eta", "batch_size", "minibatch_size", "optimizer",
                                     "index_structure", "stale_matching", "adam_beta1", "adam_beta2",
                                     "adam_epsilon"},
                                    "train");
        json_read(t, "m", cfg.imle.m, "train");
        json_read(t, "K", cfg.imle.outer_iterations, "train");
        json_read(t, "L", cfg.imle.inner_iterations, "train");
        json_read(t, "eta", cfg.imle.eta, "train");
        json_read(t, "batch_size", cfg.imle.batch_size, "train");
        json_read(t, "minibatch_size", cfg.imle.minibatch_size, "train");
        if (t.contains("optimizer")) cfg.imle.optimizer = parse_optimizer(detail::json_get<std::string>(t, "optimizer", "train"));
        if (t.contains("index_structure")) {
            cfg.imle.index_structure = parse_index_structure(detail::json_get<std::string>(t, "index_structure", "train"));
        }
        json_read(t, "stale_matching", cfg.imle.stale_matching, "train");
        json_read(t, "adam_beta1", cfg.imle.adam_beta1, "train");
        json_read(t, "adam_beta2", cfg.imle.adam_beta2, "train");
        json_read(t, "adam_epsilon", cfg.imle.adam_epsilon, "train");
    }

    json_read(j, "seed", cfg.seed, "config");
    if (j.contains("out_dir")) {
        std::filesystem::path p(detail::json_get<std::string>(j, "out_dir", "config"));
        cfg.out_dir = p.is_relative() && !base_dir.empty() ? base_dir / p : p;
    }
    json_read(j, "checkpoint_every", cfg.checkpoint_every, "config");
    json_read(j, "snapshot_samples", cfg.snapshot_samples, "config");
    json_read(j, "snapshot_cols", cfg.snapshot_cols, "config");
    if (j.contains("image_shape")) cfg.image_shape = detail::parse_image_shape(j.at("image_shape"), "image_shape");
    if (cfg.snapshot_cols == 0) throw Error(ErrorCode::config, "snapshot_cols must be >= 1");
    return cfg;
}

inline TrainRunConfig load_train_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::io, "cannot open config " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::config, "config " + path.string() + " is not valid JSON: " + e.what());
    }
    return parse_train_config(j, path.parent_path());
}

/// Loads (or generates) the training set. The ring generator uses `fallback_seed` unless
/// the data block pins its own seed.
inline Dataset load_training_data(const TrainRunConfig& cfg, std::uint64_t fallback_seed) {
    const DataSource& src = cfg.data;
    Dataset data = [&] {
        if (src.format == "ring") {
            RngStream rng(src.seed.value_or(fallback_seed), 0xda7a);
            return gen_ring_mixture(rng, src.k, src.radius, src.stddev, src.n);
        }
        if (!std::filesystem::is_regular_file(src.path)) {
            throw Error(ErrorCode::io, "data file not found: " + src.path);
        }
        return src.format == "idx" ? load_idx(src.path) : load_csv(src.path, src.has_header);
    }();
    if (src.limit > 0 && src.limit < data.size()) data = data.slice(0, src.limit);
    if (cfg.image_shape) data.set_image_shape(*cfg.image_shape);
    return data;
}

/// Generator for the config: explicit layer_sizes win over the preset; the preset's output
/// layer is sized to the data.
inline NetPreset resolve_architecture(const TrainRunConfig& cfg, std::size_t data_dim) {
    NetPreset arch;
    if (!cfg.layer_sizes.empty()) {
        arch.layer_sizes = cfg.layer_sizes;
        arch.output = OutputActivation::identity;
        if (arch.layer_sizes.back() != data_dim) {
            throw Error(ErrorCode::config, "model.layer_sizes ends in " + std::to_string(arch.layer_sizes.back()) +
                                               " but the data has dimension " + std::to_string(data_dim));
        }
    } else {
        arch = net_preset(cfg.preset, data_dim);
    }
    if (cfg.output_activation) arch.output = *cfg.output_activation;
    return arch;
}

} // namespace imle
