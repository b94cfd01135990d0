#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "imle/datasets.hpp"
#include "imle/models.hpp"

namespace imle {

/// Binary generator checkpoint:
///
///   "IMLE" | u32 LE version | u64 LE metadata length | metadata (UTF-8 JSON) | f64 LE parameters
///
/// The metadata carries layer_sizes, activations, seed, outer_iteration, an optional
/// image_shape [height, width] and a free-form config echo. Parameters follow the flat
/// layout of GeneratorNet::parameters().
struct Checkpoint {
    static constexpr std::uint32_t format_version = 1;

    GeneratorNet net;
    std::uint64_t seed = 0;
    std::uint64_t outer_iteration = 0;
    std::optional<ImageShape> image_shape;
    nlohmann::json config = nlohmann::json::object();

    nlohmann::json metadata() const {
        nlohmann::json meta;
        meta["layer_sizes"] = net.layer_sizes();
        meta["activations"] = {{"hidden", "relu"}, {"output", std::string(to_string(net.output_activation()))}};
        meta["seed"] = seed;
        meta["outer_iteration"] = outer_iteration;
        meta["image_shape"] = image_shape ? nlohmann::json::array({image_shape->height, image_shape->width})
                                          : nlohmann::json(nullptr);
        meta["config"] = config;
        return meta;
    }
};

namespace detail {

template <typename T>
void append_le(std::vector<std::uint8_t>& out, T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    std::uint8_t raw[sizeof(T)];
    std::memcpy(raw, &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(T));
    out.insert(out.end(), raw, raw + sizeof(T));
}

template <typename T>
T read_le(std::span<const std::uint8_t> bytes, std::size_t offset) {
    std::uint8_t raw[sizeof(T)];
    std::memcpy(raw, bytes.data() + offset, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(T));
    T value;
    std::memcpy(&value, raw, sizeof(T));
    return value;
}

inline void write_file_bytes(const std::string& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::io, "cannot write " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::io, "short write to " + path);
}

} // namespace detail

inline std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
    const std::string meta = ckpt.metadata().dump();
    std::vector<std::uint8_t> out{'I', 'M', 'L', 'E'};
    detail::append_le<std::uint32_t>(out, Checkpoint::format_version);
    detail::append_le<std::uint64_t>(out, meta.size());
    out.insert(out.end(), meta.begin(), meta.end());
    for (const double v : ckpt.net.parameters()) detail::append_le<double>(out, v);
    return out;
}

inline Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 16) throw Error(ErrorCode::truncated_header, "checkpoint shorter than its 16-byte header");
    if (std::memcmp(bytes.data(), "IMLE", 4) != 0) throw Error(ErrorCode::bad_magic, "checkpoint must start with IMLE");
    const auto version = detail::read_le<std::uint32_t>(bytes, 4);
    if (version != Checkpoint::format_version) {
        throw Error(ErrorCode::unsupported_type, "checkpoint format version " + std::to_string(version));
    }
    const auto meta_len = detail::read_le<std::uint64_t>(bytes, 8);
    if (meta_len > bytes.size() - 16) throw Error(ErrorCode::truncated_payload, "checkpoint metadata is truncated");
    const std::string meta_text(reinterpret_cast<const char*>(bytes.data() + 16), meta_len);
    nlohmann::json meta;
    try {
        meta = nlohmann::json::parse(meta_text);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::parse, std::string("checkpoint metadata: ") + e.what());
    }
    try {
        const auto sizes = meta.at("layer_sizes").get<std::vector<std::size_t>>();
        const auto output = parse_output_activation(meta.at("activations").at("output").get<std::string>());
        if (meta.at("activations").at("hidden").get<std::string>() != "relu") {
            throw Error(ErrorCode::unsupported_type, "checkpoint hidden activation must be relu");
        }
        Checkpoint ckpt{GeneratorNet(sizes, output), 0, 0, std::nullopt, nlohmann::json::object()};
        ckpt.seed = meta.at("seed").get<std::uint64_t>();
        ckpt.outer_iteration = meta.at("outer_iteration").get<std::uint64_t>();
        if (!meta.at("image_shape").is_null()) {
            const auto hw = meta.at("image_shape").get<std::vector<std::size_t>>();
            if (hw.size() != 2) throw Error(ErrorCode::parse, "image_shape must be [height, width]");
            ckpt.image_shape = ImageShape{hw[0], hw[1]};
        }
        ckpt.config = meta.at("config");

        const std::size_t blob = bytes.size() - 16 - meta_len;
        const std::size_t expected = 8 * ckpt.net.parameter_count();
        if (blob != expected) {
            throw Error(blob < expected ? ErrorCode::truncated_payload : ErrorCode::parse,
                        "checkpoint parameter blob is " + std::to_string(blob) + " bytes, metadata implies " +
                            std::to_string(expected));
        }
        Vec64 theta(ckpt.net.parameter_count());
        for (std::size_t k = 0; k < theta.size(); ++k) theta[k] = detail::read_le<double>(bytes, 16 + meta_len + 8 * k);
        ckpt.net.set_parameters(theta);
        return ckpt;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::parse, std::string("checkpoint metadata: ") + e.what());
    }
}

inline void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    detail::write_file_bytes(path, encode_checkpoint(ckpt));
}

inline Checkpoint load_checkpoint(const std::string& path) {
    return decode_checkpoint(detail::read_file_bytes(path));
}

} // namespace imle
