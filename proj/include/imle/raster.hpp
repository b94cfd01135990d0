#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "imle/datasets.hpp"

namespace imle {

/// 8-bit intensity of a value in [0,1]: round(255 * v), halves away from zero, after
/// clamping to [0,1].
inline std::uint8_t to_pixel(double v) noexcept {
    const double clamped = std::clamp(v, 0.0, 1.0);
    return static_cast<std::uint8_t>(std::lround(255.0 * clamped));
}

/// Binary PPM (P6) tiling images row-major, `cols` tiles per row, no gutter. Grayscale is
/// replicated to RGB; tiles past the last image stay black.
inline std::vector<std::uint8_t> encode_ppm_grid(std::span<const Vec64> images, ImageShape shape, std::size_t cols) {
    detail::require(!images.empty(), ErrorCode::invalid_argument, "ppm grid needs at least one image");
    detail::require(cols >= 1, ErrorCode::invalid_argument, "ppm grid needs cols >= 1");
    for (const auto& img : images) detail::require_dims(img.size(), shape.pixels(), "ppm grid image");
    const std::size_t rows = (images.size() + cols - 1) / cols;
    const std::size_t width = cols * shape.width;
    const std::size_t height = rows * shape.height;
    const std::string header = "P6\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    const std::size_t body = out.size();
    out.resize(body + 3 * width * height, 0);
    for (std::size_t n = 0; n < images.size(); ++n) {
        const std::size_t tile_r = n / cols;
        const std::size_t tile_c = n % cols;
        for (std::size_t y = 0; y < shape.height; ++y) {
            for (std::size_t x = 0; x < shape.width; ++x) {
                const std::uint8_t p = to_pixel(images[n][y * shape.width + x]);
                const std::size_t px = tile_c * shape.width + x;
                const std::size_t py = tile_r * shape.height + y;
                std::uint8_t* dst = out.data() + body + 3 * (py * width + px);
                dst[0] = dst[1] = dst[2] = p;
            }
        }
    }
    return out;
}

} // namespace imle
