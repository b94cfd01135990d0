#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "imle/numerics.hpp"

namespace imle {

/// Per-dimension affine map x' = (x - offset) / scale.
struct Normalization {
    Vec64 offset;
    Vec64 scale;
};

/// Height and width of image-valued examples (row-major raster).
struct ImageShape {
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t pixels() const noexcept { return height * width; }
    friend bool operator==(const ImageShape&, const ImageShape&) = default;
};

/// Ordered collection of equal-dimension examples.
class Dataset {
public:
    Dataset(std::vector<Vec64> points, std::string source_tag)
        : points_(std::move(points)), source_tag_(std::move(source_tag)) {
        detail::require(!points_.empty(), ErrorCode::invalid_argument, "Dataset needs n >= 1");
        dim_ = points_.front().size();
        detail::require(dim_ >= 1, ErrorCode::invalid_argument, "Dataset needs dim >= 1");
        for (const auto& p : points_) {
            detail::require_dims(p.size(), dim_, "Dataset point");
            detail::require(all_finite(p), ErrorCode::non_finite, "Dataset point is not finite");
        }
    }

    std::size_t size() const noexcept { return points_.size(); }
    std::size_t dim() const noexcept { return dim_; }
    const std::vector<Vec64>& points() const noexcept { return points_; }
    const Vec64& operator[](std::size_t i) const noexcept { return points_[i]; }
    const std::string& source_tag() const noexcept { return source_tag_; }

    const std::optional<Normalization>& normalization() const noexcept { return normalization_; }
    const std::optional<ImageShape>& image_shape() const noexcept { return image_shape_; }

    void set_image_shape(ImageShape shape) {
        detail::require_dims(shape.pixels(), dim_, "Dataset image shape");
        image_shape_ = shape;
    }

    /// Rows [first, first + count) as a new dataset with the same metadata.
    Dataset slice(std::size_t first, std::size_t count) const {
        detail::require(first + count <= size() && count > 0, ErrorCode::invalid_argument,
                        "Dataset::slice out of range");
        Dataset out(std::vector<Vec64>(points_.begin() + static_cast<std::ptrdiff_t>(first),
                                       points_.begin() + static_cast<std::ptrdiff_t>(first + count)),
                    source_tag_);
        out.normalization_ = normalization_;
        out.image_shape_ = image_shape_;
        return out;
    }

    /// Applies norm; the result remembers it so it can be inverted.
    Dataset normalized(const Normalization& norm) const {
        detail::require(!normalization_, ErrorCode::invalid_argument,
                        "Dataset is already normalized");
        detail::require_dims(norm.offset.size(), dim_, "Normalization offset");
        detail::require_dims(norm.scale.size(), dim_, "Normalization scale");
        for (double s : norm.scale) {
            detail::require(s != 0.0 && std::isfinite(s), ErrorCode::invalid_argument,
                            "Normalization scale must be finite and nonzero");
        }
        std::vector<Vec64> pts = points_;
        for (auto& p : pts) {
            for (std::size_t k = 0; k < dim_; ++k) p[k] = (p[k] - norm.offset[k]) / norm.scale[k];
        }
        Dataset out(std::move(pts), source_tag_);
        out.normalization_ = norm;
        out.image_shape_ = image_shape_;
        return out;
    }

    Dataset denormalized() const {
        detail::require(normalization_.has_value(), ErrorCode::invalid_argument,
                        "Dataset carries no normalization");
        const auto& norm = *normalization_;
        std::vector<Vec64> pts = points_;
        for (auto& p : pts) {
            for (std::size_t k = 0; k < dim_; ++k) p[k] = p[k] * norm.scale[k] + norm.offset[k];
        }
        Dataset out(std::move(pts), source_tag_);
        out.image_shape_ = image_shape_;
        return out;
    }

private:
    std::vector<Vec64> points_;
    std::size_t dim_ = 0;
    std::string source_tag_;
    std::optional<Normalization> normalization_;
    std::optional<ImageShape> image_shape_;
};

/// Per-dimension mean/std standardization. Constant dimensions get scale 1.
inline Normalization fit_standardization(const Dataset& data) {
    const std::size_t d = data.dim();
    Normalization norm{Vec64(d, 0.0), Vec64(d, 0.0)};
    for (const auto& p : data.points()) {
        for (std::size_t k = 0; k < d; ++k) norm.offset[k] += p[k];
    }
    const double n = static_cast<double>(data.size());
    for (auto& o : norm.offset) o /= n;
    for (const auto& p : data.points()) {
        for (std::size_t k = 0; k < d; ++k) {
            const double diff = p[k] - norm.offset[k];
            norm.scale[k] += diff * diff;
        }
    }
    for (auto& s : norm.scale) {
        s = std::sqrt(s / n);
        if (s == 0.0) s = 1.0;
    }
    return norm;
}

/// Isotropic Gaussian mixture with a shared standard deviation.
struct MixtureSpec {
    std::vector<Vec64> means;
    double component_std = 1.0;
    std::vector<double> weights;

    std::size_t dim() const noexcept { return means.empty() ? 0 : means.front().size(); }
    std::size_t components() const noexcept { return means.size(); }

    void validate() const {
        detail::require(!means.empty(), ErrorCode::invalid_argument, "MixtureSpec needs components");
        detail::require(means.size() == weights.size(), ErrorCode::invalid_argument,
                        "MixtureSpec: one weight per component");
        detail::require(component_std > 0.0 && std::isfinite(component_std), ErrorCode::invalid_argument,
                        "MixtureSpec: std must be positive");
        double total = 0.0;
        for (std::size_t c = 0; c < means.size(); ++c) {
            detail::require_dims(means[c].size(), means.front().size(), "MixtureSpec means");
            detail::require(weights[c] >= 0.0, ErrorCode::invalid_argument,
                            "MixtureSpec: negative weight");
            total += weights[c];
        }
        detail::require(std::abs(total - 1.0) <= 1e-12, ErrorCode::invalid_argument,
                        "MixtureSpec: weights must sum to 1");
    }

    std::string describe() const {
        std::ostringstream os;
        os.precision(17);
        os << "mixture(k=" << means.size() << ",std=" << component_std << ",means=[";
        for (std::size_t c = 0; c < means.size(); ++c) {
            os << (c ? ";" : "") << "(";
            for (std::size_t k = 0; k < means[c].size(); ++k) os << (k ? "," : "") << means[c][k];
            os << ")";
        }
        os << "],weights=[";
        for (std::size_t c = 0; c < weights.size(); ++c) os << (c ? "," : "") << weights[c];
        os << "])";
        return os.str();
    }
};

/// k equal-weight components with means equally spaced on a circle in 2-D.
inline MixtureSpec ring_mixture_spec(std::size_t k, double radius, double stddev) {
    detail::require(k >= 1, ErrorCode::invalid_argument, "ring mixture needs k >= 1");
    MixtureSpec spec;
    spec.component_std = stddev;
    for (std::size_t c = 0; c < k; ++c) {
        const double angle = 2.0 * std::numbers::pi * static_cast<double>(c) / static_cast<double>(k);
        spec.means.push_back({radius * std::cos(angle), radius * std::sin(angle)});
        spec.weights.push_back(1.0 / static_cast<double>(k));
    }
    spec.validate();
    return spec;
}

/// Draws one point from spec; returns the component index through `component` when given.
inline Vec64 sample_mixture(const MixtureSpec& spec, RngStream& rng,
                            std::size_t* component = nullptr) {
    double u = rng.uniform();
    std::size_t c = 0;
    for (; c + 1 < spec.weights.size(); ++c) {
        if (u < spec.weights[c]) break;
        u -= spec.weights[c];
    }
    if (component) *component = c;
    Vec64 x = spec.means[c];
    for (auto& v : x) v += spec.component_std * rng.normal();
    return x;
}

inline Dataset gen_ring_mixture(RngStream& rng, std::size_t k, double radius, double stddev,
                                std::size_t n) {
    detail::require(stddev > 0.0, ErrorCode::invalid_argument, "gen_ring_mixture: std must be > 0");
    detail::require(n >= k, ErrorCode::invalid_argument, "gen_ring_mixture: n must be >= k");
    const MixtureSpec spec = ring_mixture_spec(k, radius, stddev);
    std::vector<Vec64> pts;
    pts.reserve(n);
    for (std::size_t i = 0; i < n; ++i) pts.push_back(sample_mixture(spec, rng));
    return Dataset(std::move(pts), "ring:" + spec.describe());
}

// ---------------------------------------------------------------------------
// IDX (MNIST distribution format)
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::io, "cannot open " + path);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::uint32_t read_be32(const std::uint8_t* p) noexcept {
    return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) |
           (std::uint32_t{p[2]} << 8) | std::uint32_t{p[3]};
}

} // namespace detail

/// Parses an in-memory IDX file holding unsigned bytes. The first dimension indexes
/// examples; remaining dimensions are flattened row-major and scaled by 1/255.
inline Dataset parse_idx(std::span<const std::uint8_t> bytes, const std::string& tag = "idx") {
    if (bytes.size() < 4) {
        throw Error(ErrorCode::truncated_header,
                    "at offset " + std::to_string(bytes.size()) + ": need 4 magic bytes");
    }
    if (bytes[0] != 0 || bytes[1] != 0) {
        throw Error(ErrorCode::bad_magic, "at offset 0: first two bytes must be zero");
    }
    if (bytes[2] != 0x08) {
        std::ostringstream os;
        os << "at offset 2: element type 0x" << std::hex << int(bytes[2]) << " (only 0x08 supported)";
        throw Error(ErrorCode::unsupported_type, os.str());
    }
    const std::size_t rank = bytes[3];
    if (rank == 0) throw Error(ErrorCode::bad_magic, "at offset 3: rank must be >= 1");
    const std::size_t header = 4 + 4 * rank;
    if (bytes.size() < header) {
        throw Error(ErrorCode::truncated_header,
                    "at offset " + std::to_string(bytes.size()) + ": header needs " +
                        std::to_string(header) + " bytes");
    }
    std::vector<std::size_t> dims(rank);
    for (std::size_t r = 0; r < rank; ++r) dims[r] = detail::read_be32(bytes.data() + 4 + 4 * r);
    const std::size_t n = dims[0];
    std::size_t dim = 1;
    for (std::size_t r = 1; r < rank; ++r) dim *= dims[r];
    if (n == 0 || dim == 0) {
        throw Error(ErrorCode::invalid_argument, "at offset 4: IDX dimensions must be nonzero");
    }
    const std::size_t payload = n * dim;
    if (bytes.size() - header < payload) {
        throw Error(ErrorCode::truncated_payload,
                    "at offset " + std::to_string(bytes.size()) + ": expected " +
                        std::to_string(payload) + " payload bytes after offset " +
                        std::to_string(header) + ", found " + std::to_string(bytes.size() - header));
    }
    std::vector<Vec64> pts(n, Vec64(dim));
    const std::uint8_t* src = bytes.data() + header;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < dim; ++k) pts[i][k] = static_cast<double>(*src++) / 255.0;
    }
    Dataset out(std::move(pts), tag);
    if (rank == 3) out.set_image_shape({dims[1], dims[2]});
    return out;
}

inline Dataset load_idx(const std::string& path) {
    const auto bytes = detail::read_file_bytes(path);
    return parse_idx(bytes, "idx:" + path);
}

/// Encodes values in [0,1] as an unsigned-byte IDX file. Pixels are round(255 * v).
/// With an image shape the file has rank 3, otherwise rank 2 (rank 1 when dim is 1).
inline std::vector<std::uint8_t> encode_idx(const Dataset& data) {
    std::vector<std::uint32_t> dims{static_cast<std::uint32_t>(data.size())};
    if (data.image_shape()) {
        dims.push_back(static_cast<std::uint32_t>(data.image_shape()->height));
        dims.push_back(static_cast<std::uint32_t>(data.image_shape()->width));
    } else if (data.dim() > 1) {
        dims.push_back(static_cast<std::uint32_t>(data.dim()));
    }
    std::vector<std::uint8_t> out{0, 0, 0x08, static_cast<std::uint8_t>(dims.size())};
    for (auto d : dims) {
        for (int shift = 24; shift >= 0; shift -= 8) out.push_back(static_cast<std::uint8_t>(d >> shift));
    }
    for (const auto& p : data.points()) {
        for (double v : p) {
            const double clamped = std::clamp(v, 0.0, 1.0);
            out.push_back(static_cast<std::uint8_t>(std::lround(255.0 * clamped)));
        }
    }
    return out;
}

inline void write_idx(const std::string& path, const Dataset& data) {
    const auto bytes = encode_idx(data);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::io, "cannot write " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

/// Parses comma-separated floats, one example per line.
inline Dataset parse_csv(std::string_view text, bool has_header, const std::string& tag = "csv") {
    std::vector<Vec64> pts;
    std::size_t line_no = 0;
    std::size_t width = 0;
    while (!text.empty()) {
        const auto eol = text.find('\n');
        std::string_view line = text.substr(0, eol);
        text = eol == std::string_view::npos ? std::string_view{} : text.substr(eol + 1);
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (has_header && line_no == 1) continue;
        if (line.empty()) {
            if (text.empty()) break;
            throw Error(ErrorCode::parse, "line " + std::to_string(line_no) + ": empty row");
        }
        Vec64 row;
        std::size_t field_start = 0;
        while (true) {
            const auto comma = line.find(',', field_start);
            std::string_view field = line.substr(field_start, comma == std::string_view::npos
                                                                   ? std::string_view::npos
                                                                   : comma - field_start);
            while (!field.empty() && field.front() == ' ') field.remove_prefix(1);
            while (!field.empty() && field.back() == ' ') field.remove_suffix(1);
            double value = 0.0;
            const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
            if (field.empty() || ec != std::errc{} || ptr != field.data() + field.size() ||
                !std::isfinite(value)) {
                throw Error(ErrorCode::parse, "line " + std::to_string(line_no) + ": field " +
                                                  std::to_string(row.size() + 1) + " '" +
                                                  std::string(field) + "' is not a number");
            }
            row.push_back(value);
            if (comma == std::string_view::npos) break;
            field_start = comma + 1;
        }
        if (pts.empty()) {
            width = row.size();
        } else if (row.size() != width) {
            throw Error(ErrorCode::ragged_rows, "line " + std::to_string(line_no) + ": " +
                                                    std::to_string(row.size()) + " fields, expected " +
                                                    std::to_string(width));
        }
        pts.push_back(std::move(row));
    }
    detail::require(!pts.empty(), ErrorCode::parse, "CSV holds no data rows");
    return Dataset(std::move(pts), tag);
}

inline Dataset load_csv(const std::string& path, bool has_header) {
    const auto bytes = detail::read_file_bytes(path);
    return parse_csv(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()),
                     has_header, "csv:" + path);
}

} // namespace imle
