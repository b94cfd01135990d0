#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "imle/error.hpp"

namespace imle {

/// Dense vector of doubles. Data examples, latent codes, samples and flat parameter
/// vectors all use this representation.
using Vec64 = std::vector<double>;

/// Row-major dense matrix.
class Mat64 {
public:
    Mat64() = default;
    Mat64(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {
        detail::require(rows > 0 && cols > 0, ErrorCode::invalid_argument,
                        "Mat64 needs positive dimensions");
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }

    double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const noexcept {
        return {data_.data() + r * cols_, cols_};
    }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }

    static Mat64 identity(std::size_t n) {
        Mat64 m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    friend bool operator==(const Mat64&, const Mat64&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// Counter-based random stream.
///
/// Output k of stream (seed, stream_id) is a pure function of the triple, so streams can be
/// forked cheaply and reproduced exactly. The mixer is the SplitMix64 finalizer applied to a
/// Weyl sequence offset by a per-stream key. Normal draws use the Box-Muller transform on
/// pairs of uniforms in (0,1); the second value of each pair is cached.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed, std::uint64_t stream_id = 0) noexcept
        : seed_(seed), stream_id_(stream_id),
          key_(mix(seed ^ 0x6a09e667f3bcc908ULL) ^ mix(stream_id + 0xbb67ae8584caa73bULL)) {}

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t stream_id() const noexcept { return stream_id_; }
    std::uint64_t counter() const noexcept { return counter_; }

    /// Independent child stream; does not advance this stream.
    RngStream fork(std::uint64_t child) const noexcept {
        return RngStream(seed_, mix(stream_id_ * 0x9e3779b97f4a7c15ULL + child + 1));
    }

    std::uint64_t next_u64() noexcept {
        return mix(key_ + (counter_++) * 0x9e3779b97f4a7c15ULL);
    }

    /// Uniform in the open interval (0, 1), 53-bit resolution.
    double uniform() noexcept {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    /// Uniform integer in [0, n) by rejection; n must be positive.
    std::uint64_t uniform_index(std::uint64_t n) noexcept {
        const std::uint64_t limit = (~std::uint64_t{0}) - (~std::uint64_t{0}) % n;
        std::uint64_t x = next_u64();
        while (x >= limit) x = next_u64();
        return x % n;
    }

    double normal() noexcept {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(angle);
        has_spare_ = true;
        return r * std::cos(angle);
    }

private:
    static constexpr std::uint64_t mix(std::uint64_t z) noexcept {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::uint64_t seed_;
    std::uint64_t stream_id_;
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// dim independent standard-normal draws.
inline Vec64 gaussian_sample(RngStream& rng, std::size_t dim) {
    detail::require(dim >= 1, ErrorCode::invalid_argument, "gaussian_sample: dim must be >= 1");
    Vec64 out(dim);
    for (auto& v : out) v = rng.normal();
    return out;
}

/// Squared Euclidean distance. No square root is taken anywhere in the loss path.
inline double sq_euclidean(std::span<const double> a, std::span<const double> b) {
    detail::require_dims(a.size(), b.size(), "sq_euclidean");
    double acc = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        const double diff = a[k] - b[k];
        acc += diff * diff;
    }
    return acc;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
    detail::require_dims(a.size(), b.size(), "dot");
    double acc = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) acc += a[k] * b[k];
    return acc;
}

inline double l2_norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

inline bool all_finite(std::span<const double> a) noexcept {
    for (double v : a) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

/// Central-difference gradient of f at theta.
inline Vec64 finite_diff_grad(const std::function<double(std::span<const double>)>& f,
                              std::span<const double> theta, double h) {
    detail::require(h > 0.0, ErrorCode::invalid_argument, "finite_diff_grad: h must be > 0");
    Vec64 probe(theta.begin(), theta.end());
    Vec64 grad(theta.size());
    for (std::size_t j = 0; j < theta.size(); ++j) {
        const double orig = probe[j];
        probe[j] = orig + h;
        const double up = f(probe);
        probe[j] = orig - h;
        const double down = f(probe);
        probe[j] = orig;
        if (!std::isfinite(up) || !std::isfinite(down)) {
            throw Error(ErrorCode::non_finite,
                        "finite_diff_grad: f is not finite near coordinate " + std::to_string(j));
        }
        grad[j] = (up - down) / (2.0 * h);
    }
    return grad;
}

/// Mean and standard error of a Monte Carlo estimate.
struct McEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    std::size_t count = 0;
};

/// Accumulates mean and unbiased variance (Welford).
class RunningStats {
public:
    void push(double x) noexcept {
        ++n_;
        const double delta = x - mean_;
        mean_ += delta / static_cast<double>(n_);
        m2_ += delta * (x - mean_);
    }
    std::size_t count() const noexcept { return n_; }
    double mean() const noexcept { return mean_; }
    double variance() const noexcept { return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0; }
    double stderr_of_mean() const noexcept {
        return n_ > 0 ? std::sqrt(variance() / static_cast<double>(n_)) : 0.0;
    }
    McEstimate estimate() const noexcept { return {mean(), stderr_of_mean(), n_}; }

private:
    std::size_t n_ = 0;
    double mean_ = 0.0;
    double m2_ = 0.0;
};

} // namespace imle
