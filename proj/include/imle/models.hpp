#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <variant>
#include <vector>

#include "imle/datasets.hpp"
#include "imle/numerics.hpp"

namespace imle {

// ---------------------------------------------------------------------------
// Analytic families (exact density + exact sampler)
// ---------------------------------------------------------------------------

struct IsotropicGaussian {
    Vec64 mean;
    double stddev = 1.0;
};

struct Gaussian1d {
    double mean = 0.0;
    double stddev = 1.0;
};

struct GaussianMixture {
    MixtureSpec spec;
};

/// A distribution with closed-form density.
///
/// Parameter layout of `parameters()`:
///   isotropic-gaussian: (mean_1, ..., mean_d, stddev)
///   gaussian-1d:        (mean, stddev)
///   mixture:            (means row-major, component stddev, weights)
class AnalyticFamily {
public:
    using Kind = std::variant<IsotropicGaussian, Gaussian1d, GaussianMixture>;

    static AnalyticFamily isotropic_gaussian(Vec64 mean, double stddev) {
        return AnalyticFamily(IsotropicGaussian{std::move(mean), stddev});
    }
    static AnalyticFamily standard_gaussian(std::size_t dim) {
        return isotropic_gaussian(Vec64(dim, 0.0), 1.0);
    }
    static AnalyticFamily gaussian_1d(double mean, double stddev) {
        return AnalyticFamily(Gaussian1d{mean, stddev});
    }
    static AnalyticFamily mixture(MixtureSpec spec) {
        return AnalyticFamily(GaussianMixture{std::move(spec)});
    }

    const Kind& kind() const noexcept { return kind_; }

    std::string_view kind_name() const noexcept {
        switch (kind_.index()) {
        case 0: return "isotropic-gaussian";
        case 1: return "gaussian-1d";
        default: return "mixture";
        }
    }

    std::size_t dim() const noexcept {
        return std::visit(
            [](const auto& k) -> std::size_t {
                using T = std::decay_t<decltype(k)>;
                if constexpr (std::is_same_v<T, IsotropicGaussian>) return k.mean.size();
                else if constexpr (std::is_same_v<T, Gaussian1d>) return 1;
                else return k.spec.dim();
            },
            kind_);
    }

    Vec64 parameters() const {
        return std::visit(
            [](const auto& k) -> Vec64 {
                using T = std::decay_t<decltype(k)>;
                if constexpr (std::is_same_v<T, IsotropicGaussian>) {
                    Vec64 p = k.mean;
                    p.push_back(k.stddev);
                    return p;
                } else if constexpr (std::is_same_v<T, Gaussian1d>) {
                    return {k.mean, k.stddev};
                } else {
                    Vec64 p;
                    for (const auto& m : k.spec.means) p.insert(p.end(), m.begin(), m.end());
                    p.push_back(k.spec.component_std);
                    p.insert(p.end(), k.spec.weights.begin(), k.spec.weights.end());
                    return p;
                }
            },
            kind_);
    }

    double log_density(std::span<const double> x) const {
        detail::require_dims(x.size(), dim(), "log_density");
        return std::visit(
            [&](const auto& k) -> double {
                using T = std::decay_t<decltype(k)>;
                if constexpr (std::is_same_v<T, IsotropicGaussian>) {
                    return gaussian_log_density(x, k.mean, k.stddev);
                } else if constexpr (std::is_same_v<T, Gaussian1d>) {
                    const double mean[1] = {k.mean};
                    return gaussian_log_density(x, mean, k.stddev);
                } else {
                    double best = -std::numeric_limits<double>::infinity();
                    std::vector<double> terms;
                    terms.reserve(k.spec.components());
                    for (std::size_t c = 0; c < k.spec.components(); ++c) {
                        if (k.spec.weights[c] == 0.0) continue;
                        const double t = std::log(k.spec.weights[c]) +
                                         gaussian_log_density(x, k.spec.means[c], k.spec.component_std);
                        terms.push_back(t);
                        best = std::max(best, t);
                    }
                    double acc = 0.0;
                    for (double t : terms) acc += std::exp(t - best);
                    return best + std::log(acc);
                }
            },
            kind_);
    }

    double density(std::span<const double> x) const { return std::exp(log_density(x)); }

    Vec64 sample(RngStream& rng) const {
        return std::visit(
            [&](const auto& k) -> Vec64 {
                using T = std::decay_t<decltype(k)>;
                if constexpr (std::is_same_v<T, IsotropicGaussian>) {
                    Vec64 x = k.mean;
                    for (auto& v : x) v += k.stddev * rng.normal();
                    return x;
                } else if constexpr (std::is_same_v<T, Gaussian1d>) {
                    return {k.mean + k.stddev * rng.normal()};
                } else {
                    return sample_mixture(k.spec, rng);
                }
            },
            kind_);
    }

private:
    explicit AnalyticFamily(Kind kind) : kind_(std::move(kind)) { validate(); }

    void validate() const {
        std::visit(
            [](const auto& k) {
                using T = std::decay_t<decltype(k)>;
                if constexpr (std::is_same_v<T, GaussianMixture>) {
                    k.spec.validate();
                } else {
                    detail::require(k.stddev > 0.0 && std::isfinite(k.stddev),
                                    ErrorCode::invalid_argument, "family stddev must be positive");
                    if constexpr (std::is_same_v<T, IsotropicGaussian>) {
                        detail::require(!k.mean.empty(), ErrorCode::invalid_argument,
                                        "isotropic gaussian needs dim >= 1");
                    }
                }
            },
            kind_);
    }

    static double gaussian_log_density(std::span<const double> x, std::span<const double> mean,
                                       double stddev) {
        const double d = static_cast<double>(x.size());
        const double var = stddev * stddev;
        return -0.5 * sq_euclidean(x, mean) / var - 0.5 * d * std::log(2.0 * std::numbers::pi * var);
    }

    Kind kind_;
};

/// m i.i.d. draws.
inline std::vector<Vec64> family_sample(const AnalyticFamily& fam, RngStream& rng, std::size_t m) {
    detail::require(m >= 1, ErrorCode::invalid_argument, "family_sample: m must be >= 1");
    std::vector<Vec64> out;
    out.reserve(m);
    for (std::size_t j = 0; j < m; ++j) out.push_back(fam.sample(rng));
    return out;
}

inline double total_log_likelihood(const AnalyticFamily& fam, const Dataset& data) {
    double acc = 0.0;
    for (const auto& x : data.points()) acc += fam.log_density(x);
    return acc;
}

struct MLESolution {
    Vec64 theta;
    double loglik = 0.0;
};

/// Maximum likelihood location for a Gaussian with known scale: the per-coordinate mean.
/// `fam` supplies the (fixed) scale; its location is ignored.
inline MLESolution closed_form_mle(const AnalyticFamily& fam, const Dataset& data) {
    detail::require_dims(data.dim(), fam.dim(), "closed_form_mle");
    double stddev = 0.0;
    if (const auto* g = std::get_if<Gaussian1d>(&fam.kind())) {
        stddev = g->stddev;
    } else if (const auto* g = std::get_if<IsotropicGaussian>(&fam.kind())) {
        stddev = g->stddev;
    } else {
        throw Error(ErrorCode::invalid_argument,
                    "closed_form_mle: no closed form for family kind " + std::string(fam.kind_name()));
    }
    Vec64 theta(data.dim(), 0.0);
    for (const auto& x : data.points()) {
        for (std::size_t k = 0; k < x.size(); ++k) theta[k] += x[k];
    }
    for (auto& t : theta) t /= static_cast<double>(data.size());
    const AnalyticFamily fitted = data.dim() == 1 && std::holds_alternative<Gaussian1d>(fam.kind())
                                      ? AnalyticFamily::gaussian_1d(theta[0], stddev)
                                      : AnalyticFamily::isotropic_gaussian(theta, stddev);
    return {theta, total_log_likelihood(fitted, data)};
}

// ---------------------------------------------------------------------------
// Feed-forward generator T_theta(z)
// ---------------------------------------------------------------------------

enum class OutputActivation { identity, sigmoid };

inline std::string_view to_string(OutputActivation a) noexcept {
    return a == OutputActivation::sigmoid ? "sigmoid" : "identity";
}

inline OutputActivation parse_output_activation(std::string_view name) {
    if (name == "sigmoid") return OutputActivation::sigmoid;
    if (name == "identity") return OutputActivation::identity;
    throw Error(ErrorCode::config, "unknown output activation '" + std::string(name) + "'");
}

/// Intermediate values of one forward pass, kept for backpropagation.
struct ForwardCache {
    std::vector<Vec64> inputs;          // input to each layer
    std::vector<Vec64> pre_activations; // W x + b per layer
    Vec64 output;
};

/// Fully connected network: ReLU hidden layers, identity or sigmoid output.
///
/// The flat parameter vector lists, for each layer from input to output, the weight
/// matrix row-major (fan_out x fan_in) followed by the bias. ReLU'(0) is taken as 0.
class GeneratorNet {
public:
    GeneratorNet(std::vector<std::size_t> layer_sizes, OutputActivation output)
        : sizes_(std::move(layer_sizes)), output_(output) {
        detail::require(sizes_.size() >= 2, ErrorCode::invalid_argument,
                        "GeneratorNet needs at least an input and an output size");
        for (auto s : sizes_) {
            detail::require(s >= 1, ErrorCode::invalid_argument, "layer sizes must be positive");
        }
        for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
            weights_.emplace_back(sizes_[l + 1], sizes_[l]);
            biases_.emplace_back(sizes_[l + 1], 0.0);
        }
    }

    /// Weights ~ N(0, 2 / fan_in), biases 0.
    static GeneratorNet he_init(std::vector<std::size_t> layer_sizes, OutputActivation output,
                                RngStream& rng) {
        GeneratorNet net(std::move(layer_sizes), output);
        for (auto& w : net.weights_) {
            const double scale = std::sqrt(2.0 / static_cast<double>(w.cols()));
            for (auto& v : w.data()) v = scale * rng.normal();
        }
        return net;
    }

    const std::vector<std::size_t>& layer_sizes() const noexcept { return sizes_; }
    std::size_t layers() const noexcept { return weights_.size(); }
    std::size_t latent_dim() const noexcept { return sizes_.front(); }
    std::size_t output_dim() const noexcept { return sizes_.back(); }
    OutputActivation output_activation() const noexcept { return output_; }

    Mat64& weight(std::size_t l) { return weights_.at(l); }
    const Mat64& weight(std::size_t l) const { return weights_.at(l); }
    Vec64& bias(std::size_t l) { return biases_.at(l); }
    const Vec64& bias(std::size_t l) const { return biases_.at(l); }

    std::size_t parameter_count() const noexcept {
        std::size_t n = 0;
        for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) n += sizes_[l] * sizes_[l + 1] + sizes_[l + 1];
        return n;
    }

    Vec64 parameters() const {
        Vec64 theta;
        theta.reserve(parameter_count());
        for (std::size_t l = 0; l < layers(); ++l) {
            const auto w = weights_[l].data();
            theta.insert(theta.end(), w.begin(), w.end());
            theta.insert(theta.end(), biases_[l].begin(), biases_[l].end());
        }
        return theta;
    }

    void set_parameters(std::span<const double> theta) {
        detail::require_dims(theta.size(), parameter_count(), "GeneratorNet::set_parameters");
        detail::require(all_finite(theta), ErrorCode::non_finite, "parameters must be finite");
        std::size_t pos = 0;
        for (std::size_t l = 0; l < layers(); ++l) {
            for (auto& v : weights_[l].data()) v = theta[pos++];
            for (auto& v : biases_[l]) v = theta[pos++];
        }
    }

    Vec64 forward(std::span<const double> z) const {
        detail::require_dims(z.size(), latent_dim(), "net_forward");
        Vec64 x(z.begin(), z.end());
        for (std::size_t l = 0; l < layers(); ++l) {
            Vec64 a = affine(l, x);
            activate(l, a);
            x = std::move(a);
        }
        return x;
    }

    ForwardCache forward_cached(std::span<const double> z) const {
        detail::require_dims(z.size(), latent_dim(), "net_forward");
        ForwardCache cache;
        Vec64 x(z.begin(), z.end());
        for (std::size_t l = 0; l < layers(); ++l) {
            Vec64 a = affine(l, x);
            cache.inputs.push_back(std::move(x));
            cache.pre_activations.push_back(a);
            activate(l, a);
            x = std::move(a);
        }
        cache.output = std::move(x);
        return cache;
    }

    /// Adds d(upstream . output)/d(theta) into grad (flat layout).
    void accumulate_gradient(const ForwardCache& cache, std::span<const double> upstream,
                             std::span<double> grad) const {
        detail::require_dims(upstream.size(), output_dim(), "net_backward upstream");
        detail::require_dims(grad.size(), parameter_count(), "net_backward gradient");
        // delta = dL/d(pre-activation) of the current layer
        Vec64 delta(upstream.begin(), upstream.end());
        if (output_ == OutputActivation::sigmoid) {
            for (std::size_t k = 0; k < delta.size(); ++k) {
                const double s = cache.output[k];
                delta[k] *= s * (1.0 - s);
            }
        }
        std::size_t end = grad.size();
        for (std::size_t l = layers(); l-- > 0;) {
            const Mat64& w = weights_[l];
            const Vec64& in = cache.inputs[l];
            const std::size_t block = w.size() + w.rows();
            const std::size_t start = end - block;
            for (std::size_t r = 0; r < w.rows(); ++r) {
                const double dr = delta[r];
                if (dr == 0.0) continue;
                double* g = grad.data() + start + r * w.cols();
                for (std::size_t c = 0; c < w.cols(); ++c) g[c] += dr * in[c];
                grad[start + w.size() + r] += dr;
            }
            if (l > 0) {
                Vec64 prev(w.cols(), 0.0);
                for (std::size_t r = 0; r < w.rows(); ++r) {
                    const double dr = delta[r];
                    if (dr == 0.0) continue;
                    const auto wr = w.row(r);
                    for (std::size_t c = 0; c < w.cols(); ++c) prev[c] += dr * wr[c];
                }
                const Vec64& pre = cache.pre_activations[l - 1];
                for (std::size_t c = 0; c < prev.size(); ++c) {
                    if (!(pre[c] > 0.0)) prev[c] = 0.0;
                }
                delta = std::move(prev);
            }
            end = start;
        }
    }

    /// One model draw: z ~ N(0, I), then T_theta(z).
    Vec64 sample(RngStream& rng) const { return forward(gaussian_sample(rng, latent_dim())); }

    /// d(upstream . T_theta(z))/d(theta) as a flat vector aligned with parameters().
    Vec64 backward(std::span<const double> z, std::span<const double> upstream) const {
        const ForwardCache cache = forward_cached(z);
        Vec64 grad(parameter_count(), 0.0);
        accumulate_gradient(cache, upstream, grad);
        return grad;
    }

private:
    Vec64 affine(std::size_t l, std::span<const double> x) const {
        const Mat64& w = weights_[l];
        Vec64 a = biases_[l];
        for (std::size_t r = 0; r < w.rows(); ++r) {
            const auto wr = w.row(r);
            double acc = 0.0;
            for (std::size_t c = 0; c < w.cols(); ++c) acc += wr[c] * x[c];
            a[r] += acc;
        }
        return a;
    }

    void activate(std::size_t l, Vec64& a) const {
        if (l + 1 < layers()) {
            for (auto& v : a) v = v > 0.0 ? v : 0.0;
        } else if (output_ == OutputActivation::sigmoid) {
            for (auto& v : a) v = 1.0 / (1.0 + std::exp(-v));
        }
    }

    std::vector<std::size_t> sizes_;
    OutputActivation output_;
    std::vector<Mat64> weights_;
    std::vector<Vec64> biases_;
};

inline Vec64 net_forward(const GeneratorNet& net, std::span<const double> z) { return net.forward(z); }

inline Vec64 net_backward(const GeneratorNet& net, std::span<const double> z,
                          std::span<const double> upstream) {
    return net.backward(z, upstream);
}

/// Named architectures. `mnist-paper` is the 100-1200-1200-784 sigmoid net; the desk presets
/// are small enough for minute-scale runs.
struct NetPreset {
    std::vector<std::size_t> layer_sizes;
    OutputActivation output;
};

inline NetPreset net_preset(std::string_view name, std::size_t data_dim) {
    if (name == "mnist-paper") return {{100, 1200, 1200, data_dim}, OutputActivation::sigmoid};
    // 2-d latent: low-dimensional synthetic benchmarks such as the ring mixture
    if (name == "ring") return {{2, 64, 64, data_dim}, OutputActivation::identity};
    if (name == "desk") return {{16, 64, 64, data_dim}, OutputActivation::identity};
    if (name == "desk-sigmoid") return {{16, 64, 64, data_dim}, OutputActivation::sigmoid};
    throw Error(ErrorCode::config, "unknown model preset '" + std::string(name) + "'");
}

} // namespace imle
