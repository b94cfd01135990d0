#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

#include "imle/datasets.hpp"
#include "imle/models.hpp"
#include "imle/nnsearch.hpp"
#include "imle/numerics.hpp"

namespace imle {

struct ParzenEstimate {
    double sigma = 0.0;
    std::vector<double> per_point;
    double mean = 0.0;
    double std_error = 0.0;
};

/// log((1/M) sum_j exp(-||x - c_j||^2 / (2 sigma^2))) - (d/2) log(2 pi sigma^2), max-shifted.
inline double parzen_log_density(std::span<const Vec64> centers, double sigma, std::span<const double> x) {
    const double inv = 1.0 / (2.0 * sigma * sigma);
    double best = -std::numeric_limits<double>::infinity();
    std::vector<double> exponents(centers.size());
    for (std::size_t j = 0; j < centers.size(); ++j) {
        exponents[j] = -sq_euclidean(x, centers[j]) * inv;
        best = std::max(best, exponents[j]);
    }
    double acc = 0.0;
    for (double e : exponents) acc += std::exp(e - best);
    const double d = static_cast<double>(x.size());
    return best + std::log(acc / static_cast<double>(centers.size())) -
           0.5 * d * std::log(2.0 * std::numbers::pi * sigma * sigma);
}

inline ParzenEstimate parzen_log_likelihood(std::span<const Vec64> centers, double sigma, const Dataset& test) {
    detail::require(sigma > 0.0 && std::isfinite(sigma), ErrorCode::invalid_argument, "parzen: sigma must be > 0");
    detail::require(!centers.empty(), ErrorCode::invalid_argument, "parzen: no centers");
    for (const auto& c : centers) detail::require_dims(c.size(), test.dim(), "parzen centers");
    ParzenEstimate out;
    out.sigma = sigma;
    RunningStats stats;
    out.per_point.reserve(test.size());
    for (const auto& x : test.points()) {
        out.per_point.push_back(parzen_log_density(centers, sigma, x));
        stats.push(out.per_point.back());
    }
    out.mean = stats.mean();
    out.std_error = stats.stderr_of_mean();
    return out;
}

/// Default bandwidth grid: 20 log-spaced values over [0.01, 1].
inline std::vector<double> default_sigma_grid() {
    std::vector<double> grid;
    for (int k = 0; k < 20; ++k) grid.push_back(std::pow(10.0, -2.0 + 2.0 * k / 19.0));
    return grid;
}

/// Grid sigma with the highest mean validation log-likelihood; ties go to the smaller sigma.
inline double select_bandwidth(std::span<const Vec64> centers, const Dataset& validation,
                               std::span<const double> sigma_grid) {
    detail::require(!sigma_grid.empty(), ErrorCode::invalid_argument, "select_bandwidth: empty sigma grid");
    double best_sigma = 0.0;
    double best_value = -std::numeric_limits<double>::infinity();
    bool first = true;
    for (const double sigma : sigma_grid) {
        detail::require(sigma > 0.0, ErrorCode::invalid_argument, "select_bandwidth: sigma must be > 0");
        const double value = parzen_log_likelihood(centers, sigma, validation).mean;
        if (first || value > best_value || (value == best_value && sigma < best_sigma)) {
            best_value = value;
            best_sigma = sigma;
            first = false;
        }
    }
    return best_sigma;
}

struct CoverageReport {
    std::vector<double> mode_nearest_dist; // Euclidean distance from each mean to its nearest sample
    std::size_t covered = 0;
    std::size_t modes = 0;
    double threshold = 0.0; // radius = threshold_sigmas * component std
    double precision = 0.0; // fraction of samples within the radius of some mean
};

inline CoverageReport mode_coverage(std::span<const Vec64> samples, const MixtureSpec& spec,
                                    double threshold_sigmas = 3.0) {
    spec.validate();
    detail::require(threshold_sigmas > 0.0, ErrorCode::invalid_argument, "mode_coverage: threshold must be > 0");
    CoverageReport rep;
    rep.modes = spec.components();
    rep.threshold = threshold_sigmas * spec.component_std;
    const double radius_sq = rep.threshold * rep.threshold;
    rep.mode_nearest_dist.assign(rep.modes, std::numeric_limits<double>::infinity());
    std::size_t precise = 0;
    for (const auto& s : samples) {
        detail::require_dims(s.size(), spec.dim(), "mode_coverage");
        bool near_any = false;
        for (std::size_t c = 0; c < rep.modes; ++c) {
            const double sq = sq_euclidean(s, spec.means[c]);
            rep.mode_nearest_dist[c] = std::min(rep.mode_nearest_dist[c], std::sqrt(sq));
            near_any = near_any || sq <= radius_sq;
        }
        if (near_any) ++precise;
    }
    for (double d : rep.mode_nearest_dist) {
        if (d <= rep.threshold) ++rep.covered;
    }
    rep.precision = samples.empty() ? 0.0 : static_cast<double>(precise) / static_cast<double>(samples.size());
    return rep;
}

/// Images along straight latent segments endpoint[k] -> endpoint[k+1], wrapping from the
/// last endpoint back to the first. Each segment contributes `steps` images at
/// t = 0, 1/(steps-1), ..., 1.
inline std::vector<Vec64> interpolate_latent(const GeneratorNet& net, std::span<const Vec64> endpoints,
                                             std::size_t steps) {
    detail::require(endpoints.size() >= 2, ErrorCode::invalid_argument, "interpolate_latent: need >= 2 endpoints");
    detail::require(steps >= 2, ErrorCode::invalid_argument, "interpolate_latent: need steps >= 2");
    std::vector<Vec64> out;
    out.reserve(endpoints.size() * steps);
    Vec64 z(net.latent_dim());
    for (std::size_t k = 0; k < endpoints.size(); ++k) {
        const Vec64& a = endpoints[k];
        const Vec64& b = endpoints[(k + 1) % endpoints.size()];
        detail::require_dims(a.size(), net.latent_dim(), "interpolate_latent");
        for (std::size_t s = 0; s < steps; ++s) {
            const double t = static_cast<double>(s) / static_cast<double>(steps - 1);
            for (std::size_t i = 0; i < z.size(); ++i) z[i] = (1.0 - t) * a[i] + t * b[i];
            out.push_back(net.forward(z));
        }
    }
    return out;
}

struct NeighbourMatch {
    Vec64 sample;
    std::size_t training_index = 0;
    double sq_dist = 0.0;
};

inline std::vector<NeighbourMatch> nearest_training_neighbour(std::span<const Vec64> samples, const Dataset& training,
                                                              IndexStructure structure = IndexStructure::vp_tree) {
    std::vector<NeighbourMatch> out;
    if (samples.empty()) return out;
    const NearestIndex index(training.points(), structure);
    out.reserve(samples.size());
    for (const auto& s : samples) {
        const MatchResult r = index.query(s);
        out.push_back({s, r.index, r.sq_dist});
    }
    return out;
}

} // namespace imle
