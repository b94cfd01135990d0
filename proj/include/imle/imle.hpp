#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "imle/datasets.hpp"
#include "imle/models.hpp"
#include "imle/nnsearch.hpp"
#include "imle/numerics.hpp"

namespace imle {

enum class OptimizerKind { sgd, adam };

inline std::string_view to_string(OptimizerKind k) noexcept {
    return k == OptimizerKind::sgd ? "sgd" : "adam";
}

inline OptimizerKind parse_optimizer(std::string_view name) {
    if (name == "sgd") return OptimizerKind::sgd;
    if (name == "adam") return OptimizerKind::adam;
    throw Error(ErrorCode::config, "unknown optimizer '" + std::string(name) + "'");
}

/// Settings of one training run. Unset optional sizes take their defaults from the dataset
/// size in `resolved()`: batch_size = min(n, 256), m = 4 * batch_size, and
/// minibatch_size = min(64, batch_size).
struct ImleConfig {
    std::optional<std::size_t> m;
    std::size_t outer_iterations = 300; // K
    std::size_t inner_iterations = 50;  // L
    double eta = 2e-5;
    std::optional<std::size_t> batch_size;
    std::optional<std::size_t> minibatch_size;
    OptimizerKind optimizer = OptimizerKind::sgd;
    std::uint64_t seed = 0;
    IndexStructure index_structure = IndexStructure::vp_tree;
    bool stale_matching = false;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;

    ImleConfig resolved(std::size_t n) const {
        ImleConfig out = *this;
        if (!out.batch_size) out.batch_size = std::min<std::size_t>(n, 256);
        if (!out.m) out.m = 4 * *out.batch_size;
        if (!out.minibatch_size) out.minibatch_size = std::min<std::size_t>(64, *out.batch_size);
        out.validate(n);
        return out;
    }

    /// Throws on violated invariants. Requires a resolved config.
    void validate(std::size_t n) const {
        detail::require(m && batch_size && minibatch_size, ErrorCode::config,
                        "ImleConfig is not resolved");
        detail::require(*m >= 1, ErrorCode::config, "m must be >= 1");
        detail::require(*minibatch_size >= 1, ErrorCode::config, "minibatch_size must be >= 1");
        detail::require(*minibatch_size <= *batch_size, ErrorCode::config,
                        "minibatch_size must not exceed batch_size");
        detail::require(*batch_size <= n, ErrorCode::config,
                        "batch_size " + std::to_string(*batch_size) + " exceeds n = " + std::to_string(n));
        detail::require(eta > 0.0 && std::isfinite(eta), ErrorCode::config, "eta must be > 0");
    }
};

/// Latent codes and their images under the current generator, aligned by position.
struct ModelSamples {
    std::vector<Vec64> latents;
    std::vector<Vec64> samples;
};

inline ModelSamples draw_model_samples(const GeneratorNet& net, RngStream& rng, std::size_t m) {
    detail::require(m >= 1, ErrorCode::invalid_argument, "draw_model_samples: m must be >= 1");
    ModelSamples out;
    out.latents.reserve(m);
    out.samples.reserve(m);
    for (std::size_t j = 0; j < m; ++j) {
        out.latents.push_back(gaussian_sample(rng, net.latent_dim()));
        out.samples.push_back(net.forward(out.latents.back()));
    }
    return out;
}

/// sigma restricted to one batch: each data index with its nearest sample.
struct Matching {
    struct Pair {
        std::size_t data_index = 0;
        std::size_t sample_index = 0;
        Vec64 latent;
        Vec64 sample; // sample value when the matching was built
        double sq_dist = 0.0;
    };
    std::vector<Pair> pairs;
    std::size_t built_at_outer = 0;

    double mean_sq_dist() const {
        double acc = 0.0;
        for (const auto& p : pairs) acc += p.sq_dist;
        return pairs.empty() ? 0.0 : acc / static_cast<double>(pairs.size());
    }
};

inline Matching match_batch(const Dataset& data, std::span<const std::size_t> batch,
                            const ModelSamples& drawn,
                            IndexStructure structure = IndexStructure::vp_tree,
                            std::size_t built_at_outer = 0, std::uint64_t shuffle_seed = 0) {
    detail::require(!batch.empty(), ErrorCode::invalid_argument, "match_batch: empty batch");
    detail::require(!drawn.samples.empty(), ErrorCode::invalid_argument, "match_batch: no samples");
    detail::require(drawn.samples.size() == drawn.latents.size(), ErrorCode::invalid_argument,
                    "match_batch: latents and samples are not aligned");
    const NearestIndex index(drawn.samples, structure, shuffle_seed);
    Matching out;
    out.built_at_outer = built_at_outer;
    out.pairs.reserve(batch.size());
    for (const std::size_t i : batch) {
        detail::require(i < data.size(), ErrorCode::invalid_argument,
                        "match_batch: data index " + std::to_string(i) + " out of range");
        const MatchResult r = index.query(data[i]);
        out.pairs.push_back({i, r.index, drawn.latents[r.index], drawn.samples[r.index], r.sq_dist});
    }
    return out;
}

/// True when every pair holds the lowest-index exact nearest sample of `samples`.
inline bool matching_is_optimal(const Dataset& data, const Matching& matching,
                                std::span<const Vec64> samples) {
    for (const auto& p : matching.pairs) {
        for (std::size_t j = 0; j < samples.size(); ++j) {
            const double sq = sq_euclidean(data[p.data_index], samples[j]);
            if (sq < p.sq_dist || (sq == p.sq_dist && j < p.sample_index)) return false;
        }
    }
    return true;
}

/// Plain SGD or Adam over a flat parameter vector.
class Optimizer {
public:
    Optimizer(OptimizerKind kind, double eta, double beta1 = 0.9, double beta2 = 0.999,
              double epsilon = 1e-8)
        : kind_(kind), eta_(eta), beta1_(beta1), beta2_(beta2), epsilon_(epsilon) {}

    explicit Optimizer(const ImleConfig& cfg)
        : Optimizer(cfg.optimizer, cfg.eta, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_epsilon) {}

    void step(std::span<double> theta, std::span<const double> grad) {
        detail::require_dims(theta.size(), grad.size(), "Optimizer::step");
        if (kind_ == OptimizerKind::sgd) {
            for (std::size_t k = 0; k < theta.size(); ++k) theta[k] -= eta_ * grad[k];
            return;
        }
        if (first_.size() != theta.size()) {
            first_.assign(theta.size(), 0.0);
            second_.assign(theta.size(), 0.0);
            steps_ = 0;
        }
        ++steps_;
        const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(steps_));
        const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(steps_));
        for (std::size_t k = 0; k < theta.size(); ++k) {
            first_[k] = beta1_ * first_[k] + (1.0 - beta1_) * grad[k];
            second_[k] = beta2_ * second_[k] + (1.0 - beta2_) * grad[k] * grad[k];
            theta[k] -= eta_ * (first_[k] / c1) / (std::sqrt(second_[k] / c2) + epsilon_);
        }
    }

private:
    OptimizerKind kind_;
    double eta_, beta1_, beta2_, epsilon_;
    Vec64 first_, second_;
    std::uint64_t steps_ = 0;
};

/// Minibatch loss n/|S~| * sum ||x_i - T_theta(z_sigma(i))||^2 and its gradient.
/// With `stale` set the residual uses the sample frozen at matching time instead of the
/// recomputed one.
struct MinibatchLoss {
    double loss = 0.0;
    Vec64 grad;
};

inline MinibatchLoss minibatch_loss(const GeneratorNet& net, const Dataset& data, const Matching& matching,
                                    std::span<const std::size_t> minibatch, bool stale = false) {
    detail::require(!minibatch.empty(), ErrorCode::invalid_argument, "empty minibatch");
    const double scale = static_cast<double>(data.size()) / static_cast<double>(minibatch.size());
    MinibatchLoss out{0.0, Vec64(net.parameter_count(), 0.0)};
    Vec64 upstream(net.output_dim());
    for (const std::size_t p : minibatch) {
        const auto& pair = matching.pairs.at(p);
        const ForwardCache cache = net.forward_cached(pair.latent);
        const Vec64& produced = stale ? pair.sample : cache.output;
        const Vec64& x = data[pair.data_index];
        double sq = 0.0;
        for (std::size_t k = 0; k < upstream.size(); ++k) {
            const double r = produced[k] - x[k];
            sq += r * r;
            upstream[k] = 2.0 * scale * r;
        }
        out.loss += sq;
        net.accumulate_gradient(cache, upstream, out.grad);
    }
    out.loss *= scale;
    return out;
}

/// Draws `count` distinct positions from [0, population) uniformly (partial Fisher-Yates).
inline std::vector<std::size_t> sample_without_replacement(RngStream& rng, std::size_t population,
                                                           std::size_t count) {
    detail::require(count <= population, ErrorCode::invalid_argument,
                    "cannot draw more items than the population holds");
    std::vector<std::size_t> pool(population);
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    for (std::size_t i = 0; i < count; ++i) {
        std::swap(pool[i], pool[i + rng.uniform_index(population - i)]);
    }
    pool.resize(count);
    return pool;
}

struct InnerResult {
    std::vector<double> losses; // minibatch loss before each update
};

/// L optimizer steps on the frozen matching. The matched samples are recomputed from their
/// stored latents at the current parameters on every step.
inline InnerResult inner_sgd(GeneratorNet& net, const Dataset& data, const Matching& matching,
                             const ImleConfig& cfg, RngStream& rng, Optimizer& optimizer) {
    cfg.validate(data.size());
    InnerResult out;
    if (cfg.inner_iterations == 0) return out;
    detail::require(!matching.pairs.empty(), ErrorCode::invalid_argument, "inner_sgd: empty matching");
    const std::size_t mb = std::min(*cfg.minibatch_size, matching.pairs.size());
    Vec64 theta = net.parameters();
    for (std::size_t step = 0; step < cfg.inner_iterations; ++step) {
        const auto minibatch = sample_without_replacement(rng, matching.pairs.size(), mb);
        const MinibatchLoss lg = minibatch_loss(net, data, matching, minibatch, cfg.stale_matching);
        if (!std::isfinite(lg.loss) || !all_finite(lg.grad)) {
            std::ostringstream os;
            os << "non-finite loss at outer iteration " << matching.built_at_outer << ", inner step "
               << step + 1 << " (loss " << lg.loss << ", eta " << cfg.eta
               << "); the learning rate is likely too high";
            throw Error(ErrorCode::divergence, os.str());
        }
        out.losses.push_back(lg.loss);
        optimizer.step(theta, lg.grad);
        if (!all_finite(theta)) {
            std::ostringstream os;
            os << "parameters became non-finite at outer iteration " << matching.built_at_outer
               << ", inner step " << step + 1 << " (eta " << cfg.eta << ")";
            throw Error(ErrorCode::divergence, os.str());
        }
        net.set_parameters(theta);
    }
    return out;
}

inline InnerResult inner_sgd(GeneratorNet& net, const Dataset& data, const Matching& matching,
                             const ImleConfig& cfg, RngStream& rng) {
    Optimizer optimizer(cfg);
    return inner_sgd(net, data, matching, cfg, rng, optimizer);
}

/// One row of the training trace.
struct TraceRecord {
    std::size_t outer_iter = 0; // 1-based
    double mean_sqdist_pre = 0.0;
    double mean_sqdist_post = 0.0;
    double wall_ms = 0.0;
    double param_norm = 0.0;
};

struct TrainTrace {
    std::vector<TraceRecord> records;
};

/// Optional hooks. `on_iteration` runs after every completed outer iteration, so a caller
/// persisting records keeps everything written before an abort.
struct TrainObserver {
    std::function<void(const TraceRecord&, const GeneratorNet&)> on_iteration;
    std::function<void(std::string_view)> on_warning;
};

/// Runs the full outer/inner procedure. The sampling, batch, minibatch and index-shuffle
/// streams are forked from `rng`, so a run is a pure function of (net, data, cfg, rng).
inline TrainTrace imle_train(GeneratorNet& net, const Dataset& data, const ImleConfig& config,
                             RngStream& rng, const TrainObserver& observer = {}) {
    detail::require_dims(data.dim(), net.output_dim(), "imle_train: data vs generator output");
    const ImleConfig cfg = config.resolved(data.size());
    if (*cfg.m < *cfg.batch_size && observer.on_warning) {
        observer.on_warning("m = " + std::to_string(*cfg.m) + " is smaller than batch_size = " +
                            std::to_string(*cfg.batch_size));
    }
    RngStream sample_rng = rng.fork(1);
    RngStream batch_rng = rng.fork(2);
    RngStream minibatch_rng = rng.fork(3);
    RngStream shuffle_rng = rng.fork(4);
    Optimizer optimizer(cfg);
    TrainTrace trace;
    for (std::size_t k = 1; k <= cfg.outer_iterations; ++k) {
        const auto t0 = std::chrono::steady_clock::now();
        const ModelSamples drawn = draw_model_samples(net, sample_rng, *cfg.m);
        const auto batch = sample_without_replacement(batch_rng, data.size(), *cfg.batch_size);
        const Matching matching =
            match_batch(data, batch, drawn, cfg.index_structure, k, shuffle_rng.next_u64());
        if (k % 100 == 1 && !matching_is_optimal(data, matching, drawn.samples)) {
            throw Error(ErrorCode::invalid_argument,
                        "matching failed its optimality re-check at outer iteration " + std::to_string(k));
        }
        inner_sgd(net, data, matching, cfg, minibatch_rng, optimizer);

        TraceRecord rec;
        rec.outer_iter = k;
        rec.mean_sqdist_pre = matching.mean_sq_dist();
        double post = 0.0;
        for (const auto& p : matching.pairs) post += sq_euclidean(data[p.data_index], net.forward(p.latent));
        rec.mean_sqdist_post = post / static_cast<double>(matching.pairs.size());
        rec.wall_ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        rec.param_norm = l2_norm(net.parameters());
        trace.records.push_back(rec);
        if (observer.on_iteration) observer.on_iteration(rec, net);
    }
    return trace;
}

/// Anything that produces one model draw per call.
template <typename M>
concept ModelSampler = requires(const M& model, RngStream& rng) {
    { model.sample(rng) } -> std::convertible_to<Vec64>;
};

/// Monte Carlo estimate of sum_i E[min_j ||x~_j - x_i||^2] over `trials` independent sets of
/// m draws. Trial t draws from `rng.fork(t)`, so estimates for different m share their
/// leading draws (common random numbers).
template <ModelSampler M>
McEstimate imle_objective_mc(const M& model, const Dataset& data, std::size_t m, std::size_t trials,
                             const RngStream& rng) {
    detail::require(trials >= 1, ErrorCode::invalid_argument, "imle_objective_mc: trials must be >= 1");
    detail::require(m >= 1, ErrorCode::invalid_argument, "imle_objective_mc: m must be >= 1");
    RunningStats stats;
    std::vector<Vec64> draws(m);
    for (std::size_t t = 0; t < trials; ++t) {
        RngStream trial_rng = rng.fork(t);
        for (auto& d : draws) {
            d = model.sample(trial_rng);
            detail::require_dims(d.size(), data.dim(), "imle_objective_mc");
        }
        double total = 0.0;
        for (const auto& x : data.points()) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& d : draws) best = std::min(best, sq_euclidean(x, d));
            total += best;
        }
        stats.push(total);
    }
    return stats.estimate();
}

} // namespace imle
