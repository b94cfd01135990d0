#pragma once

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "imle/checkpoint.hpp"
#include "imle/config.hpp"
#include "imle/eval.hpp"
#include "imle/imle.hpp"
#include "imle/raster.hpp"
#include "imle/verify.hpp"

// Subcommand bodies. Each returns the process exit status:
//   0 success, 1 a run or check failed (divergence, failing verification),
//   2 bad configuration or unusable input (reported before any compute starts).

namespace imle {

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int failed = 1;
inline constexpr int config = 2;
} // namespace exit_code

namespace detail {

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::io, "cannot write " + path.string());
    out << text;
    if (!out) throw Error(ErrorCode::io, "short write to " + path.string());
}

inline std::string format_row(std::span<const double> v) {
    std::string line;
    char buf[32];
    for (std::size_t k = 0; k < v.size(); ++k) {
        std::snprintf(buf, sizeof buf, "%.17g", v[k]);
        if (k) line += ',';
        line += buf;
    }
    line += '\n';
    return line;
}

/// CSV when the extension is .csv, IDX otherwise.
inline Dataset load_dataset_auto(const std::filesystem::path& path, bool has_header) {
    if (!std::filesystem::is_regular_file(path)) throw Error(ErrorCode::io, "data file not found: " + path.string());
    if (path.extension() == ".csv") return load_csv(path.string(), has_header);
    return load_idx(path.string());
}

inline std::vector<double> parse_double_list(std::string_view text, const char* what) {
    std::vector<double> out;
    while (!text.empty()) {
        const auto comma = text.find(',');
        std::string_view item = text.substr(0, comma);
        while (!item.empty() && item.front() == ' ') item.remove_prefix(1);
        while (!item.empty() && item.back() == ' ') item.remove_suffix(1);
        double v = 0.0;
        const auto [end, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
        if (item.empty() || ec != std::errc() || end != item.data() + item.size()) {
            throw Error(ErrorCode::config, std::string(what) + ": cannot parse '" + std::string(item) + "'");
        }
        out.push_back(v);
        if (comma == std::string_view::npos) break;
        text.remove_prefix(comma + 1);
    }
    return out;
}

inline ImageShape require_raster_shape(const Checkpoint& ckpt) {
    if (!ckpt.image_shape) {
        throw Error(ErrorCode::config, "checkpoint declares no image_shape: output dimension " +
                                           std::to_string(ckpt.net.output_dim()) + " cannot be rasterized");
    }
    detail::require_dims(ckpt.image_shape->pixels(), ckpt.net.output_dim(), "checkpoint image_shape");
    return *ckpt.image_shape;
}

inline void ensure_directory(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec || !std::filesystem::is_directory(dir)) {
        throw Error(ErrorCode::io, "cannot create output directory " + dir.string());
    }
}

inline void ensure_parent(const std::filesystem::path& file) {
    if (file.has_parent_path()) ensure_directory(file.parent_path());
}

} // namespace detail

inline constexpr const char* trace_header = "outer_iter,mean_sqdist_pre,mean_sqdist_post,wall_ms,param_norm";

inline std::string format_trace_record(const TraceRecord& r) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.3f,%.17g\n", r.outer_iter, r.mean_sqdist_pre,
                  r.mean_sqdist_post, r.wall_ms, r.param_norm);
    return buf;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainArgs {
    std::filesystem::path config;
    std::optional<std::uint64_t> seed;
    std::optional<std::filesystem::path> out;
};

/// Writes <out>/trace.csv, <out>/final.imle and, with checkpoint_every = c > 0,
/// <out>/ckpt_<k>.imle after every c-th outer iteration. With snapshot_samples > 0 a grid of
/// samples from fixed latents is written as <out>/samples_<k>.ppm next to every checkpoint
/// (k = 0 is the initialization).
inline int cmd_train(const TrainArgs& args, std::ostream& out, std::ostream& err) {
    TrainRunConfig cfg;
    Dataset data({{0.0}}, "");
    NetPreset arch;
    try {
        cfg = load_train_config(args.config);
        if (args.seed) cfg.seed = *args.seed;
        if (args.out) cfg.out_dir = *args.out;
        data = load_training_data(cfg, cfg.seed);
        arch = resolve_architecture(cfg, data.dim());
        (void)cfg.imle.resolved(data.size());
        if (cfg.snapshot_samples > 0 && !data.image_shape()) {
            throw Error(ErrorCode::config, "snapshot_samples needs an image shape (IDX images or image_shape)");
        }
        detail::ensure_directory(cfg.out_dir);
    } catch (const Error& e) {
        err << "imle train: " << e.what() << "\n";
        return exit_code::config;
    }

    cfg.imle.seed = cfg.seed;
    nlohmann::json echo = cfg.echo;
    echo["seed"] = cfg.seed;
    echo.erase("out_dir");

    const RngStream root(cfg.seed, 0);
    RngStream init_rng = root.fork(1);
    RngStream train_rng = root.fork(2);
    Checkpoint ckpt{GeneratorNet::he_init(arch.layer_sizes, arch.output, init_rng), cfg.seed, 0, data.image_shape(),
                    echo};

    std::vector<Vec64> snapshot_latents;
    if (cfg.snapshot_samples > 0) {
        RngStream snap_rng = root.fork(3);
        for (std::size_t k = 0; k < cfg.snapshot_samples; ++k) {
            snapshot_latents.push_back(gaussian_sample(snap_rng, ckpt.net.latent_dim()));
        }
    }
    auto write_snapshot = [&](const GeneratorNet& net, std::size_t k) {
        if (snapshot_latents.empty()) return;
        std::vector<Vec64> images;
        for (const auto& z : snapshot_latents) images.push_back(net.forward(z));
        detail::write_file_bytes((cfg.out_dir / ("samples_" + std::to_string(k) + ".ppm")).string(),
                                 encode_ppm_grid(images, *data.image_shape(), cfg.snapshot_cols));
    };

    const auto trace_path = cfg.out_dir / "trace.csv";
    std::ofstream trace(trace_path, std::ios::binary | std::ios::trunc);
    if (!trace) {
        err << "imle train: cannot write " << trace_path.string() << "\n";
        return exit_code::config;
    }
    trace << trace_header << '\n' << std::flush;
    write_snapshot(ckpt.net, 0);

    TrainObserver observer;
    observer.on_warning = [&](std::string_view msg) { err << "imle train: warning: " << msg << "\n"; };
    observer.on_iteration = [&](const TraceRecord& rec, const GeneratorNet& net) {
        trace << format_trace_record(rec) << std::flush;
        if (cfg.checkpoint_every > 0 && rec.outer_iter % cfg.checkpoint_every == 0) {
            Checkpoint snap{net, cfg.seed, rec.outer_iter, ckpt.image_shape, echo};
            save_checkpoint((cfg.out_dir / ("ckpt_" + std::to_string(rec.outer_iter) + ".imle")).string(), snap);
            write_snapshot(net, rec.outer_iter);
        }
    };

    try {
        const TrainTrace result = imle_train(ckpt.net, data, cfg.imle, train_rng, observer);
        ckpt.outer_iteration = result.records.size();
        save_checkpoint((cfg.out_dir / "final.imle").string(), ckpt);
        if (cfg.checkpoint_every == 0 || ckpt.outer_iteration % cfg.checkpoint_every != 0) {
            write_snapshot(ckpt.net, ckpt.outer_iteration);
        }
        if (!result.records.empty()) {
            const auto& first = result.records.front();
            const auto& last = result.records.back();
            out << "trained " << result.records.size() << " outer iterations on " << data.size()
                << " points: mean matched sq_dist " << first.mean_sqdist_pre << " -> " << last.mean_sqdist_pre
                << "\n";
        }
        out << "wrote " << (cfg.out_dir / "final.imle").string() << "\n";
    } catch (const Error& e) {
        err << "imle train: " << e.what() << "\n";
        return e.code() == ErrorCode::io ? exit_code::config : exit_code::failed;
    }
    return exit_code::ok;
}

// ---------------------------------------------------------------------------
// sample
// ---------------------------------------------------------------------------

struct SampleArgs {
    std::filesystem::path checkpoint;
    std::size_t count = 64;
    std::filesystem::path out;
    std::string format = "csv"; // csv | ppm-grid
    std::size_t grid_cols = 8;
    std::uint64_t seed = 0;
    std::optional<std::filesystem::path> neighbours; // training data for the nearest-neighbour audit
    bool neighbours_has_header = false;
};

/// Samples are a pure function of (checkpoint, seed, count). With `neighbours` set, also
/// writes <out>.neighbours.csv pairing each sample with its nearest training point.
inline int cmd_sample(const SampleArgs& args, std::ostream& out, std::ostream& err) {
    std::optional<Checkpoint> ckpt;
    std::optional<Dataset> training;
    try {
        if (args.count == 0) throw Error(ErrorCode::config, "--count must be >= 1");
        if (args.format != "csv" && args.format != "ppm-grid") {
            throw Error(ErrorCode::config, "--format must be csv or ppm-grid (got '" + args.format + "')");
        }
        if (args.grid_cols == 0) throw Error(ErrorCode::config, "--grid-cols must be >= 1");
        ckpt = load_checkpoint(args.checkpoint.string());
        if (args.format == "ppm-grid") detail::require_raster_shape(*ckpt);
        if (args.neighbours) {
            training = detail::load_dataset_auto(*args.neighbours, args.neighbours_has_header);
            detail::require_dims(training->dim(), ckpt->net.output_dim(), "neighbour audit data");
        }
        detail::ensure_parent(args.out);
    } catch (const Error& e) {
        err << "imle sample: " << e.what() << "\n";
        return exit_code::config;
    }

    RngStream rng(args.seed, 0);
    std::vector<Vec64> samples;
    samples.reserve(args.count);
    for (std::size_t k = 0; k < args.count; ++k) samples.push_back(ckpt->net.sample(rng));

    try {
        if (args.format == "csv") {
            std::string text;
            for (const auto& s : samples) text += detail::format_row(s);
            detail::write_text_file(args.out, text);
        } else {
            detail::write_file_bytes(args.out.string(),
                                     encode_ppm_grid(samples, *ckpt->image_shape, args.grid_cols));
        }
        if (training) {
            std::string text = "sample,training_index,sq_dist\n";
            const auto matches = nearest_training_neighbour(samples, *training);
            char buf[96];
            for (std::size_t k = 0; k < matches.size(); ++k) {
                std::snprintf(buf, sizeof buf, "%zu,%zu,%.17g\n", k, matches[k].training_index, matches[k].sq_dist);
                text += buf;
            }
            detail::write_text_file(args.out.string() + ".neighbours.csv", text);
        }
    } catch (const Error& e) {
        err << "imle sample: " << e.what() << "\n";
        return exit_code::config;
    }
    out << "wrote " << args.count << " samples to " << args.out.string() << "\n";
    return exit_code::ok;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

struct EvalArgs {
    std::filesystem::path checkpoint;
    std::filesystem::path test;
    bool test_has_header = false;
    std::size_t centers = 10000;
    std::optional<std::string> sigma_grid; // comma-separated; default: 20 log-spaced values in [0.01, 1]
    double validation_fraction = 0.1;
    std::uint64_t seed = 0;
    std::filesystem::path out;
};

inline constexpr const char* eval_header = "sigma,mean_loglik,stderr,n_test,n_validation,n_centers";

/// Parzen-window evaluation: bandwidth chosen on a seeded validation split of the test set,
/// log-likelihood reported on the disjoint remainder.
inline int cmd_eval(const EvalArgs& args, std::ostream& out, std::ostream& err) {
    std::optional<Checkpoint> ckpt;
    Dataset test({{0.0}}, "");
    std::vector<double> grid;
    try {
        grid = args.sigma_grid ? detail::parse_double_list(*args.sigma_grid, "--sigma-grid") : default_sigma_grid();
        if (grid.empty()) throw Error(ErrorCode::config, "--sigma-grid is empty");
        for (double s : grid) {
            if (!(s > 0.0) || !std::isfinite(s)) throw Error(ErrorCode::config, "--sigma-grid values must be > 0");
        }
        if (args.centers == 0) throw Error(ErrorCode::config, "--centers must be >= 1");
        if (!(args.validation_fraction > 0.0 && args.validation_fraction < 1.0)) {
            throw Error(ErrorCode::config, "--validation-fraction must lie in (0, 1)");
        }
        ckpt = load_checkpoint(args.checkpoint.string());
        test = detail::load_dataset_auto(args.test, args.test_has_header);
        detail::require_dims(test.dim(), ckpt->net.output_dim(), "test data vs checkpoint");
        if (test.size() < 2) throw Error(ErrorCode::config, "test set needs at least 2 points");
        detail::ensure_parent(args.out);
    } catch (const Error& e) {
        err << "imle eval: " << e.what() << "\n";
        return exit_code::config;
    }

    const RngStream root(args.seed, 0);
    RngStream center_rng = root.fork(1);
    RngStream split_rng = root.fork(2);
    std::vector<Vec64> centers;
    centers.reserve(args.centers);
    for (std::size_t k = 0; k < args.centers; ++k) centers.push_back(ckpt->net.sample(center_rng));

    const std::size_t n_val = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::llround(args.validation_fraction * static_cast<double>(test.size()))), 1,
        test.size() - 1);
    const auto order = sample_without_replacement(split_rng, test.size(), test.size());
    std::vector<Vec64> val_pts, rep_pts;
    for (std::size_t k = 0; k < order.size(); ++k) (k < n_val ? val_pts : rep_pts).push_back(test[order[k]]);
    const Dataset validation(std::move(val_pts), test.source_tag() + ":validation");
    const Dataset reported(std::move(rep_pts), test.source_tag() + ":reported");

    const double sigma = select_bandwidth(centers, validation, grid);
    const ParzenEstimate est = parzen_log_likelihood(centers, sigma, reported);

    char buf[200];
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%zu,%zu,%zu\n", sigma, est.mean, est.std_error,
                  reported.size(), validation.size(), centers.size());
    try {
        detail::write_text_file(args.out, std::string(eval_header) + "\n" + buf);
    } catch (const Error& e) {
        err << "imle eval: " << e.what() << "\n";
        return exit_code::config;
    }
    out << "sigma " << sigma << ": mean log-likelihood " << est.mean << " +- " << est.std_error << " over "
        << reported.size() << " test points\n";
    return exit_code::ok;
}

// ---------------------------------------------------------------------------
// interpolate
// ---------------------------------------------------------------------------

struct InterpolateArgs {
    std::filesystem::path checkpoint;
    std::size_t endpoints = 8;
    std::size_t steps = 8;
    std::uint64_t seed = 0;
    std::filesystem::path out;
};

/// PPM grid with one row per latent segment, wrapping from the last endpoint to the first.
inline int cmd_interpolate(const InterpolateArgs& args, std::ostream& out, std::ostream& err) {
    std::optional<Checkpoint> ckpt;
    ImageShape shape;
    try {
        if (args.endpoints < 2) throw Error(ErrorCode::config, "--endpoints must be >= 2");
        if (args.steps < 2) throw Error(ErrorCode::config, "--steps must be >= 2");
        ckpt = load_checkpoint(args.checkpoint.string());
        shape = detail::require_raster_shape(*ckpt);
        detail::ensure_parent(args.out);
    } catch (const Error& e) {
        err << "imle interpolate: " << e.what() << "\n";
        return exit_code::config;
    }
    RngStream rng(args.seed, 0);
    std::vector<Vec64> ends;
    for (std::size_t k = 0; k < args.endpoints; ++k) ends.push_back(gaussian_sample(rng, ckpt->net.latent_dim()));
    const auto images = interpolate_latent(ckpt->net, ends, args.steps);
    try {
        detail::write_file_bytes(args.out.string(), encode_ppm_grid(images, shape, args.steps));
    } catch (const Error& e) {
        err << "imle interpolate: " << e.what() << "\n";
        return exit_code::config;
    }
    out << "wrote " << images.size() << " images to " << args.out.string() << "\n";
    return exit_code::ok;
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

struct VerifyArgs {
    std::string suite = "all";
    std::uint64_t seed = 0;
    std::filesystem::path out = "verify";
};

/// Writes <out>/<suite>.csv for every selected suite.
inline int cmd_verify(const VerifyArgs& args, std::ostream& out, std::ostream& err) {
    std::vector<CheckReport> reports;
    try {
        const bool known = args.suite == "all" || std::find(std::begin(verify_suites), std::end(verify_suites),
                                                            args.suite) != std::end(verify_suites);
        if (!known) {
            throw Error(ErrorCode::config, "unknown verify suite '" + args.suite +
                                               "' (expected lemma1, lemma2, lemma3-psi, theorem1, tail-integral or all)");
        }
        detail::ensure_directory(args.out);
    } catch (const Error& e) {
        err << "imle verify: " << e.what() << "\n";
        return exit_code::config;
    }
    reports = run_verify_suite(args.suite, args.seed);
    bool all_pass = true;
    try {
        for (const auto& rep : reports) {
            detail::write_text_file(args.out / (rep.name + ".csv"), rep.csv());
            std::size_t passed = 0;
            for (const auto& r : rep.rows) passed += r.pass ? 1 : 0;
            out << (rep.all_pass() ? "[PASS] " : "[FAIL] ") << rep.name << ": " << passed << "/" << rep.rows.size()
                << " rows\n";
            for (const auto& r : rep.rows) {
                if (!r.pass) out << "    failed " << r.check_id << ": " << r.statistic << " vs " << r.expected << "\n";
            }
            all_pass = all_pass && rep.all_pass();
        }
    } catch (const Error& e) {
        err << "imle verify: " << e.what() << "\n";
        return exit_code::config;
    }
    return all_pass ? exit_code::ok : exit_code::failed;
}

} // namespace imle
