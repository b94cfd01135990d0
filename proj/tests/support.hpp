#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <optional>
#include <sstream>
#include <string>
#include <vector>
#include <sys/wait.h>

#include "imle/models.hpp"

namespace imle::testing {

/// Code carried by the imle::Error thrown by fn, or nullopt when nothing (or something
/// else) is thrown.
inline std::optional<ErrorCode> error_code_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    } catch (...) {
    }
    return std::nullopt;
}

inline std::vector<std::uint8_t> slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::string slurp_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("imle-test-" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

#ifdef IMLE_CLI_PATH
struct Run {
    int status = -1;
    std::string err;
};

/// Runs the CLI binary with `args`, capturing stdout and stderr into files under `dir`.
inline Run run_cli(const std::string& args, const std::filesystem::path& dir) {
    const std::filesystem::path err_file = dir / "stderr.txt";
    const std::string cmd = std::string(IMLE_CLI_PATH) + " " + args + " > " + (dir / "stdout.txt").string() +
                            " 2> " + err_file.string();
    const int raw = std::system(cmd.c_str());
    return {WIFEXITED(raw) ? WEXITSTATUS(raw) : -1, slurp_text(err_file)};
}

#endif

// every line with its 4th column (wall_ms) removed
inline std::string mask_wall_ms(const std::string& csv) {
    std::istringstream in(csv);
    std::string line, out;
    while (std::getline(in, line)) {
        std::vector<std::string> cols;
        std::stringstream ss(line);
        for (std::string c; std::getline(ss, c, ',');) cols.push_back(c);
        if (cols.size() == 5) cols.erase(cols.begin() + 3);
        for (std::size_t k = 0; k < cols.size(); ++k) out += (k ? "," : "") + cols[k];
        out += "\n";
    }
    return out;
}

struct GradCheck {
    double rel_error = 0.0;
    std::size_t parameters = 0;
    std::vector<std::size_t> layer_sizes;
};

/// Backprop gradient of upstream . T(z) against central differences, for one random net.
/// z is redrawn until every hidden pre-activation is at least `margin` away from the ReLU
/// kink, so the finite-difference stencil never straddles it.
inline GradCheck random_gradient_check(RngStream& rng, double h = 1e-6, double margin = 1e-3) {
    const std::size_t depth = 2 + rng.uniform_index(3); // 2..4 layers
    std::vector<std::size_t> sizes;
    for (std::size_t l = 0; l <= depth; ++l) sizes.push_back(1 + rng.uniform_index(8));
    const auto output = rng.uniform() < 0.5 ? OutputActivation::identity : OutputActivation::sigmoid;
    GeneratorNet net = GeneratorNet::he_init(sizes, output, rng);
    Vec64 theta = net.parameters();
    // nonzero biases so the bias paths are exercised
    for (std::size_t l = 0, pos = 0; l < net.layers(); ++l) {
        pos += net.weight(l).size();
        for (std::size_t r = 0; r < net.bias(l).size(); ++r) theta[pos + r] = 0.3 * rng.normal();
        pos += net.bias(l).size();
    }
    net.set_parameters(theta);

    Vec64 z;
    for (int attempt = 0; attempt < 1000; ++attempt) {
        z = gaussian_sample(rng, net.latent_dim());
        const ForwardCache cache = net.forward_cached(z);
        bool clear = true;
        for (std::size_t l = 0; l + 1 < net.layers(); ++l) {
            for (double a : cache.pre_activations[l]) clear = clear && std::abs(a) >= margin;
        }
        if (clear) break;
    }
    const Vec64 upstream = gaussian_sample(rng, net.output_dim());

    const Vec64 analytic = net.backward(z, upstream);
    GeneratorNet probe = net;
    const Vec64 numeric = finite_diff_grad(
        [&](std::span<const double> t) {
            probe.set_parameters(t);
            return dot(upstream, probe.forward(z));
        },
        theta, h);

    double diff = 0.0;
    for (std::size_t k = 0; k < analytic.size(); ++k) diff += (analytic[k] - numeric[k]) * (analytic[k] - numeric[k]);
    const double scale = std::max({l2_norm(analytic), l2_norm(numeric), 1e-12});
    return {std::sqrt(diff) / scale, theta.size(), sizes};
}

} // namespace imle::testing
