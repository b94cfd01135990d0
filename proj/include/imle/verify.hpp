#pragma once

#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

#include "imle/theory.hpp"

namespace imle {

/// One row of a verification report. Two-sided rows pass when |statistic - expected| <=
/// tolerance. One-sided rows (tolerance 0, `one_sided`) pass when statistic > expected.
struct CheckRow {
    std::string check_id;
    double statistic = 0.0;
    double expected = 0.0;
    double tolerance = 0.0;
    bool pass = false;
};

struct CheckReport {
    std::string name;
    std::vector<CheckRow> rows;

    bool all_pass() const {
        for (const auto& r : rows) {
            if (!r.pass) return false;
        }
        return !rows.empty();
    }

    void add_within(std::string id, double statistic, double expected, double tolerance) {
        const bool ok = std::isfinite(statistic) && std::abs(statistic - expected) <= tolerance;
        rows.push_back({std::move(id), statistic, expected, tolerance, ok});
    }

    void add_greater(std::string id, double statistic, double bound) {
        rows.push_back({std::move(id), statistic, bound, 0.0, statistic > bound});
    }

    std::string csv() const {
        std::string out = "check_id,statistic,expected,tolerance,pass\n";
        char buf[160];
        for (const auto& r : rows) {
            std::snprintf(buf, sizeof buf, ",%.17g,%.17g,%.17g,%s\n", r.statistic, r.expected, r.tolerance,
                          r.pass ? "true" : "false");
            out += r.check_id;
            out += buf;
        }
        return out;
    }
};

inline Dataset scalar_dataset(std::initializer_list<double> xs, std::string tag) {
    std::vector<Vec64> pts;
    for (double x : xs) pts.push_back({x});
    return Dataset(std::move(pts), std::move(tag));
}

// Each suite runs its checks at the tolerances it reports. Seeds select independent
// streams; the suites do not depend on each other.

inline CheckReport verify_theorem1(std::uint64_t seed) {
    CheckReport rep{"theorem1", {}};
    const RngStream root(seed, 0x7431);
    const Dataset sym = scalar_dataset({-1.0, 1.0}, "theorem1:{-1,1}");
    for (const std::size_t m : {1, 4, 16}) {
        const auto r = theorem1_equivalence_check(sym, 1.0, m, 20000, root.fork(m));
        rep.add_within("theorem1.sym.m" + std::to_string(m) + ".mle", r.theta_mle, 0.0, 0.0);
        rep.add_within("theorem1.sym.m" + std::to_string(m) + ".gap", r.gap, 0.0, 0.05);
    }
    const auto three = theorem1_equivalence_check(scalar_dataset({0.0, 2.0, 4.0}, "theorem1:{0,2,4}"), 1.0, 1,
                                                  20000, root.fork(100));
    rep.add_within("theorem1.three_point.m1.imle", three.theta_imle, 2.0, 0.05);
    rep.add_within("theorem1.three_point.m1.mle", three.theta_mle, 2.0, 1e-12);
    const auto wide =
        theorem1_equivalence_check(scalar_dataset({0.0, 10.0}, "theorem1:{0,10}"), 1.0, 1, 20000, root.fork(101));
    rep.add_within("theorem1.wide_pair.m1.imle", wide.theta_imle, 5.0, 0.05);
    rep.add_within("theorem1.wide_pair.m1.mle", wide.theta_mle, 5.0, 1e-12);
    return rep;
}

/// Geometric radius grid used by the density-slope check.
inline std::vector<double> lemma2_radius_grid() {
    std::vector<double> radii;
    for (int k = 0; k < 8; ++k) radii.push_back(0.1 * std::pow(8.0, k / 7.0));
    return radii;
}

inline CheckReport verify_lemma2(std::uint64_t seed, std::vector<std::size_t> dims = {1, 2, 3},
                                 std::size_t draws = 1000000) {
    CheckReport rep{"lemma2", {}};
    const double kappa_exact[] = {2.0, std::numbers::pi, 4.0 * std::numbers::pi / 3.0};
    for (std::size_t d = 1; d <= 3; ++d) {
        rep.add_within("lemma2.kappa.d" + std::to_string(d), ball_volume_constant(d), kappa_exact[d - 1], 1e-12);
    }
    const RngStream root(seed, 0x1e22);
    for (const std::size_t d : dims) {
        const auto fam = AnalyticFamily::standard_gaussian(d);
        const Vec64 x0(d, 0.0);
        RngStream rng = root.fork(d);
        const auto r = lemma2_density_check(fam, x0, draws, lemma2_radius_grid(), rng);
        rep.add_within("lemma2.slope.d" + std::to_string(d), r.slope, r.exact_density, 0.05 * r.exact_density);
    }
    return rep;
}

/// Feasible grid for the unit-minimum-scale Gaussian family: 8 levels up to the peak.
inline std::vector<double> psi_z_grid() {
    const double peak = GaussianShape::peak();
    std::vector<double> z;
    for (int k = 0; k < 8; ++k) z.push_back(0.05 + (peak - 0.05) * k / 7.0);
    return z;
}

inline CheckReport verify_psi(std::uint64_t seed, std::size_t m = 4, std::size_t trials = 10000) {
    CheckReport rep{"lemma3-psi", {}};
    const RngStream root(seed, 0x951);
    const LocationScaleFamily<GaussianShape> family{1.0, std::numeric_limits<double>::infinity()};
    const auto z = psi_z_grid();
    const PsiCurve curve = psi_estimate(family, z, m, trials, root.fork(1));
    for (std::size_t k = 0; k + 1 < curve.points.size(); ++k) {
        const auto& a = curve.points[k];
        const auto& b = curve.points[k + 1];
        // separation of the 2-stderr bands; positive means strictly decreasing
        rep.add_greater("lemma3.decreasing." + std::to_string(k) + "-" + std::to_string(k + 1),
                        (a.psi - 2.0 * a.std_error) - (b.psi + 2.0 * b.std_error), 0.0);
    }
    for (std::size_t k = 0; k < curve.points.size(); ++k) {
        rep.add_greater("lemma3.nonnegative." + std::to_string(k), curve.points[k].psi, 0.0);
    }
    // The top level z = peak pins (location, scale) = (0, 1), so Psi there is E[R] of N(0,1).
    const auto& top = curve.points.back();
    const McEstimate direct =
        expected_min_dist_mc(AnalyticFamily::gaussian_1d(0.0, 1.0), Vec64{0.0}, m, trials, root.fork(2));
    rep.add_within("lemma3.peak_anchor", top.psi, direct.mean,
                   3.0 * std::hypot(top.std_error, direct.std_error));
    return rep;
}

inline CheckReport verify_tail_integral(std::uint64_t seed, std::size_t draws = 100000) {
    CheckReport rep{"tail-integral", {}};
    const RngStream root(seed, 0x7a11);
    const auto fam = AnalyticFamily::gaussian_1d(0.0, 1.0);
    const Vec64 x0{0.0};
    RngStream rng = root.fork(1);
    const EmpiricalCdf cdf(single_draw_sq_distances(fam, x0, draws, rng));
    rep.add_within("tail.m1.equals_mean", tail_integral_expectation(cdf, 1), cdf.mean(), 1e-10);
    const std::size_t m = 8;
    const double tail = tail_integral_expectation(cdf, m);
    const double tail_se = tail_integral_stderr(cdf, m);
    const McEstimate mc = expected_min_dist_mc(fam, x0, m, draws, root.fork(2));
    rep.add_within("tail.m8.vs_mc", tail, mc.mean, 3.0 * std::hypot(tail_se, mc.std_error));
    return rep;
}

inline CheckReport verify_lemma1() {
    CheckReport rep{"lemma1", {}};
    auto quad = [](double x) { return std::function<double(double)>([x](double t) { return (t - x) * (t - x); }); };
    auto exp_fn = std::function<double(double)>([](double y) { return std::exp(y); });

    const TransformCheckSpec quad_exp{"quadratic-exp", {quad(0.0), quad(2.0), quad(4.0)}, exp_fn, exp_fn, -1.0, 5.0};
    const auto a = lemma1_transform_check(quad_exp);
    rep.add_within("lemma1.quadratic_exp.argmin_plain", a.argmin_plain, 2.0, 1e-3);
    rep.add_within("lemma1.quadratic_exp.gap", a.gap, 0.0, 1e-3);
    rep.add_within("lemma1.quadratic_exp.phi_increasing", a.phi_increasing ? 1.0 : 0.0, 1.0, 0.0);

    auto ident = std::function<double(double)>([](double y) { return y; });
    auto one = std::function<double(double)>([](double) { return 1.0; });
    const TransformCheckSpec identity{"identity", {quad(-1.0), quad(3.0), quad(7.5)}, ident, one, -2.0, 8.0};
    const auto b = lemma1_transform_check(identity);
    rep.add_within("lemma1.identity.gap", b.gap, 0.0, 0.0);

    auto log1p_fn = std::function<double(double)>([](double y) { return std::log1p(y); });
    auto log1p_prime = std::function<double(double)>([](double y) { return 1.0 / (1.0 + y); });
    const TransformCheckSpec single{"single-log1p", {quad(1.25)}, log1p_fn, log1p_prime, -3.0, 3.0};
    const auto c = lemma1_transform_check(single);
    rep.add_within("lemma1.single.gap", c.gap, 0.0, 1e-3);
    return rep;
}

inline constexpr std::string_view verify_suites[] = {"lemma1", "lemma2", "lemma3-psi", "theorem1", "tail-integral"};

/// Runs one suite by name, or every suite for "all". Unknown names throw a config error.
inline std::vector<CheckReport> run_verify_suite(std::string_view selector, std::uint64_t seed) {
    std::vector<CheckReport> out;
    const bool all = selector == "all";
    bool known = all;
    auto want = [&](std::string_view name) {
        const bool hit = all || selector == name;
        known = known || hit;
        return hit;
    };
    if (want("lemma1")) out.push_back(verify_lemma1());
    if (want("lemma2")) out.push_back(verify_lemma2(seed));
    if (want("lemma3-psi")) out.push_back(verify_psi(seed));
    if (want("theorem1")) out.push_back(verify_theorem1(seed));
    if (want("tail-integral")) out.push_back(verify_tail_integral(seed));
    if (!known) {
        throw Error(ErrorCode::config, "unknown verify suite '" + std::string(selector) +
                                           "' (expected lemma1, lemma2, lemma3-psi, theorem1, tail-integral or all)");
    }
    return out;
}

} // namespace imle
