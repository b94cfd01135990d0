#include <cmath>
#include <cstdlib>
#include <numbers>
#include <sstream>

#include <gtest/gtest.h>

#include "imle/commands.hpp"
#include "support.hpp"

using namespace imle;
namespace fs = std::filesystem;
using imle::testing::slurp;
using imle::testing::slurp_text;
using imle::testing::run_cli;
using imle::testing::mask_wall_ms;

namespace {

void write_json(const fs::path& path, const nlohmann::json& j) { std::ofstream(path) << j.dump(2); }

nlohmann::json ring_config(std::size_t K) {
    return {{"data", {{"format", "ring"}, {"n", 128}}},
            {"model", {{"layer_sizes", {2, 16, 16, 2}}}},
            {"train", {{"K", K}, {"L", 5}, {"batch_size", 32}, {"m", 128}, {"minibatch_size", 8}}},
            {"seed", 5}};
}

/// Checkpoint of a zero-weight net whose output is the constant bias `level`.
void save_constant_net(const fs::path& path, std::vector<std::size_t> sizes, OutputActivation act, double level,
                       std::optional<ImageShape> shape) {
    GeneratorNet net(sizes, act);
    Vec64 theta(net.parameter_count(), 0.0);
    for (std::size_t k = 0; k < net.output_dim(); ++k) theta[theta.size() - 1 - k] = level;
    net.set_parameters(theta);
    save_checkpoint(path.string(), Checkpoint{net, 0, 0, shape, nlohmann::json::object()});
}

std::size_t count_lines(const std::string& text) { return std::count(text.begin(), text.end(), '\n'); }

} // namespace

TEST(Cli, UsageAndHelp) {
    const auto dir = imle::testing::scratch_dir("cli-usage");
    EXPECT_EQ(run_cli("", dir).status, 2);
    EXPECT_EQ(run_cli("--help", dir).status, 0);
    EXPECT_EQ(run_cli("frobnicate", dir).status, 2);
    EXPECT_EQ(run_cli("train", dir).status, 2); // --config is required
}

TEST(Cli, TrainWithZeroIterationsWritesHeaderAndInitCheckpoint) {
    const auto dir = imle::testing::scratch_dir("cli-k0");
    write_json(dir / "cfg.json", ring_config(0));
    ASSERT_EQ(run_cli("train --config " + (dir / "cfg.json").string() + " --out " + (dir / "run").string(), dir).status, 0);
    EXPECT_EQ(slurp_text(dir / "run" / "trace.csv"), std::string(trace_header) + "\n");
    const Checkpoint ckpt = load_checkpoint((dir / "run" / "final.imle").string());
    EXPECT_EQ(ckpt.outer_iteration, 0u);
    EXPECT_EQ(ckpt.seed, 5u);
    // identical to the seeded initialization
    RngStream init = RngStream(5, 0).fork(1);
    const auto expected = GeneratorNet::he_init({2, 16, 16, 2}, OutputActivation::identity, init);
    EXPECT_EQ(ckpt.net.parameters(), expected.parameters());
    EXPECT_FALSE(ckpt.config.contains("out_dir"));
    EXPECT_EQ(ckpt.config["seed"], 5);
}

TEST(Cli, TrainIsDeterministicAndCheckpointsAtCadence) {
    const auto dir = imle::testing::scratch_dir("cli-det");
    auto cfg = ring_config(6);
    cfg["checkpoint_every"] = 3;
    write_json(dir / "cfg.json", cfg);
    for (const char* run : {"a", "b"}) {
        ASSERT_EQ(run_cli("train --config " + (dir / "cfg.json").string() + " --out " + (dir / run).string(), dir).status, 0);
    }
    const std::string ta = slurp_text(dir / "a" / "trace.csv");
    EXPECT_EQ(ta.substr(0, ta.find('\n')), trace_header);
    EXPECT_EQ(count_lines(ta), 7u);
    EXPECT_EQ(mask_wall_ms(ta), mask_wall_ms(slurp_text(dir / "b" / "trace.csv")));
    for (const char* f : {"final.imle", "ckpt_3.imle", "ckpt_6.imle"}) {
        ASSERT_TRUE(fs::exists(dir / "a" / f)) << f;
        EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f)) << f;
    }
    EXPECT_EQ(load_checkpoint((dir / "a" / "ckpt_3.imle").string()).outer_iteration, 3u);
    EXPECT_FALSE(fs::exists(dir / "a" / "ckpt_1.imle"));
}

TEST(Cli, SeedFlagOverridesConfig) {
    const auto dir = imle::testing::scratch_dir("cli-seed");
    write_json(dir / "cfg.json", ring_config(1));
    ASSERT_EQ(run_cli("train --config " + (dir / "cfg.json").string() + " --seed 6 --out " + (dir / "a").string(), dir).status, 0);
    ASSERT_EQ(run_cli("train --config " + (dir / "cfg.json").string() + " --out " + (dir / "b").string(), dir).status, 0);
    EXPECT_EQ(load_checkpoint((dir / "a" / "final.imle").string()).seed, 6u);
    EXPECT_NE(slurp(dir / "a" / "final.imle"), slurp(dir / "b" / "final.imle"));
}

TEST(Cli, TrainConfigErrorsExitTwo) {
    const auto dir = imle::testing::scratch_dir("cli-train-err");
    write_json(dir / "missing.json", {{"data", {{"format", "idx"}, {"path", "no/such/file.idx"}}}});
    const auto r = run_cli("train --config " + (dir / "missing.json").string() + " --out " + (dir / "o").string(), dir);
    EXPECT_EQ(r.status, 2);
    EXPECT_NE(r.err.find("no/such/file.idx"), std::string::npos) << r.err;

    auto typo = ring_config(1);
    typo["train"]["learning_rate"] = 0.1;
    write_json(dir / "typo.json", typo);
    const auto t = run_cli("train --config " + (dir / "typo.json").string(), dir);
    EXPECT_EQ(t.status, 2);
    EXPECT_NE(t.err.find("learning_rate"), std::string::npos);

    EXPECT_EQ(run_cli("train --config " + (dir / "absent.json").string(), dir).status, 2);
}

TEST(Cli, TrainDivergenceExitsOne) {
    const auto dir = imle::testing::scratch_dir("cli-diverge");
    auto cfg = ring_config(3);
    cfg["train"]["eta"] = 50.0;
    cfg["train"]["L"] = 50;
    write_json(dir / "cfg.json", cfg);
    const auto r = run_cli("train --config " + (dir / "cfg.json").string() + " --out " + (dir / "o").string(), dir);
    EXPECT_EQ(r.status, 1);
    EXPECT_NE(r.err.find("divergence"), std::string::npos) << r.err;
}

TEST(Cli, TrainSnapshotsNeedAnImageShape) {
    const auto dir = imle::testing::scratch_dir("cli-snap");
    auto cfg = ring_config(2);
    cfg["snapshot_samples"] = 4;
    write_json(dir / "bad.json", cfg);
    EXPECT_EQ(run_cli("train --config " + (dir / "bad.json").string() + " --out " + (dir / "o").string(), dir).status, 2);
    cfg["image_shape"] = {1, 2};
    cfg["checkpoint_every"] = 1;
    write_json(dir / "ok.json", cfg);
    ASSERT_EQ(run_cli("train --config " + (dir / "ok.json").string() + " --out " + (dir / "o").string(), dir).status, 0);
    for (const char* f : {"samples_0.ppm", "samples_1.ppm", "samples_2.ppm"}) EXPECT_TRUE(fs::exists(dir / "o" / f)) << f;
}

TEST(Cli, SampleZeroSigmoidNetIsAllMidGray) {
    const auto dir = imle::testing::scratch_dir("cli-sample-ppm");
    save_constant_net(dir / "z.imle", {3, 4, 6}, OutputActivation::sigmoid, 0.0, ImageShape{2, 3});
    ASSERT_EQ(run_cli("sample --checkpoint " + (dir / "z.imle").string() + " --count 5 --format ppm-grid --grid-cols 2 --out " +
                          (dir / "s.ppm").string(),
                      dir)
                  .status,
              0);
    const auto ppm = slurp(dir / "s.ppm");
    const std::string header = "P6\n6 6\n255\n";
    ASSERT_EQ(ppm.size(), header.size() + 3 * 36);
    EXPECT_EQ(std::string(ppm.begin(), ppm.begin() + header.size()), header);
    // five tiles of 128, the sixth (empty) tile black
    std::size_t gray = 0, black = 0;
    for (std::size_t k = header.size(); k < ppm.size(); ++k) (ppm[k] == 128 ? gray : black) += 1;
    EXPECT_EQ(gray, 3u * 6 * 5);
    EXPECT_EQ(black, 3u * 6);
}

TEST(Cli, SampleCsvShapeAndDeterminism) {
    const auto dir = imle::testing::scratch_dir("cli-sample-csv");
    RngStream rng(1, 1);
    const auto net = GeneratorNet::he_init({2, 8, 3}, OutputActivation::identity, rng);
    save_checkpoint((dir / "n.imle").string(), Checkpoint{net, 1, 0, std::nullopt, nlohmann::json::object()});
    const std::string base = "sample --checkpoint " + (dir / "n.imle").string();
    ASSERT_EQ(run_cli(base + " --count 1 --out " + (dir / "one.csv").string(), dir).status, 0);
    const std::string one = slurp_text(dir / "one.csv");
    EXPECT_EQ(count_lines(one), 1u);
    EXPECT_EQ(std::count(one.begin(), one.end(), ','), 2);
    // the row is the first draw of the seeded stream
    RngStream srng(0, 0);
    EXPECT_EQ(one, detail::format_row(net.sample(srng)));

    ASSERT_EQ(run_cli(base + " --count 20 --seed 3 --out " + (dir / "a.csv").string(), dir).status, 0);
    ASSERT_EQ(run_cli(base + " --count 20 --seed 3 --out " + (dir / "b.csv").string(), dir).status, 0);
    ASSERT_EQ(run_cli(base + " --count 20 --seed 4 --out " + (dir / "c.csv").string(), dir).status, 0);
    EXPECT_EQ(slurp(dir / "a.csv"), slurp(dir / "b.csv"));
    EXPECT_NE(slurp(dir / "a.csv"), slurp(dir / "c.csv"));
    EXPECT_EQ(count_lines(slurp_text(dir / "a.csv")), 20u);
}

TEST(Cli, SampleErrors) {
    const auto dir = imle::testing::scratch_dir("cli-sample-err");
    save_constant_net(dir / "flat.imle", {2, 4, 5}, OutputActivation::identity, 0.1, std::nullopt);
    const std::string base = "sample --checkpoint " + (dir / "flat.imle").string() + " --out " + (dir / "x").string();
    EXPECT_EQ(run_cli(base + " --format ppm-grid", dir).status, 2); // 5 values, no declared raster
    EXPECT_EQ(run_cli(base + " --format png", dir).status, 2);
    EXPECT_EQ(run_cli(base + " --count 0", dir).status, 2);
    EXPECT_EQ(run_cli("sample --checkpoint " + (dir / "nope.imle").string() + " --out " + (dir / "x").string(), dir).status, 2);
    std::ofstream(dir / "junk.imle") << "not a checkpoint at all";
    EXPECT_EQ(run_cli("sample --checkpoint " + (dir / "junk.imle").string() + " --out " + (dir / "x").string(), dir).status, 2);
}

TEST(Cli, SampleNeighbourAudit) {
    const auto dir = imle::testing::scratch_dir("cli-nn");
    save_constant_net(dir / "c.imle", {2, 3, 2}, OutputActivation::identity, 1.0, std::nullopt);
    std::ofstream(dir / "train.csv") << "5,5\n1.1,0.9\n-3,2\n";
    ASSERT_EQ(run_cli("sample --checkpoint " + (dir / "c.imle").string() + " --count 2 --out " + (dir / "s.csv").string() +
                          " --neighbours " + (dir / "train.csv").string(),
                      dir)
                  .status,
              0);
    const std::string nn = slurp_text(dir / "s.csv.neighbours.csv");
    EXPECT_EQ(nn.substr(0, nn.find('\n')), "sample,training_index,sq_dist");
    EXPECT_NE(nn.find("\n0,1,"), std::string::npos);
    EXPECT_NE(nn.find("\n1,1,"), std::string::npos);
}

TEST(Cli, EvalConstantNetMatchesClosedForm) {
    const auto dir = imle::testing::scratch_dir("cli-eval");
    const double c = 0.25;
    save_constant_net(dir / "c.imle", {2, 4, 3}, OutputActivation::identity, c, std::nullopt);
    {
        std::ofstream test(dir / "test.csv");
        for (int k = 0; k < 40; ++k) test << c << "," << c << "," << c << "\n";
    }
    const std::string base = "eval --checkpoint " + (dir / "c.imle").string() + " --test " + (dir / "test.csv").string() +
                             " --centers 50 --sigma-grid 0.1,0.5,1.0";
    ASSERT_EQ(run_cli(base + " --out " + (dir / "a.csv").string(), dir).status, 0);
    const std::string report = slurp_text(dir / "a.csv");
    EXPECT_EQ(report.substr(0, report.find('\n')), eval_header);
    double sigma = 0, mean = 0, se = -1;
    std::size_t n_test = 0, n_val = 0, n_centers = 0;
    ASSERT_EQ(std::sscanf(report.c_str() + report.find('\n') + 1, "%lf,%lf,%lf,%zu,%zu,%zu", &sigma, &mean, &se, &n_test,
                          &n_val, &n_centers),
              6);
    EXPECT_EQ(sigma, 0.1);
    EXPECT_NEAR(mean, -1.5 * std::log(2.0 * std::numbers::pi * 0.01), 1e-12);
    EXPECT_EQ(se, 0.0);
    EXPECT_EQ(n_val, 4u);
    EXPECT_EQ(n_test, 36u);
    EXPECT_EQ(n_centers, 50u);

    ASSERT_EQ(run_cli(base + " --out " + (dir / "b.csv").string(), dir).status, 0);
    EXPECT_EQ(slurp(dir / "a.csv"), slurp(dir / "b.csv"));
}

TEST(Cli, EvalErrors) {
    const auto dir = imle::testing::scratch_dir("cli-eval-err");
    save_constant_net(dir / "c.imle", {2, 4, 2}, OutputActivation::identity, 0.0, std::nullopt);
    std::ofstream(dir / "t.csv") << "0,0\n1,1\n0.5,0.5\n";
    std::ofstream(dir / "t3.csv") << "0,0,0\n1,1,1\n";
    const std::string base = "eval --checkpoint " + (dir / "c.imle").string() + " --out " + (dir / "r.csv").string();
    EXPECT_EQ(run_cli(base + " --test " + (dir / "t.csv").string() + " --sigma-grid ''", dir).status, 2);
    EXPECT_EQ(run_cli(base + " --test " + (dir / "t.csv").string() + " --sigma-grid 0.1,-1", dir).status, 2);
    EXPECT_EQ(run_cli(base + " --test " + (dir / "t3.csv").string(), dir).status, 2);
    EXPECT_EQ(run_cli(base + " --test " + (dir / "absent.csv").string(), dir).status, 2);
    EXPECT_EQ(run_cli(base + " --test " + (dir / "t.csv").string() + " --validation-fraction 1.5", dir).status, 2);
    EXPECT_FALSE(fs::exists(dir / "r.csv"));
}

TEST(Cli, InterpolateMatchesLibraryPixels) {
    const auto dir = imle::testing::scratch_dir("cli-interp");
    RngStream rng(2, 2);
    const auto net = GeneratorNet::he_init({3, 8, 4}, OutputActivation::sigmoid, rng);
    save_checkpoint((dir / "n.imle").string(), Checkpoint{net, 0, 0, ImageShape{2, 2}, nlohmann::json::object()});
    ASSERT_EQ(run_cli("interpolate --checkpoint " + (dir / "n.imle").string() + " --endpoints 3 --steps 4 --seed 9 --out " +
                          (dir / "i.ppm").string(),
                      dir)
                  .status,
              0);
    RngStream erng(9, 0);
    std::vector<Vec64> ends;
    for (int k = 0; k < 3; ++k) ends.push_back(gaussian_sample(erng, 3));
    const auto images = interpolate_latent(net, ends, 4);
    EXPECT_EQ(slurp(dir / "i.ppm"), encode_ppm_grid(images, ImageShape{2, 2}, 4));
    const std::string head(reinterpret_cast<const char*>(slurp(dir / "i.ppm").data()), 11);
    EXPECT_EQ(head, "P6\n8 6\n255\n"); // 4 columns x 3 segment rows of 2x2 tiles
}

TEST(Cli, InterpolateErrors) {
    const auto dir = imle::testing::scratch_dir("cli-interp-err");
    save_constant_net(dir / "flat.imle", {2, 2, 3}, OutputActivation::sigmoid, 0.0, std::nullopt);
    save_constant_net(dir / "img.imle", {2, 2, 4}, OutputActivation::sigmoid, 0.0, ImageShape{2, 2});
    EXPECT_EQ(run_cli("interpolate --checkpoint " + (dir / "flat.imle").string() + " --out " + (dir / "x.ppm").string(), dir).status, 2);
    EXPECT_EQ(run_cli("interpolate --checkpoint " + (dir / "img.imle").string() + " --steps 1 --out " + (dir / "x.ppm").string(), dir).status, 2);
    EXPECT_EQ(run_cli("interpolate --checkpoint " + (dir / "img.imle").string() + " --endpoints 1 --out " + (dir / "x.ppm").string(), dir).status, 2);
}

TEST(Cli, VerifySuites) {
    const auto dir = imle::testing::scratch_dir("cli-verify");
    ASSERT_EQ(run_cli("verify --suite theorem1 --seed 1 --out " + (dir / "v").string(), dir).status, 0);
    const std::string csv = slurp_text(dir / "v" / "theorem1.csv");
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "check_id,statistic,expected,tolerance,pass");
    EXPECT_NE(csv.find("theorem1.sym.m16.gap"), std::string::npos);
    EXPECT_EQ(csv.find(",false"), std::string::npos);

    ASSERT_EQ(run_cli("verify --suite lemma2 --seed 1 --out " + (dir / "v").string(), dir).status, 0);
    EXPECT_NE(slurp_text(dir / "v" / "lemma2.csv").find("lemma2.slope.d2"), std::string::npos);

    EXPECT_EQ(run_cli("verify --suite lemma9 --out " + (dir / "v").string(), dir).status, 2);
}

TEST(Cli, VerifyAllWritesOneReportPerSuiteDeterministically) {
    const auto dir = imle::testing::scratch_dir("cli-verify-all");
    ASSERT_EQ(run_cli("verify --seed 3 --out " + (dir / "a").string(), dir).status, 0);
    ASSERT_EQ(run_cli("verify --seed 3 --out " + (dir / "b").string(), dir).status, 0);
    for (const auto suite : verify_suites) {
        const std::string f = std::string(suite) + ".csv";
        ASSERT_TRUE(fs::exists(dir / "a" / f)) << f;
        EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f)) << f;
    }
}
