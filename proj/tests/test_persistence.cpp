#include <cstring>
#include <limits>

#include <gtest/gtest.h>

#include "imle/checkpoint.hpp"
#include "imle/config.hpp"
#include "imle/raster.hpp"
#include "support.hpp"

using namespace imle;
using imle::testing::error_code_of;

namespace {

Checkpoint sample_checkpoint() {
    RngStream rng(3, 1);
    Checkpoint c{GeneratorNet::he_init({3, 5, 4}, OutputActivation::sigmoid, rng), 42, 17, ImageShape{2, 2},
                 nlohmann::json{{"note", "x"}}};
    // awkward values: negative zero, subnormal, extremes
    Vec64 theta = c.net.parameters();
    theta[0] = -0.0;
    theta[1] = std::numeric_limits<double>::denorm_min();
    theta[2] = std::numeric_limits<double>::max();
    theta[3] = 1.0 / 3.0;
    c.net.set_parameters(theta);
    return c;
}

std::uint64_t le64(const std::vector<std::uint8_t>& b, std::size_t at) {
    std::uint64_t v = 0;
    for (int k = 7; k >= 0; --k) v = (v << 8) | b[at + k];
    return v;
}

} // namespace

TEST(Checkpoint, ByteLayout) {
    const Checkpoint c = sample_checkpoint();
    const auto bytes = encode_checkpoint(c);
    ASSERT_GE(bytes.size(), 16u);
    EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "IMLE");
    EXPECT_EQ(bytes[4], 1);
    EXPECT_EQ(bytes[5] | bytes[6] | bytes[7], 0);
    const std::uint64_t meta_len = le64(bytes, 8);
    EXPECT_EQ(bytes.size(), 16 + meta_len + 8 * c.net.parameter_count());
    const auto meta = nlohmann::json::parse(std::string(bytes.begin() + 16, bytes.begin() + 16 + meta_len));
    EXPECT_EQ(meta["layer_sizes"], (std::vector<std::size_t>{3, 5, 4}));
    EXPECT_EQ(meta["activations"]["hidden"], "relu");
    EXPECT_EQ(meta["activations"]["output"], "sigmoid");
    EXPECT_EQ(meta["seed"], 42);
    EXPECT_EQ(meta["outer_iteration"], 17);
    EXPECT_EQ(meta["image_shape"], nlohmann::json::array({2, 2}));
    EXPECT_EQ(meta["config"]["note"], "x");
    // parameter k is the little-endian bit pattern of the k-th flat parameter
    const Vec64 theta = c.net.parameters();
    for (std::size_t k = 0; k < theta.size(); ++k) {
        std::uint64_t bits;
        std::memcpy(&bits, &theta[k], 8);
        ASSERT_EQ(le64(bytes, 16 + meta_len + 8 * k), bits) << "parameter " << k;
    }
}

TEST(Checkpoint, RoundTripIsBitwise) {
    const Checkpoint c = sample_checkpoint();
    const auto bytes = encode_checkpoint(c);
    const Checkpoint back = decode_checkpoint(bytes);
    const Vec64 a = c.net.parameters(), b = back.net.parameters();
    ASSERT_EQ(a.size(), b.size());
    EXPECT_EQ(std::memcmp(a.data(), b.data(), a.size() * 8), 0);
    EXPECT_TRUE(std::signbit(b[0]));
    EXPECT_EQ(back.seed, 42u);
    EXPECT_EQ(back.outer_iteration, 17u);
    EXPECT_EQ(back.image_shape, (ImageShape{2, 2}));
    EXPECT_EQ(back.net.output_activation(), OutputActivation::sigmoid);
    EXPECT_EQ(encode_checkpoint(back), bytes);
}

TEST(Checkpoint, SaveLoadSaveIsByteIdentical) {
    const auto dir = imle::testing::scratch_dir("ckpt");
    Checkpoint c = sample_checkpoint();
    c.image_shape.reset();
    save_checkpoint((dir / "a.imle").string(), c);
    save_checkpoint((dir / "b.imle").string(), load_checkpoint((dir / "a.imle").string()));
    EXPECT_EQ(imle::testing::slurp(dir / "a.imle"), imle::testing::slurp(dir / "b.imle"));
    EXPECT_FALSE(load_checkpoint((dir / "b.imle").string()).image_shape.has_value());
}

TEST(Checkpoint, DecodeErrors) {
    const auto good = encode_checkpoint(sample_checkpoint());
    auto code = [](std::vector<std::uint8_t> b) { return error_code_of([&] { decode_checkpoint(b); }); };

    EXPECT_EQ(code({good.begin(), good.begin() + 10}), ErrorCode::truncated_header);
    auto bad_magic = good;
    bad_magic[0] = 'X';
    EXPECT_EQ(code(bad_magic), ErrorCode::bad_magic);
    auto bad_version = good;
    bad_version[4] = 2;
    EXPECT_EQ(code(bad_version), ErrorCode::unsupported_type);
    auto huge_meta = good;
    huge_meta[15] = 0x7f;
    EXPECT_EQ(code(huge_meta), ErrorCode::truncated_payload);
    EXPECT_EQ(code({good.begin(), good.end() - 8}), ErrorCode::truncated_payload);
    auto long_blob = good;
    long_blob.insert(long_blob.end(), 8, 0);
    EXPECT_EQ(code(long_blob), ErrorCode::parse);
    auto broken_json = good;
    broken_json[16] = '!';
    EXPECT_EQ(code(broken_json), ErrorCode::parse);
    EXPECT_EQ(error_code_of([] { load_checkpoint("/nonexistent/x.imle"); }), ErrorCode::io);
}

TEST(Checkpoint, RejectsNonReluHidden) {
    const Checkpoint c = sample_checkpoint();
    auto meta = c.metadata();
    meta["activations"]["hidden"] = "tanh";
    const std::string text = meta.dump();
    std::vector<std::uint8_t> b{'I', 'M', 'L', 'E'};
    detail::append_le<std::uint32_t>(b, 1);
    detail::append_le<std::uint64_t>(b, text.size());
    b.insert(b.end(), text.begin(), text.end());
    for (double v : c.net.parameters()) detail::append_le<double>(b, v);
    EXPECT_EQ(error_code_of([&] { decode_checkpoint(b); }), ErrorCode::unsupported_type);
}

TEST(Raster, PixelRounding) {
    EXPECT_EQ(to_pixel(0.5), 128);  // 127.5 rounds away from zero
    EXPECT_EQ(to_pixel(0.0), 0);
    EXPECT_EQ(to_pixel(1.0), 255);
    EXPECT_EQ(to_pixel(-3.0), 0);
    EXPECT_EQ(to_pixel(7.0), 255);
    EXPECT_EQ(to_pixel(1.0 / 255.0), 1);
    EXPECT_EQ(to_pixel(0.499 / 255.0), 0);
}

TEST(Raster, PpmGridLayout) {
    // three 1x2 images in a grid two tiles wide: 4x2 pixels, last tile black
    const std::vector<Vec64> imgs{{0.0, 1.0}, {0.5, 0.2}, {1.0, 1.0}};
    const auto ppm = encode_ppm_grid(imgs, ImageShape{1, 2}, 2);
    const std::string header = "P6\n4 2\n255\n";
    ASSERT_EQ(ppm.size(), header.size() + 3 * 8);
    EXPECT_EQ(std::string(ppm.begin(), ppm.begin() + header.size()), header);
    const std::uint8_t expected_gray[] = {0, 255, 128, 51, 255, 255, 0, 0};
    for (std::size_t p = 0; p < 8; ++p) {
        for (int ch = 0; ch < 3; ++ch) EXPECT_EQ(ppm[header.size() + 3 * p + ch], expected_gray[p]) << "pixel " << p;
    }
}

TEST(Raster, Errors) {
    const std::vector<Vec64> imgs{{0.0, 1.0, 0.5}};
    EXPECT_EQ(error_code_of([&] { encode_ppm_grid(imgs, ImageShape{1, 2}, 1); }), ErrorCode::dimension_mismatch);
    EXPECT_EQ(error_code_of([&] { encode_ppm_grid(imgs, ImageShape{1, 3}, 0); }), ErrorCode::invalid_argument);
    EXPECT_EQ(error_code_of([&] { encode_ppm_grid(std::vector<Vec64>{}, ImageShape{1, 3}, 1); }),
              ErrorCode::invalid_argument);
}

TEST(Idx, CraftedFileMatchesByteLayout) {
    // magic 00 00 08 03, dims 2 x 2 x 3 big-endian, then 12 unsigned bytes
    std::vector<std::uint8_t> b{0, 0, 8, 3, 0, 0, 0, 2, 0, 0, 0, 2, 0, 0, 0, 3};
    for (int k = 0; k < 12; ++k) b.push_back(static_cast<std::uint8_t>(k * 20));
    const Dataset d = parse_idx(b);
    ASSERT_EQ(d.size(), 2u);
    ASSERT_EQ(d.dim(), 6u);
    EXPECT_EQ(d.image_shape(), (ImageShape{2, 3}));
    for (int k = 0; k < 12; ++k) EXPECT_DOUBLE_EQ(d[k / 6][k % 6], (k * 20) / 255.0);
    EXPECT_EQ(encode_idx(d), b);
}

TEST(Config, ParsesAllBlocks) {
    const auto j = nlohmann::json::parse(R"({
        "data": {"format": "csv", "path": "pts.csv", "has_header": true, "limit": 10},
        "model": {"layer_sizes": [4, 8, 2], "output_activation": "sigmoid"},
        "train": {"m": 100, "K": 3, "L": 2, "eta": 0.001, "batch_size": 10, "minibatch_size": 5,
                  "optimizer": "adam", "index_structure": "brute", "stale_matching": true},
        "seed": 9, "out_dir": "out", "checkpoint_every": 2, "snapshot_samples": 4,
        "image_shape": [1, 2]})");
    const auto cfg = parse_train_config(j, "/base");
    EXPECT_EQ(cfg.data.path, "/base/pts.csv");
    EXPECT_TRUE(cfg.data.has_header);
    EXPECT_EQ(cfg.data.limit, 10u);
    EXPECT_EQ(cfg.layer_sizes, (std::vector<std::size_t>{4, 8, 2}));
    EXPECT_EQ(cfg.output_activation, OutputActivation::sigmoid);
    EXPECT_EQ(*cfg.imle.m, 100u);
    EXPECT_EQ(cfg.imle.outer_iterations, 3u);
    EXPECT_EQ(cfg.imle.inner_iterations, 2u);
    EXPECT_EQ(cfg.imle.eta, 0.001);
    EXPECT_EQ(cfg.imle.optimizer, OptimizerKind::adam);
    EXPECT_EQ(cfg.imle.index_structure, IndexStructure::brute);
    EXPECT_TRUE(cfg.imle.stale_matching);
    EXPECT_EQ(cfg.seed, 9u);
    EXPECT_EQ(cfg.out_dir, std::filesystem::path("/base/out"));
    EXPECT_EQ(cfg.checkpoint_every, 2u);
    EXPECT_EQ(cfg.image_shape, (ImageShape{1, 2}));
    EXPECT_EQ(resolve_architecture(cfg, 2).output, OutputActivation::sigmoid);
    EXPECT_EQ(error_code_of([&] { resolve_architecture(cfg, 3); }), ErrorCode::config);
}

TEST(Config, RingDefaultsAndPreset) {
    const auto cfg = parse_train_config(nlohmann::json::parse(R"({"data": {"format": "ring"}})"));
    EXPECT_EQ(cfg.preset, "ring");
    EXPECT_EQ(cfg.data.k, 8u);
    EXPECT_EQ(cfg.data.n, 512u);
    const Dataset d = load_training_data(cfg, 1);
    EXPECT_EQ(d.size(), 512u);
    EXPECT_EQ(d.dim(), 2u);
    EXPECT_EQ(resolve_architecture(cfg, 2).layer_sizes, (std::vector<std::size_t>{2, 64, 64, 2}));
    // the same fallback seed regenerates the same data
    EXPECT_EQ(load_training_data(cfg, 1).points(), d.points());
}

TEST(Config, UnknownKeysAndBadValuesAreConfigErrors) {
    auto code = [](const char* text) {
        return error_code_of([&] { parse_train_config(nlohmann::json::parse(text)); });
    };
    EXPECT_EQ(code(R"({"data": {"format": "ring"}, "epochs": 3})"), ErrorCode::config);
    EXPECT_EQ(code(R"({"data": {"format": "ring", "radious": 3}})"), ErrorCode::config);
    EXPECT_EQ(code(R"({"data": {"format": "ring"}, "train": {"lr": 0.1}})"), ErrorCode::config);
    EXPECT_EQ(code(R"({"data": {"format": "ring"}, "model": {"depth": 3}})"), ErrorCode::config);
    EXPECT_EQ(code(R"({"data": {"format": "parquet"}})"), ErrorCode::config);
    EXPECT_EQ(code(R"({"data": {"format": "idx"}})"), ErrorCode::config);
    EXPECT_EQ(code(R"({"data": {"format": "ring"}, "train": {"K": "many"}})"), ErrorCode::config);
    EXPECT_EQ(code(R"({"data": {"format": "ring"}, "train": {"optimizer": "lbfgs"}})"), ErrorCode::config);
    EXPECT_EQ(code(R"({"data": {"format": "ring"}, "image_shape": [28]})"), ErrorCode::config);
    EXPECT_EQ(code(R"({"model": {}})"), ErrorCode::config);
    EXPECT_EQ(code(R"([1, 2])"), ErrorCode::config);
}

TEST(Config, MissingDataFileIsAnIoErrorNamingThePath) {
    const auto cfg =
        parse_train_config(nlohmann::json::parse(R"({"data": {"format": "idx", "path": "nope.idx"}})"), "/tmp/zz");
    try {
        load_training_data(cfg, 0);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::io);
        EXPECT_NE(std::string(e.what()).find("/tmp/zz/nope.idx"), std::string::npos);
    }
}

TEST(Config, ShippedConfigsParse) {
    for (const char* name : {"ring.json", "mnist_desk.json"}) {
        const auto path = std::filesystem::path(IMLE_SOURCE_DIR) / "configs" / name;
        EXPECT_NO_THROW(load_train_config(path)) << name;
    }
}
