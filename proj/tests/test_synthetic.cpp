#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "qqnet/benchmark.hpp"
#include "qqnet/classify.hpp"
#include "qqnet/descriptor.hpp"
#include "qqnet/synthetic.hpp"
#include "test_util.hpp"

using namespace qqnet;

TEST(BlobTest, OrderZeroSymmetricPeak) {
    const Image b = make_blob(0, 9.0, 41);
    EXPECT_DOUBLE_EQ(b(20, 20), 1.0);
    for (int d = 1; d < 20; ++d) {
        EXPECT_DOUBLE_EQ(b(20 + d, 20), b(20, 20 + d));
        EXPECT_DOUBLE_EQ(b(20 - d, 20), b(20, 20 - d));
        EXPECT_LT(b(20 + d, 20), b(20 + d - 1, 20));
    }
}

TEST(BlobTest, OrderOneIsOdd) {
    const Image b = make_blob(1, 9.0, 41);
    for (int d = 0; d < 20; ++d)
        for (int y : {5, 20, 33}) EXPECT_DOUBLE_EQ(b(20 + d, y), -b(20 - d, y));
}

TEST(BlobTest, OrderTwoMatchesAnalyticSecondDerivative) {
    const double s0 = 9.0;
    const Image b = make_blob(2, s0, 41);
    // s0 * d^2/dx^2 exp(-x^2 / (2 s0)) = (x^2 - s0) / s0 * exp(.)
    for (int x = 0; x < 41; ++x) {
        const double dx = x - 20.0;
        EXPECT_NEAR(b(x, 20), (dx * dx - s0) / s0 * std::exp(-dx * dx / (2 * s0)), 1e-15);
        EXPECT_GE(b(x, 20), b(20, 20));
    }
    EXPECT_DOUBLE_EQ(b(20, 20), -1.0);
}

TEST(BlobTest, Errors) {
    EXPECT_THROW(make_blob(3, 4.0, 32), DomainError);
    EXPECT_THROW(make_blob(0, 16.0, 31), DomainError);
    EXPECT_THROW(make_blob(0, 0.0, 31), DomainError);
}

TEST(TextureTest, DeterministicRangedAndSeedSensitive) {
    for (TextureKind k : kAllTextureKinds) {
        const Image a = make_texture(k, {}, 17, 64);
        EXPECT_EQ(a, make_texture(k, {}, 17, 64)) << to_string(k);
        for (double v : a.data()) {
            EXPECT_GE(v, 0.0);
            EXPECT_LE(v, 1.0);
        }
        if (k != TextureKind::grating) EXPECT_NE(a, make_texture(k, {}, 18, 64)) << to_string(k);
        EXPECT_EQ(parse_texture_kind(to_string(k)), k);
    }
    EXPECT_THROW(parse_texture_kind("plaid"), DomainError);
    EXPECT_THROW(make_texture(TextureKind::spots, {}, 1, 32), DomainError);
}

TEST(TextureTest, GratingPhaseInsensitiveDescriptor) {
    NetConfig c;
    c.num_layers = 3;
    c.s0_list = {1.0, 4.0};
    TextureParams p0, p1;
    p0.wavelength = p1.wavelength = 8.0;
    p1.phase = std::numbers::pi;
    const auto a = assemble_descriptor(make_texture(TextureKind::grating, p0, 1, 128), c, ChannelMode::grey).values;
    const auto b = assemble_descriptor(make_texture(TextureKind::grating, p1, 1, 128), c, ChannelMode::grey).values;
    EXPECT_GT(cosine_similarity(a, b), 0.99);
}

TEST(TextureTest, CheckerVersusGratingSeparableByNearestNeighbour) {
    NetConfig c;
    c.M = 4;
    c.num_layers = 2;
    c.K = 2;
    c.s0_list = {2.0};
    std::vector<std::vector<double>> train_x, test_x;
    std::vector<std::string> train_y, test_y;
    for (int i = 0; i < 40; ++i) {
        for (TextureKind k : {TextureKind::checker, TextureKind::grating}) {
            TextureParams p;
            detail::Uniform rnd(1000 + i);
            p.wavelength = rnd(7.0, 10.0);
            p.orientation = rnd(0.0, std::numbers::pi);
            p.phase = rnd(0.0, 6.0);
            auto d = assemble_descriptor(make_texture(k, p, 50 + i, 64), c, ChannelMode::grey).values;
            (i < 20 ? train_x : test_x).push_back(std::move(d));
            (i < 20 ? train_y : test_y).push_back(to_string(k));
        }
    }
    const TrainedModel m = train(train_x, train_y, ClassifierKind::nn);
    for (std::size_t i = 0; i < test_x.size(); ++i) EXPECT_EQ(predict(m, test_x[i]).label, test_y[i]);
}

TEST(NoiseTest, UniformAndDeterministic) {
    const Image n = make_noise(100, 100, 3);
    EXPECT_EQ(n, make_noise(100, 100, 3));
    double mean = 0.0;
    for (double v : n.data()) mean += v;
    EXPECT_NEAR(mean / 1e4, 0.5, 0.01);
}

TEST(BenchmarkTest, IndexAndRendering) {
    BenchmarkSpec spec;
    spec.samples_per_size = 2;
    spec.image_size = 64;
    const DatasetIndex idx = benchmark_index(spec, {2, 10});
    EXPECT_EQ(idx.entries.size(), 5u * 2 * 2);
    EXPECT_EQ(idx.classes().size(), 5u);
    const Image a = benchmark_image(spec, idx.entries[0]);
    EXPECT_EQ(a.width(), 64);
    EXPECT_EQ(a, benchmark_image(spec, idx.entries[0]));
    EXPECT_NE(a, benchmark_image(spec, idx.entries[1]));
    EXPECT_DOUBLE_EQ(benchmark_magnification(6), 2.0);
    EXPECT_THROW(benchmark_index(spec, {11}), DomainError);
}
