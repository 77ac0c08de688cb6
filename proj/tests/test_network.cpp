#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <numbers>

#include "qqnet/config.hpp"
#include "qqnet/image_io.hpp"
#include "qqnet/network.hpp"
#include "qqnet/synthetic.hpp"
#include "test_util.hpp"

using namespace qqnet;

namespace {

NetConfig small_config(int M, int layers, int K, double r = 2.0) {
    NetConfig c;
    c.M = M;
    c.num_layers = layers;
    c.K = K;
    c.r = r;
    return c;
}

Image ramp_image(int n) {
    Image img(n, n, 1);
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) img(x, y) = x;
    return img;
}

}  // namespace

TEST(ConfigTest, DefaultsAndValidation) {
    const NetConfig c;
    EXPECT_EQ(c.M, 8);
    EXPECT_EQ(c.num_layers, 4);
    EXPECT_EQ(c.K, 3);
    EXPECT_DOUBLE_EQ(c.r, 2.0);
    EXPECT_DOUBLE_EQ(c.Gamma, 0.0);
    EXPECT_DOUBLE_EQ(c.C, 8.0 / 11.0);
    EXPECT_EQ(c.s0_list, (std::vector<double>{1, 4, 16, 64}));
    EXPECT_NO_THROW(c.validate());
    for (auto bad : {small_config(1, 4, 3), small_config(8, 4, 5), small_config(8, 4, 0), small_config(8, 2, 1, 1.0)})
        EXPECT_THROW(bad.validate(), DomainError);
    NetConfig neg;
    neg.s0_list = {1.0, -4.0};
    EXPECT_THROW(neg.validate(), DomainError);
}

TEST(ConfigTest, JsonRoundTripAndUnknownKeys) {
    NetConfig c = small_config(4, 3, 2, 1.5);
    c.s0_list = {2.0, 8.0};
    const json j = c;
    const NetConfig back = j.get<NetConfig>();
    EXPECT_EQ(json(back), j);
    EXPECT_EQ(config_hash(back), config_hash(c));
    EXPECT_NE(config_hash(c), config_hash(NetConfig{}));
    EXPECT_EQ(config_hash(NetConfig{}).size(), 16u);
    EXPECT_THROW(json({{"Mm", 3}}).get<NetConfig>(), DomainError);
    const NetConfig sig = json({{"sigma0_list", {1.0, 3.0}}}).get<NetConfig>();
    EXPECT_EQ(sig.s0_list, (std::vector<double>{1.0, 9.0}));
}

TEST(ConfigTest, LoadConfigErrors) {
    TempDir dir;
    EXPECT_THROW(load_config((dir.path() / "missing.json").string()), IoError);
    const auto p = dir.path() / "bad.json";
    std::ofstream(p) << "{ not json";
    EXPECT_THROW(load_config(p.string()), FormatError);
    std::ofstream(p, std::ios::trunc) << R"({"M": 4, "K": 2})";
    EXPECT_EQ(load_config(p.string()).M, 4);
}

TEST(LayerScaleTest, Schedule) {
    const NetConfig c;
    EXPECT_DOUBLE_EQ(layer_scale(c, 1.0, 3), 16.0);
    EXPECT_DOUBLE_EQ(layer_scale(c, 5.0, 1), 5.0);
    for (int k = 1; k <= 4; ++k) EXPECT_NEAR(std::sqrt(layer_scale(c, 4.0, k)), 2.0 * std::pow(2.0, k - 1), 1e-12);
    EXPECT_THROW(layer_scale(c, 1.0, 5), DomainError);
}

TEST(NetworkTest, DefaultMapCounts) {
    const NetConfig c;
    const auto layers = build_network(make_noise(64, 64, 1), c, 1.0);
    ASSERT_EQ(layers.size(), 4u);
    const std::size_t expected[] = {8, 64, 64, 64};
    for (int k = 0; k < 4; ++k) {
        EXPECT_EQ(layers[k].maps.size(), expected[k]);
        EXPECT_EQ(static_cast<int>(layers[k].maps.size()), expected_map_count(c, k + 1));
        EXPECT_DOUBLE_EQ(layers[k].scale_s, layer_scale(c, 1.0, k + 1));
        for (const auto& m : layers[k].maps) {
            EXPECT_EQ(m.field.width(), 64);
            EXPECT_EQ(m.path.angles.size(), static_cast<std::size_t>(k + 1));
        }
        EXPECT_TRUE(std::is_sorted(layers[k].maps.begin(), layers[k].maps.end(),
                                   [](const FeatureMap& a, const FeatureMap& b) { return a.path < b.path; }));
    }
    EXPECT_FALSE(layers[1].pooled_input);
    EXPECT_TRUE(layers[2].pooled_input);
    EXPECT_EQ(layers[3].maps.front().path.to_string(), "0-p-p-0");
}

TEST(NetworkTest, ConstantImageGivesZeroMaps) {
    const auto layers = build_network(Image(48, 48, 1, 0.3), small_config(4, 3, 2), 1.0);
    for (const auto& l : layers)
        for (const auto& m : l.maps)
            for (double v : m.field.data()) EXPECT_NEAR(v, 0.0, 1e-12);
}

TEST(NetworkTest, TwoLayerCascadeOnRamp) {
    const double s0 = 1.0;
    const auto layers = build_network(ramp_image(64), small_config(2, 2, 2), s0);
    const Image& q0 = layers[0].maps[0].field;  // phi = 0
    for (int y = 12; y < 52; ++y)
        for (int x = 12; x < 52; ++x) EXPECT_NEAR(q0(x, y), std::sqrt(s0), 1e-9);
    // layer 2 differentiates the (pooled, constant) interior of layer 1
    ASSERT_EQ(layers[1].maps.size(), 2u);
    for (const auto& m : layers[1].maps)
        for (int y = 28; y < 36; ++y)
            for (int x = 28; x < 36; ++x) EXPECT_NEAR(m.field(x, y), 0.0, 1e-9);
}

TEST(NetworkTest, RejectsBadInputs) {
    const NetConfig c;
    EXPECT_THROW(build_network(Image(64, 64, 3), c, 1.0), DomainError);
    EXPECT_THROW(build_network(Image(8, 8, 1), c, 1.0), DomainError);
    EXPECT_THROW(build_network(Image(64, 64, 1), c, 0.0), DomainError);
    // deepest sigma 8 * 8 = 64 exceeds half of a 100 px image
    EXPECT_THROW(build_network(Image(100, 100, 1), c, 64.0), DomainError);
}

TEST(NetworkTest, CascadeMatchesBuildNetworkAndVisitsEveryMap) {
    const NetConfig c = small_config(4, 3, 2);
    const Image f = make_noise(40, 40, 2);
    const auto all = build_network(f, c, 1.0);
    NetworkCascade net(f, c, 1.0);
    int k = 0;
    while (!net.done()) {
        int visits = 0;
        const LayerOutput& l = net.step([&](const FeatureMap&, const Jet2& j, int, const Image& q) {
            EXPECT_EQ(j.scale_s, layer_scale(c, 1.0, k + 1));
            EXPECT_EQ(q.width(), 40);
            ++visits;
        });
        EXPECT_EQ(visits, static_cast<int>(l.maps.size()));
        ASSERT_EQ(l.maps.size(), all[k].maps.size());
        for (std::size_t i = 0; i < l.maps.size(); ++i) EXPECT_EQ(l.maps[i].field, all[k].maps[i].field);
        ++k;
    }
    EXPECT_THROW(net.step(), DomainError);
}

TEST(PoolingTest, SumsTrailingAngle) {
    LayerOutput l;
    l.layer_index = 1;
    for (int m = 0; m < 8; ++m) l.maps.push_back({OrientationPath{{m}}, Image(4, 4, 1, 0.25)});
    const LayerOutput p = pool_orientations(l);
    ASSERT_EQ(p.maps.size(), 1u);
    EXPECT_EQ(p.maps[0].path.to_string(), "p");
    for (double v : p.maps[0].field.data()) EXPECT_DOUBLE_EQ(v, 2.0);
    EXPECT_THROW(pool_orientations(p), DomainError);

    const auto layers = build_network(make_noise(40, 40, 3), NetConfig{}, 1.0);
    EXPECT_EQ(pool_orientations(layers[1]).maps.size(), 8u);
}

TEST(PoolingTest, CommutesWithGridExactRotation) {
    // M = 2: a quarter turn shifts the angle index by one; after pooling the
    // trailing index is gone, so pooled maps simply rotate with the image
    const NetConfig c = small_config(2, 1, 1);
    const Image f = make_noise(36, 36, 8);
    const LayerOutput a = pool_orientations(build_network(f, c, 2.0)[0]);
    const LayerOutput b = pool_orientations(build_network(rotate90(f, 1), c, 2.0)[0]);
    EXPECT_LT(interior_rms_diff(rotate90(a.maps[0].field, 1), b.maps[0].field, 4), 1e-6);
}

TEST(PathTest, ShiftAndFormat) {
    const OrientationPath p{{1, OrientationPath::kPooled, 7}};
    EXPECT_EQ(p.to_string(), "1-p-7");
    EXPECT_EQ(shift_path(p, 4, 8).to_string(), "5-p-3");
    EXPECT_EQ(shift_path(p, -2, 8).to_string(), "7-p-5");
}
