#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <map>

#include "qqnet/descriptor.hpp"
#include "qqnet/synthetic.hpp"
#include "test_util.hpp"

using namespace qqnet;

namespace {

NetConfig reduced(int M = 8, int layers = 3, int K = 3) {
    NetConfig c;
    c.M = M;
    c.num_layers = layers;
    c.K = K;
    c.s0_list = {1.0, 4.0};
    return c;
}

}  // namespace

TEST(SchemaTest, DefaultLengths) {
    const NetConfig c;
    EXPECT_EQ(descriptor_length(c, ChannelMode::grey), 4000u);
    EXPECT_EQ(descriptor_length(c, ChannelMode::luv), 12000u);
    EXPECT_EQ(descriptor_schema(c, ChannelMode::grey).size(), 4000u);
    EXPECT_EQ(descriptor_schema(c, ChannelMode::luv).size(), 12000u);
}

TEST(SchemaTest, PerLayerSliceCountsAndOrder) {
    const auto schema = descriptor_schema(NetConfig{}, ChannelMode::grey);
    std::map<std::pair<int, int>, int> per;
    for (const auto& d : schema) ++per[{d.s0_index, d.layer}];
    for (int si = 0; si < 4; ++si) {
        EXPECT_EQ((per[{si, 1}]), 40);
        for (int k = 2; k <= 4; ++k) EXPECT_EQ((per[{si, k}]), 320);
    }
    // channel, s0 index, layer are non-decreasing; stats cycle fastest
    for (std::size_t i = 1; i < schema.size(); ++i) {
        const auto& a = schema[i - 1];
        const auto& b = schema[i];
        EXPECT_LE(std::tie(a.channel, a.s0_index, a.layer), std::tie(b.channel, b.s0_index, b.layer));
        EXPECT_EQ(b.stat, static_cast<int>(i % kStatCount));
    }
    EXPECT_EQ(schema[40].path.to_string(), "0-0");
    EXPECT_EQ(schema[40 + 320].path.to_string(), "0-p-0");
}

TEST(MeanReduceTest, SliceLengthConstantAndTriangleInequality) {
    const NetConfig c;
    const Image f = make_smooth_texture(64, 6.0, 4);
    const auto v = mean_reduce(f, c, 1.0);
    ASSERT_EQ(v.size(), 1000u);
    for (std::size_t i = 0; i < v.size(); i += kStatCount) {
        EXPECT_GE(v[i + 1], std::abs(v[i]) - 1e-15);
        EXPECT_GE(v[i + 3], std::abs(v[i + 2]) - 1e-15);
        EXPECT_GE(v[i + 4], 0.0);
    }
    for (double x : mean_reduce(Image(64, 64, 1, 0.5), c, 1.0)) EXPECT_NEAR(x, 0.0, 1e-12);
    // 48 px image with a 24 px band leaves nothing
    EXPECT_THROW(mean_reduce(Image(48, 48, 1), c, 1.0), DomainError);
}

TEST(AssembleTest, DeterministicAndLengths) {
    const NetConfig c = reduced();
    const Image f = make_texture(TextureKind::blob_noise, {}, 3, 96);
    const Descriptor a = assemble_descriptor(f, c, ChannelMode::grey);
    const Descriptor b = assemble_descriptor(f, c, ChannelMode::grey);
    EXPECT_EQ(a.values, b.values);
    EXPECT_EQ(a.size(), descriptor_length(c, ChannelMode::grey));
    EXPECT_EQ(a.config_hash, config_hash(c));

    Image rgb(96, 96, 3);
    for (int y = 0; y < 96; ++y)
        for (int x = 0; x < 96; ++x) rgb(x, y, 0) = f(x, y), rgb(x, y, 1) = 0.5, rgb(x, y, 2) = 1.0 - f(x, y);
    const Descriptor luv = assemble_descriptor(rgb, c, ChannelMode::luv);
    EXPECT_EQ(luv.size(), 3 * a.size());
    EXPECT_EQ(luv.schema.back().channel, 2);
}

TEST(AggregateTest, GridsAndErrors) {
    const NetConfig c = reduced();
    const Image f = make_texture(TextureKind::spots, {}, 5, 96);
    const auto one = aggregate_scales(f, c, {c.s0_list}, ChannelMode::grey);
    ASSERT_EQ(one.size(), 1u);
    EXPECT_EQ(one[0].values, assemble_descriptor(f, c, ChannelMode::grey).values);
    EXPECT_THROW(aggregate_scales(f, c, {{1.0}}, ChannelMode::grey), DomainError);
    EXPECT_THROW(aggregate_scales(f, c, {}, ChannelMode::grey), DomainError);

    const auto grids = default_aggregation_grids();
    ASSERT_EQ(grids.size(), 5u);
    EXPECT_EQ(grids[0], NetConfig{}.s0_list);
    EXPECT_NEAR(grids[4][3], 32.0 * 32.0, 1e-9);

    std::vector<std::vector<double>> five;
    for (int j = 0; j < 5; ++j) five.push_back({std::pow(2.0, 0.5 * j) * 1.0});
    NetConfig c1 = reduced(4, 2, 2);
    c1.s0_list = {1.0};
    const auto d5 = aggregate_scales(f, c1, five, ChannelMode::grey);
    ASSERT_EQ(d5.size(), 5u);
    for (const auto& d : d5) EXPECT_EQ(d.size(), d5[0].size());
}

TEST(AggregateTest, DownscaledImageMatchesCoarserGrid) {
    // f at sigma grid sqrt2*G versus f downscaled by 1/sqrt2 at grid G
    NetConfig c = reduced();
    c.s0_list = {1.0, 4.0};
    NetConfig coarse = c;
    coarse.s0_list = {2.0, 8.0};
    for (TextureKind kind : {TextureKind::blob_noise, TextureKind::grating}) {
        TextureParams tp;
        tp.wavelength = 16.0;
        tp.orientation = 0.4;
        const Image f = make_texture(kind, tp, 12, 256);
        const Image small = resample(f, 1.0 / std::sqrt(2.0));
        const auto a = assemble_descriptor(f, coarse, ChannelMode::grey).values;
        const auto b = assemble_descriptor(small, c, ChannelMode::grey).values;
        EXPECT_GT(cosine_similarity(a, b), 0.98) << to_string(kind);
    }
}

TEST(RotationPermutationTest, QuarterTurnPermutesDescriptor) {
    const NetConfig c = reduced(4, 3, 2);
    const Image f = make_texture(TextureKind::stripes_irregular, {}, 2, 80);
    const Descriptor a = assemble_descriptor(f, c, ChannelMode::grey);
    for (int q : {1, 2, 3}) {
        const Descriptor b = assemble_descriptor(rotate90(f, q), c, ChannelMode::grey);
        const auto perm = rotation_permutation(a.schema, q * c.M / 2, c.M);
        for (std::size_t i = 0; i < a.size(); ++i)
            EXPECT_NEAR(b.values[perm.index[i]], perm.sign[i] * a.values[i], 1e-12) << "q=" << q << " i=" << i;
    }
}

TEST(QqdFileTest, RoundTripAndCorruption) {
    TempDir dir;
    const NetConfig c = reduced(4, 2, 2);
    const Descriptor d = assemble_descriptor(make_noise(64, 64, 1), c, ChannelMode::grey);
    const auto p = (dir.path() / "d.qqd").string();
    write_descriptor(p, d, c);
    const Descriptor back = read_descriptor(p);
    EXPECT_EQ(back.size(), d.size());
    EXPECT_EQ(back.schema, d.schema);
    EXPECT_EQ(back.config_hash, config_hash(c));
    for (std::size_t i = 0; i < d.size(); ++i) EXPECT_EQ(back.values[i], static_cast<float>(d.values[i]));

    auto bytes = detail::slurp(p);
    EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "QQD1");
    const std::uint32_t hlen = detail::get_u32(bytes.data() + 4);
    const json header = json::parse(bytes.begin() + 8, bytes.begin() + 8 + hlen);
    EXPECT_EQ(header.at("length").get<std::size_t>(), d.size());
    EXPECT_EQ(header.at("config").get<NetConfig>().M, 4);
    EXPECT_EQ(bytes.size(), 8 + hlen + 4 * d.size());

    auto truncated = bytes;
    truncated.resize(truncated.size() - 3);
    EXPECT_THROW(decode_descriptor(truncated), FormatError);
    auto bad_magic = bytes;
    bad_magic[0] = 'X';
    EXPECT_THROW(decode_descriptor(bad_magic), FormatError);
    EXPECT_THROW(read_descriptor((dir.path() / "none.qqd").string()), IoError);
}

TEST(ChannelModeTest, Parse) {
    EXPECT_EQ(parse_channel_mode("grey"), ChannelMode::grey);
    EXPECT_EQ(parse_channel_mode("luv"), ChannelMode::luv);
    EXPECT_THROW(parse_channel_mode("rgb"), DomainError);
}
