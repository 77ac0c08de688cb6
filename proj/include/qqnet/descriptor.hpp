#pragma once

// Mean-reduced texture descriptors.
//
// For every layer k, every input map F_{k-1} (F_0 = L, pooled from layer K
// on) and every angle phi, five interior means are recorded:
//   mean dphi F, mean |dphi F|, mean dphiphi F, mean |dphiphi F|, mean Q_phi F
// with gamma=1 normalized derivatives at the layer scale s_k.

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "config.hpp"
#include "error.hpp"
#include "image.hpp"
#include "image_io.hpp"
#include "network.hpp"

namespace qqnet {

enum class ChannelMode { grey, luv };

inline std::string to_string(ChannelMode m) { return m == ChannelMode::grey ? "grey" : "luv"; }

inline ChannelMode parse_channel_mode(const std::string& s) {
    if (s == "grey" || s == "gray") return ChannelMode::grey;
    if (s == "luv") return ChannelMode::luv;
    throw DomainError("unknown channel mode '" + s + "' (expected grey or luv)");
}

enum class Stat : int { mean_d1 = 0, mean_abs_d1, mean_d2, mean_abs_d2, mean_q };
inline constexpr int kStatCount = 5;
inline constexpr std::array<const char*, kStatCount> kStatNames{"d1", "abs_d1", "d2", "abs_d2", "q"};

struct DescriptorIndex {
    int channel = 0;
    int s0_index = 0;
    int layer = 0;
    OrientationPath path;
    int stat = 0;

    friend bool operator==(const DescriptorIndex&, const DescriptorIndex&) = default;
};

struct Descriptor {
    std::vector<double> values;
    std::vector<DescriptorIndex> schema;
    ChannelMode mode = ChannelMode::grey;
    std::string config_hash;

    std::size_t size() const noexcept { return values.size(); }
};

/// Index schema implied by the configuration alone.
inline std::vector<DescriptorIndex> descriptor_schema(const NetConfig& cfg, ChannelMode mode) {
    cfg.validate();
    std::vector<DescriptorIndex> out;
    const int channels = mode == ChannelMode::luv ? 3 : 1;
    for (int c = 0; c < channels; ++c)
        for (int si = 0; si < static_cast<int>(cfg.s0_list.size()); ++si) {
            // paths of the maps produced at each layer
            std::vector<OrientationPath> prev{OrientationPath{}};
            for (int k = 1; k <= cfg.num_layers; ++k) {
                std::vector<OrientationPath> inputs;
                if (k >= 2 && k >= cfg.K) {
                    for (const auto& p : prev) {
                        OrientationPath q = p;
                        q.angles.back() = OrientationPath::kPooled;
                        if (inputs.empty() || !(inputs.back() == q)) inputs.push_back(q);
                    }
                } else {
                    inputs = prev;
                }
                std::vector<OrientationPath> next;
                for (const auto& in : inputs)
                    for (int m = 0; m < cfg.M; ++m) {
                        OrientationPath p = in;
                        p.angles.push_back(m);
                        for (int st = 0; st < kStatCount; ++st) out.push_back({c, si, k, p, st});
                        next.push_back(std::move(p));
                    }
                prev = std::move(next);
            }
        }
    return out;
}

/// Expected descriptor length: sum over layers of map_count x 5, times the
/// number of initial scales and channels.
inline std::size_t descriptor_length(const NetConfig& cfg, ChannelMode mode) {
    std::size_t per_scale = 0;
    for (int k = 1; k <= cfg.num_layers; ++k) per_scale += static_cast<std::size_t>(expected_map_count(cfg, k)) * kStatCount;
    return per_scale * cfg.s0_list.size() * (mode == ChannelMode::luv ? 3u : 1u);
}

/// Single-scale slice of the descriptor for one single-channel image.
/// Means are taken over the interior, excluding a band of border_band(cfg, s0).
inline std::vector<double> mean_reduce(const Image& channel_img, const NetConfig& cfg, double s0) {
    cfg.validate();
    detail::require(channel_img.channels() == 1, "mean_reduce: expects a single-channel image");
    const int band = border_band(cfg, s0);
    const Region roi = Region::interior(channel_img, band);
    detail::require(!roi.empty(), "mean_reduce: image smaller than twice the border band (" + std::to_string(band) + " px)");
    const double inv_n = 1.0 / (static_cast<double>(roi.width()) * roi.height());

    std::vector<double> values;
    values.reserve(descriptor_length(NetConfig{cfg}, ChannelMode::grey) / cfg.s0_list.size());
    NetworkCascade net(channel_img, cfg, s0);
    const int w = channel_img.width();
    auto visit = [&](const FeatureMap&, const Jet2& jet, int m, const Image& q) {
        const double c = std::cos(cfg.angle(m)), sn = std::sin(cfg.angle(m));
        double d1 = 0, a1 = 0, d2 = 0, a2 = 0, qs = 0;
        for (int y = roi.y0; y < roi.y1; ++y) {
            const std::size_t base = static_cast<std::size_t>(y) * w;
            for (int x = roi.x0; x < roi.x1; ++x) {
                const std::size_t i = base + x;
                const auto d = directional_at(jet, i, c, sn);
                d1 += d.Lphi;
                a1 += std::abs(d.Lphi);
                d2 += d.Lphiphi;
                a2 += std::abs(d.Lphiphi);
                qs += q.data()[i];
            }
        }
        for (double v : {d1, a1, d2, a2, qs}) values.push_back(v * inv_n);
    };
    while (!net.done()) net.step(visit);
    return values;
}

namespace detail {

inline std::vector<Image> descriptor_channels(const Image& img, ChannelMode mode) {
    std::vector<Image> chans;
    if (mode == ChannelMode::grey) {
        chans.push_back(to_grey(img));
    } else {
        const Image luv = to_luv(img);
        for (int c = 0; c < 3; ++c) chans.push_back(luv.channel(c));
    }
    return chans;
}

}  // namespace detail

/// Concatenates mean_reduce slices over channels and the configured s0 list.
inline Descriptor assemble_descriptor(const Image& img, const NetConfig& cfg, ChannelMode mode) {
    cfg.validate();
    Descriptor d;
    d.mode = mode;
    d.config_hash = config_hash(cfg);
    for (const Image& ch : detail::descriptor_channels(img, mode))
        for (double s0 : cfg.s0_list) {
            auto slice = mean_reduce(ch, cfg, s0);
            d.values.insert(d.values.end(), slice.begin(), slice.end());
        }
    d.schema = descriptor_schema(cfg, mode);
    if (d.schema.size() != d.values.size()) throw std::logic_error("descriptor schema/value length mismatch");
    return d;
}

/// The five initial-scale grids used for scale aggregation, in sigma units:
/// {1,2,4,8} times 1, sqrt2, 2, 2sqrt2 and 4.
inline std::vector<std::vector<double>> default_aggregation_grids() {
    std::vector<std::vector<double>> grids;
    for (int j = 0; j <= 4; ++j) {
        const double f = std::pow(2.0, 0.5 * j);
        grids.push_back(sigmas_to_variances({f, 2 * f, 4 * f, 8 * f}));
    }
    return grids;
}

/// One descriptor per s0 grid (variances); every grid must match cfg.s0_list in length.
inline std::vector<Descriptor> aggregate_scales(const Image& img, const NetConfig& cfg,
                                                const std::vector<std::vector<double>>& s0_grids, ChannelMode mode) {
    detail::require(!s0_grids.empty(), "aggregate_scales: no grids given");
    std::vector<Descriptor> out;
    for (const auto& grid : s0_grids) {
        detail::require(grid.size() == cfg.s0_list.size(), "aggregate_scales: grid length differs from s0_list");
        NetConfig c = cfg;
        c.s0_list = grid;
        out.push_back(assemble_descriptor(img, c, mode));
    }
    return out;
}

/// Index permutation induced by rotating the input by `shift` orientation
/// steps: entry i of the original descriptor corresponds to entry perm[i] of
/// the rotated one, multiplied by sign[i]. Signed first-derivative means flip
/// sign when the shifted trailing angle wraps past pi.
struct DescriptorPermutation {
    std::vector<std::size_t> index;
    std::vector<double> sign;
};

inline DescriptorPermutation rotation_permutation(const std::vector<DescriptorIndex>& schema, int shift, int M) {
    DescriptorPermutation perm;
    perm.index.resize(schema.size());
    perm.sign.assign(schema.size(), 1.0);
    // schema entries are unique, so a linear lookup table keyed by position works
    std::vector<std::pair<std::string, std::size_t>> keys;
    keys.reserve(schema.size());
    auto key_of = [](const DescriptorIndex& d) {
        return std::to_string(d.channel) + "/" + std::to_string(d.s0_index) + "/" + std::to_string(d.layer) + "/" +
               d.path.to_string() + "/" + std::to_string(d.stat);
    };
    for (std::size_t i = 0; i < schema.size(); ++i) keys.emplace_back(key_of(schema[i]), i);
    std::sort(keys.begin(), keys.end());
    for (std::size_t i = 0; i < schema.size(); ++i) {
        DescriptorIndex t = schema[i];
        const int last = t.path.angles.back();
        t.path = shift_path(t.path, shift, M);
        const auto it = std::lower_bound(keys.begin(), keys.end(), std::make_pair(key_of(t), std::size_t{0}));
        if (it == keys.end() || it->first != key_of(t)) throw DomainError("rotation_permutation: schema not closed under shift");
        perm.index[i] = it->second;
        // every pass of the angle through pi reverses the first-derivative direction
        const int total = last + ((shift % (2 * M)) + 2 * M) % (2 * M);
        const bool flipped = (total / M) % 2 == 1;
        if (flipped && t.stat == static_cast<int>(Stat::mean_d1)) perm.sign[i] = -1.0;
    }
    return perm;
}

// -- QQD1 files: "QQD1", u32 LE header length, JSON header, f32 LE values --

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}
inline std::uint32_t get_u32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
inline void put_f32(std::string& out, float f) { put_u32(out, std::bit_cast<std::uint32_t>(f)); }

inline std::vector<unsigned char> slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_bytes(const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed: " + path);
}

}  // namespace detail

inline json schema_to_json(const std::vector<DescriptorIndex>& schema) {
    json arr = json::array();
    for (const auto& d : schema) arr.push_back(json::array({d.channel, d.s0_index, d.layer, d.path.angles, d.stat}));
    return arr;
}

inline std::vector<DescriptorIndex> schema_from_json(const json& arr) {
    std::vector<DescriptorIndex> out;
    out.reserve(arr.size());
    for (const auto& e : arr)
        out.push_back({e.at(0).get<int>(), e.at(1).get<int>(), e.at(2).get<int>(),
                       OrientationPath{e.at(3).get<std::vector<int>>()}, e.at(4).get<int>()});
    return out;
}

inline std::string encode_descriptor(const Descriptor& d, const NetConfig& cfg) {
    json header{{"format", "QQD1"},
                {"channel_mode", to_string(d.mode)},
                {"config_hash", d.config_hash},
                {"config", cfg},
                {"length", d.values.size()},
                {"stats", kStatNames},
                {"schema", schema_to_json(d.schema)}};
    const std::string h = header.dump();
    std::string out = "QQD1";
    detail::put_u32(out, static_cast<std::uint32_t>(h.size()));
    out += h;
    for (double v : d.values) detail::put_f32(out, static_cast<float>(v));
    return out;
}

inline void write_descriptor(const std::string& path, const Descriptor& d, const NetConfig& cfg) {
    detail::write_bytes(path, encode_descriptor(d, cfg));
}

inline Descriptor decode_descriptor(const std::vector<unsigned char>& b, const std::string& what = "descriptor") {
    if (b.size() < 8 || std::memcmp(b.data(), "QQD1", 4) != 0) throw FormatError(what + ": missing QQD1 magic");
    const std::uint32_t hlen = detail::get_u32(b.data() + 4);
    if (b.size() < 8ull + hlen) throw FormatError(what + ": truncated header");
    json header;
    try {
        header = json::parse(b.begin() + 8, b.begin() + 8 + hlen);
    } catch (const json::exception& e) {
        throw FormatError(what + ": malformed header: " + e.what());
    }
    Descriptor d;
    try {
        d.mode = parse_channel_mode(header.at("channel_mode").get<std::string>());
        d.config_hash = header.at("config_hash").get<std::string>();
        d.schema = schema_from_json(header.at("schema"));
        const auto n = header.at("length").get<std::size_t>();
        if (b.size() != 8ull + hlen + 4ull * n) throw FormatError(what + ": payload length mismatch");
        d.values.resize(n);
        const unsigned char* p = b.data() + 8 + hlen;
        for (std::size_t i = 0; i < n; ++i) d.values[i] = std::bit_cast<float>(detail::get_u32(p + 4 * i));
    } catch (const json::exception& e) {
        throw FormatError(what + ": bad header field: " + e.what());
    }
    if (d.schema.size() != d.values.size()) throw FormatError(what + ": schema/value length mismatch");
    return d;
}

inline Descriptor read_descriptor(const std::string& path) { return decode_descriptor(detail::slurp(path), path); }

}  // namespace qqnet
