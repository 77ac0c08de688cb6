#pragma once

// Desk-scale stand-in for a multi-scale texture dataset: five procedural
// texture classes rendered at nine size labels "2".."10", where label n shows
// the texture magnified by 2^((10 - n)/4) (adjacent labels differ by 2^(1/4)).
// Every (class, size, sample) triple has its own seed, so training and test
// images never share pixels.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <cstdint>
#include <string>
#include <vector>

#include "classify.hpp"
#include "config.hpp"
#include "image_io.hpp"
#include "synthetic.hpp"

namespace qqnet {

struct BenchmarkSpec {
    int samples_per_size = 20;
    int image_size = 256;
    double jitter = 0.05;  // relative wavelength jitter per sample
    std::uint64_t seed = 7;
};

/// Reduced network used for the synthetic benchmark: 3 layers at sigma ratio
/// sqrt(2), two initial scales. It keeps the coarsest aggregated grid inside
/// a 256 px image.
inline NetConfig benchmark_config() {
    NetConfig c;
    c.M = 8;
    c.num_layers = 3;
    c.K = 3;
    c.r = std::sqrt(2.0);
    c.s0_list = {1.0, 4.0};
    c.eps = 1e-6;
    return c;
}

struct BenchmarkClass {
    TextureKind kind;
    double wavelength;   // at size label "10"
    double orientation;  // radians
};

inline const std::vector<BenchmarkClass>& benchmark_classes() {
    static const std::vector<BenchmarkClass> classes{
        {TextureKind::grating, 12.0, 0.3},
        {TextureKind::checker, 14.0, 0.2},
        {TextureKind::blob_noise, 12.0, 0.0},
        {TextureKind::stripes_irregular, 14.0, 1.2},
        {TextureKind::spots, 13.0, 0.0},
    };
    return classes;
}

inline double benchmark_magnification(int size_label) { return std::pow(2.0, (10 - size_label) / 4.0); }

/// Index of the benchmark restricted to the given size labels.
inline DatasetIndex benchmark_index(const BenchmarkSpec& spec, const std::vector<int>& sizes) {
    DatasetIndex idx;
    idx.layout = "synthetic";
    for (const auto& cls : benchmark_classes())
        for (int size : sizes) {
            detail::require(size >= 2 && size <= 10, "benchmark_index: size labels range over 2..10");
            for (int i = 0; i < spec.samples_per_size; ++i) {
                DatasetEntry e;
                e.label = to_string(cls.kind);
                e.size_label = std::to_string(size);
                e.sample_id = std::to_string(i);
                e.path = "synthetic://" + e.label + "/" + *e.size_label + "/" + e.sample_id;
                idx.entries.push_back(std::move(e));
            }
        }
    return idx;
}

/// Renders the image for a benchmark entry.
inline Image benchmark_image(const BenchmarkSpec& spec, const DatasetEntry& e) {
    detail::require(e.size_label.has_value(), "benchmark_image: entry has no size label");
    const auto& classes = benchmark_classes();
    const auto it = std::find_if(classes.begin(), classes.end(), [&](const BenchmarkClass& c) { return to_string(c.kind) == e.label; });
    detail::require(it != classes.end(), "benchmark_image: unknown class '" + e.label + "'");
    const int size = std::stoi(*e.size_label);
    const int sample = std::stoi(e.sample_id);
    const std::uint64_t seed = spec.seed * 1000003ULL + static_cast<std::uint64_t>(it - classes.begin()) * 10007ULL +
                               static_cast<std::uint64_t>(size) * 101ULL + static_cast<std::uint64_t>(sample);
    detail::Uniform rnd(seed ^ 0x9E3779B97F4A7C15ULL);
    // render at the largest magnification, then downsample with anti-aliasing
    const double mag = benchmark_magnification(size);
    const double master_mag = benchmark_magnification(2);
    const int master_size = static_cast<int>(std::lround(spec.image_size * master_mag / mag));
    TextureParams p;
    p.wavelength = it->wavelength * master_mag * (1.0 + rnd(-spec.jitter, spec.jitter));
    p.orientation = it->orientation + rnd(-0.1, 0.1);
    p.phase = rnd(0.0, 2.0 * std::numbers::pi);
    const Image master = make_texture(it->kind, p, seed, master_size);
    if (master_size == spec.image_size) return master;
    Image out = resample(master, mag / master_mag);
    if (out.width() != spec.image_size || out.height() != spec.image_size) {
        Image crop(spec.image_size, spec.image_size, 1);
        for (int y = 0; y < spec.image_size; ++y)
            for (int x = 0; x < spec.image_size; ++x)
                crop(x, y) = out(std::min(x, out.width() - 1), std::min(y, out.height() - 1));
        out = std::move(crop);
    }
    return out;
}

/// Descriptor source for benchmark entries (grey, memoized).
inline CachedDescriptorSource benchmark_source(const BenchmarkSpec& spec, const NetConfig& cfg) {
    CachedDescriptorSource src(cfg, ChannelMode::grey);
    src.set_loader([spec](const DatasetEntry& e) { return benchmark_image(spec, e); });
    return src;
}

}  // namespace qqnet
