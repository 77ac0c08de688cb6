#pragma once

// The hierarchical cascade of oriented quasi-quadrature measures.
//
// Layer 1 expands the input over M angles phi_m = m*pi/M. Layer k >= 2 takes
// every map of layer k-1, computes its gamma=1 jet at s_k = s0 r^(2(k-1)) and
// expands it over M new angles. From layer K on, the previous layer is first
// summed over its trailing angle, which caps the map count at M^(K-1).

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "config.hpp"
#include "error.hpp"
#include "image.hpp"
#include "quadrature.hpp"
#include "scale_space.hpp"

namespace qqnet {

/// Orientation indices per layer; kPooled marks an angle that was summed out.
struct OrientationPath {
    static constexpr int kPooled = -1;
    std::vector<int> angles;

    std::string to_string() const {
        std::string s;
        for (std::size_t i = 0; i < angles.size(); ++i) {
            if (i) s += '-';
            s += angles[i] == kPooled ? std::string("p") : std::to_string(angles[i]);
        }
        return s;
    }

    friend bool operator==(const OrientationPath&, const OrientationPath&) = default;
    friend auto operator<=>(const OrientationPath& a, const OrientationPath& b) { return a.angles <=> b.angles; }
};

/// Path after rotating the input by `shift` orientation steps.
inline OrientationPath shift_path(const OrientationPath& p, int shift, int M) {
    OrientationPath out = p;
    for (int& a : out.angles)
        if (a != OrientationPath::kPooled) a = ((a + shift) % M + M) % M;
    return out;
}

struct FeatureMap {
    OrientationPath path;
    Image field;
};

struct LayerOutput {
    int layer_index = 0;
    std::vector<FeatureMap> maps;  // lexicographic in path
    double scale_s = 0.0;
    bool pooled_input = false;     // the layer was built from pooled maps
    bool pooled = false;           // the trailing angle has been summed out
};

/// Expected number of maps in layer k: M^min(k, K-1), with at least M maps
/// per layer (K = 1 pools the input image's single map away, leaving M).
inline int expected_map_count(const NetConfig& cfg, int k) {
    const int e = std::max(1, std::min(k, cfg.K - 1));
    int n = 1;
    for (int i = 0; i < e; ++i) n *= cfg.M;
    return n;
}

/// Sums a layer over its trailing orientation index.
inline LayerOutput pool_orientations(const LayerOutput& layer) {
    detail::require(!layer.pooled, "pool_orientations: layer already pooled");
    detail::require(!layer.maps.empty(), "pool_orientations: empty layer");
    LayerOutput out;
    out.layer_index = layer.layer_index;
    out.scale_s = layer.scale_s;
    out.pooled_input = layer.pooled_input;
    out.pooled = true;
    for (const FeatureMap& m : layer.maps) {
        OrientationPath key = m.path;
        detail::require(!key.angles.empty() && key.angles.back() != OrientationPath::kPooled,
                        "pool_orientations: layer has no free trailing angle");
        key.angles.back() = OrientationPath::kPooled;
        if (!out.maps.empty() && out.maps.back().path == key) {
            auto dst = out.maps.back().field.data();
            const auto src = m.field.data();
            for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
        } else {
            out.maps.push_back({std::move(key), m.field});
        }
    }
    return out;
}

/// Per-(input map, angle) callback, invoked while a layer is built: the input
/// map, its jet at the layer scale, the angle index and the resulting Q map.
using JetVisitor = std::function<void(const FeatureMap& input, const Jet2& jet, int angle, const Image& q)>;

/// Layer-at-a-time evaluation of the network for one (image, s0) pair.
/// Only the most recent layer is kept in memory.
class NetworkCascade {
public:
    NetworkCascade(const Image& img, NetConfig cfg, double s0) : cfg_(std::move(cfg)), s0_(s0) {
        cfg_.validate();
        detail::require(img.channels() == 1, "build_network: expects a single-channel image");
        detail::require(img.width() >= 16 && img.height() >= 16, "build_network: image must be at least 16x16");
        detail::require(s0 > 0.0, "build_network: s0 must be > 0");
        const double sigma_deep = std::sqrt(layer_scale(cfg_, s0, cfg_.num_layers));
        detail::require(2.0 * sigma_deep <= std::min(img.width(), img.height()),
                        "build_network: image too small for the coarsest scale");
        input_.push_back({OrientationPath{}, img});
    }

    const NetConfig& config() const noexcept { return cfg_; }
    double s0() const noexcept { return s0_; }
    bool done() const noexcept { return next_ > cfg_.num_layers; }
    int next_layer() const noexcept { return next_; }

    /// Builds the next layer and returns it; the reference stays valid until
    /// the following call.
    const LayerOutput& step(const JetVisitor& visit = {}) {
        detail::require(!done(), "NetworkCascade::step: all layers already built");
        const int k = next_;
        const double s = layer_scale(cfg_, s0_, k);
        const QQParams qp = cfg_.qq_params();

        bool pooled_input = false;
        if (k >= 2) {
            if (k >= cfg_.K) {
                current_ = pool_orientations(current_);
                pooled_input = true;
            }
            input_ = std::move(current_.maps);
        } else if (cfg_.K == 1) {
            pooled_input = true;  // the image carries no angle; pooling is a no-op
        }

        LayerOutput out;
        out.layer_index = k;
        out.scale_s = s;
        out.pooled_input = pooled_input;
        out.maps.reserve(input_.size() * static_cast<std::size_t>(cfg_.M));
        for (const FeatureMap& in : input_) {
            const Jet2 jet = jet2(in.field, s, 1.0, cfg_.eps);
            for (int m = 0; m < cfg_.M; ++m) {
                Image q = qq_oriented(jet, cfg_.angle(m), qp);
                if (qp.r_post > 0.0) q = qq_post_smooth(q, s, qp, cfg_.eps);
                OrientationPath p = in.path;
                p.angles.push_back(m);
                if (visit) visit(in, jet, m, q);
                out.maps.push_back({std::move(p), std::move(q)});
            }
        }
        input_.clear();
        current_ = std::move(out);
        ++next_;
        return current_;
    }

private:
    NetConfig cfg_;
    double s0_;
    int next_ = 1;
    std::vector<FeatureMap> input_;
    LayerOutput current_;
};

/// All layers of the network for one initial scale.
inline std::vector<LayerOutput> build_network(const Image& img, const NetConfig& cfg, double s0) {
    NetworkCascade net(img, cfg, s0);
    std::vector<LayerOutput> layers;
    while (!net.done()) layers.push_back(net.step());
    return layers;
}

}  // namespace qqnet
