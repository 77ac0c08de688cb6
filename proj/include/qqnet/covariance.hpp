#pragma once

// Executable checks of the network's covariance properties and of the
// closed-form scale-selection and ripple results.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "config.hpp"
#include "error.hpp"
#include "image.hpp"
#include "image_io.hpp"
#include "network.hpp"
#include "quadrature.hpp"
#include "scale_space.hpp"
#include "synthetic.hpp"

namespace qqnet {

struct LayerMetric {
    int layer = 0;
    double rel_rms = 0.0;  // after magnitude normalization
    double max_abs = 0.0;  // after magnitude normalization
    double ratio = 1.0;    // rms(reference) / rms(transformed), without normalization
    double expected_ratio = 1.0;
};

struct CovarianceReport {
    std::string kind;  // "scale" or "rotation"
    double S = 1.0;
    double alpha = 0.0;
    double s0 = 1.0;
    double s0_transformed = 1.0;
    int band = 0;
    double tolerance = 0.0;
    std::string metric;  // which per-layer value is held against the tolerance
    std::vector<LayerMetric> layers;
    std::vector<std::string> warnings;
    std::string config_hash;
    bool passed = false;
};

inline json report_to_json(const CovarianceReport& r) {
    json layers = json::array();
    for (const auto& l : r.layers)
        layers.push_back({{"layer", l.layer},
                          {"rel_rms", l.rel_rms},
                          {"max_abs", l.max_abs},
                          {"unnormalized_ratio", l.ratio},
                          {"expected_ratio", l.expected_ratio}});
    return json{{"experiment", r.kind},   {"S", r.S},           {"alpha", r.alpha},
                {"s0", r.s0},             {"s0_transformed", r.s0_transformed},
                {"band", r.band},         {"tolerance", r.tolerance},
                {"metric", r.metric},     {"layers", layers},   {"warnings", r.warnings},
                {"config_hash", r.config_hash}, {"passed", r.passed}};
}

namespace detail {

inline bool is_power_of(double S, double r) {
    const double j = std::log(S) / std::log(r);
    return std::abs(j - std::round(j)) < 1e-9;
}

struct PairAccumulator {
    double diff2 = 0.0, ref2 = 0.0, other2 = 0.0, max_abs = 0.0;
    void add(double ref, double other_raw, double norm) {
        const double o = other_raw * norm;
        diff2 += (o - ref) * (o - ref);
        ref2 += ref * ref;
        other2 += other_raw * other_raw;
        max_abs = std::max(max_abs, std::abs(o - ref));
    }
    double rel_rms() const { return ref2 > 0.0 ? std::sqrt(diff2 / ref2) : std::sqrt(diff2); }
    double ratio() const { return other2 > 0.0 ? std::sqrt(ref2 / other2) : 0.0; }
};

}  // namespace detail

/// Compares the network of `img` at s0 with the network of resample(img, S)
/// at S^2 s0, sampling the rescaled maps at S x by bilinear interpolation.
/// Layer k of the rescaled network is multiplied by S^(k Gamma) before
/// comparison. If S is not an integer power of r, s0' is snapped to the
/// nearest s0 r^(2j), as a fixed scale grid would do, and a warning is added.
inline CovarianceReport check_scale_covariance(const Image& img, const NetConfig& cfg, double S, double s0,
                                               double tol = 0.07) {
    cfg.validate();
    detail::require(S > 0.0 && std::isfinite(S), "check_scale_covariance: S must be > 0");
    detail::require(img.channels() == 1, "check_scale_covariance: expects a single-channel image");
    CovarianceReport rep;
    rep.kind = "scale";
    rep.S = S;
    rep.s0 = s0;
    rep.tolerance = tol;
    rep.metric = "rel_rms";
    rep.config_hash = config_hash(cfg);
    rep.s0_transformed = S * S * s0;
    if (!detail::is_power_of(S, cfg.r)) {
        const double j = std::round(std::log(S) / std::log(cfg.r));
        rep.s0_transformed = s0 * std::pow(cfg.r, 2.0 * j);
        rep.warnings.push_back("S is not an integer power of r: approximate regime, s0' snapped to s0*r^" +
                               std::to_string(static_cast<int>(2 * j)));
    }

    const Image scaled = resample(img, S);
    const int band_ref = border_band(cfg, s0);
    const int band_scaled = border_band(cfg, rep.s0_transformed);
    rep.band = std::max(band_ref, static_cast<int>(std::ceil(band_scaled / S)));
    // the looked-up positions S x must stay inside the rescaled raster
    Region roi = Region::interior(img, rep.band);
    roi.x1 = std::min(roi.x1, static_cast<int>(std::floor((scaled.width() - 1) / S)) + 1);
    roi.y1 = std::min(roi.y1, static_cast<int>(std::floor((scaled.height() - 1) / S)) + 1);
    detail::require(!roi.empty(), "check_scale_covariance: image too small after excluding a " +
                                      std::to_string(rep.band) + " px border band");

    NetworkCascade a(img, cfg, s0), b(scaled, cfg, rep.s0_transformed);
    bool ok = true;
    while (!a.done()) {
        const LayerOutput& la = a.step();
        const LayerOutput& lb = b.step();
        const int k = la.layer_index;
        const double norm = cfg.Gamma == 0.0 ? 1.0 : std::pow(S, k * cfg.Gamma);
        detail::PairAccumulator acc;
        for (std::size_t m = 0; m < la.maps.size(); ++m) {
            if (la.maps[m].path != lb.maps[m].path) throw std::logic_error("check_scale_covariance: path order differs");
            const Image& fa = la.maps[m].field;
            const Image& fb = lb.maps[m].field;
            for (int y = roi.y0; y < roi.y1; ++y)
                for (int x = roi.x0; x < roi.x1; ++x) acc.add(fa(x, y), sample_bilinear(fb, S * x, S * y), norm);
        }
        LayerMetric lm{k, acc.rel_rms(), acc.max_abs, acc.ratio(), norm};
        ok = ok && lm.rel_rms < tol;
        rep.layers.push_back(lm);
    }
    rep.passed = ok;
    return rep;
}

/// Compares F(rotate90(img, quarter_turns)) with the orientation-shifted,
/// grid-rotated F(img); the interior max-abs difference is held against tol.
inline CovarianceReport check_rotation_covariance(const Image& img, const NetConfig& cfg, int quarter_turns, double s0,
                                                  double tol = 1e-9) {
    cfg.validate();
    const int q = ((quarter_turns % 4) + 4) % 4;
    if (q % 2 == 1 && cfg.M % 2 == 1)
        throw DomainError("check_rotation_covariance: a quarter turn is not on the angle grid for odd M");
    CovarianceReport rep;
    rep.kind = "rotation";
    rep.alpha = quarter_turns * std::numbers::pi / 2.0;
    rep.s0 = rep.s0_transformed = s0;
    rep.tolerance = tol;
    rep.metric = "max_abs";
    rep.config_hash = config_hash(cfg);
    rep.band = border_band(cfg, s0);
    const int shift = q * cfg.M / 2;

    const Image rotated = rotate90(img, q);
    const Region roi = Region::interior(rotated, rep.band);
    detail::require(!roi.empty(), "check_rotation_covariance: image too small after excluding a " +
                                      std::to_string(rep.band) + " px border band");
    NetworkCascade a(img, cfg, s0), b(rotated, cfg, s0);
    bool ok = true;
    while (!a.done()) {
        const LayerOutput& la = a.step();
        const LayerOutput& lb = b.step();
        detail::PairAccumulator acc;
        for (const FeatureMap& fm : la.maps) {
            const OrientationPath target = shift_path(fm.path, shift, cfg.M);
            const auto it = std::lower_bound(lb.maps.begin(), lb.maps.end(), target,
                                             [](const FeatureMap& x, const OrientationPath& p) { return x.path < p; });
            if (it == lb.maps.end() || it->path != target) throw std::logic_error("check_rotation_covariance: missing path");
            const Image ref = rotate90(fm.field, q);
            for (int y = roi.y0; y < roi.y1; ++y)
                for (int x = roi.x0; x < roi.x1; ++x) acc.add(ref(x, y), it->field(x, y), 1.0);
        }
        LayerMetric lm{la.layer_index, acc.rel_rms(), acc.max_abs, acc.ratio(), 1.0};
        ok = ok && lm.max_abs < tol;
        rep.layers.push_back(lm);
    }
    rep.passed = ok;
    return rep;
}

struct DerivativeEqualityResult {
    int order = 1;
    double s = 1.0, S = 1.0, gamma = 1.0;
    double rel_rms = 0.0;
    double ratio = 1.0;           // rms(reference) / rms(rescaled)
    double expected_ratio = 1.0;  // S^(n (gamma - 1))
    int band = 0;
    double tolerance = 0.0;
    bool passed = false;          // rel_rms < tolerance (meaningful for gamma = 1)
};

inline json result_to_json(const DerivativeEqualityResult& r) {
    return json{{"experiment", "gamma1"}, {"order", r.order}, {"s", r.s}, {"S", r.S},
                {"gamma", r.gamma}, {"rel_rms", r.rel_rms}, {"ratio", r.ratio},
                {"expected_ratio", r.expected_ratio}, {"band", r.band}, {"tolerance", r.tolerance},
                {"passed", r.passed}};
}

/// Compares s'^(n gamma/2) L'_{x^n} at s' = S^2 s on resample(img, S) with
/// s^(n gamma/2) L_{x^n} on img, over all order-n partial derivatives.
inline DerivativeEqualityResult check_gamma1_derivative_equality(const Image& img, double s, double S, int n,
                                                                 double tol = 0.05, double gamma = 1.0) {
    detail::require(n == 1 || n == 2, "check_gamma1_derivative_equality: n must be 1 or 2");
    detail::require(s > 0.0 && S > 0.0, "check_gamma1_derivative_equality: s and S must be > 0");
    detail::require(img.channels() == 1, "check_gamma1_derivative_equality: expects a single-channel image");
    DerivativeEqualityResult r;
    r.order = n;
    r.s = s;
    r.S = S;
    r.gamma = gamma;
    r.tolerance = tol;
    r.expected_ratio = std::pow(S, n * (gamma - 1.0));
    const Image scaled = resample(img, S);
    const Jet2 ja = jet2(img, s, gamma), jb = jet2(scaled, S * S * s, gamma);
    r.band = static_cast<int>(std::ceil(3.0 * std::sqrt(s) * std::max(1.0, S) / std::min(1.0, S)));
    Region roi = Region::interior(img, r.band);
    roi.x1 = std::min(roi.x1, static_cast<int>(std::floor((scaled.width() - 1) / S)) + 1);
    roi.y1 = std::min(roi.y1, static_cast<int>(std::floor((scaled.height() - 1) / S)) + 1);
    detail::require(!roi.empty(), "check_gamma1_derivative_equality: image too small for the border band");
    std::vector<std::pair<const Image*, const Image*>> fields;
    if (n == 1) fields = {{&ja.Lx, &jb.Lx}, {&ja.Ly, &jb.Ly}};
    else fields = {{&ja.Lxx, &jb.Lxx}, {&ja.Lxy, &jb.Lxy}, {&ja.Lyy, &jb.Lyy}};
    detail::PairAccumulator acc;
    for (const auto& [fa, fb] : fields)
        for (int y = roi.y0; y < roi.y1; ++y)
            for (int x = roi.x0; x < roi.x1; ++x) acc.add((*fa)(x, y), sample_bilinear(*fb, S * x, S * y), 1.0);
    r.rel_rms = acc.rel_rms();
    r.ratio = acc.ratio();
    r.passed = r.rel_rms < tol;
    return r;
}

struct ScaleSelectionResult {
    int order = 0;
    double s0 = 1.0, Gamma = 0.0;
    double empirical = 0.0, predicted = 0.0;
    double grid_ratio = 1.0;
    bool within_one_step = false;
    std::vector<double> scales, responses;
};

inline json result_to_json(const ScaleSelectionResult& r) {
    return json{{"experiment", "selection"}, {"order", r.order},          {"s0", r.s0},
                {"Gamma", r.Gamma},           {"empirical", r.empirical},  {"predicted", r.predicted},
                {"grid_ratio", r.grid_ratio}, {"within_one_step", r.within_one_step},
                {"scales", r.scales},         {"responses", r.responses}};
}

/// Geometric grid from s0/8 to 8 s0 with the given ratio between neighbours.
inline std::vector<double> selection_scale_grid(double s0, double ratio = std::pow(2.0, 1.0 / 8.0)) {
    detail::require(s0 > 0.0 && ratio > 1.0, "selection_scale_grid: s0 > 0 and ratio > 1 required");
    std::vector<double> g;
    const int steps = static_cast<int>(std::round(std::log(64.0) / std::log(ratio)));
    for (int j = 0; j <= steps; ++j) g.push_back(s0 / 8.0 * std::pow(ratio, j));
    return g;
}

/// Renders g_{x^n}(.; s0) and returns the scale in `grid` maximizing Q at the
/// centre for phi = 0 (Q measured with gamma = 1 derivatives and C = 8/11),
/// alongside the closed-form prediction.
inline ScaleSelectionResult sweep_scale_selection(double blob_s0, double Gamma, int n, const std::vector<double>& grid) {
    detail::require(n >= 0 && n <= 2, "sweep_scale_selection: n must be 0, 1 or 2");
    detail::require(blob_s0 >= 1.0, "sweep_scale_selection: blob not resolvable on the pixel grid (s0 < 1)");
    detail::require(grid.size() >= 3, "sweep_scale_selection: grid needs at least 3 scales");
    for (std::size_t i = 1; i < grid.size(); ++i)
        detail::require(grid[i] > grid[i - 1], "sweep_scale_selection: grid must be increasing");
    ScaleSelectionResult r;
    r.order = n;
    r.s0 = blob_s0;
    r.Gamma = Gamma;
    r.predicted = predicted_selection_scale(n, blob_s0, Gamma);
    r.scales = grid;
    r.grid_ratio = 1.0;
    for (std::size_t i = 1; i < grid.size(); ++i) r.grid_ratio = std::max(r.grid_ratio, grid[i] / grid[i - 1]);

    // the blob must stay clear of the border at the coarsest scale
    const double reach = 6.0 * std::sqrt(grid.back() + blob_s0);
    const int size = 2 * static_cast<int>(std::ceil(reach)) + 1;
    const Image f = make_blob(n, blob_s0, size);
    const int c = size / 2;
    const QQParams qp{kRippleOptimalC, Gamma, 0.0};
    const std::size_t centre = static_cast<std::size_t>(c) * size + c;
    double best = -1.0;
    for (double s : grid) {
        const Jet2 j = jet2(f, s, 1.0);
        const double q = qq_pointwise_1d(j.Lx.data()[centre], j.Lxx.data()[centre], s, qp);
        r.responses.push_back(q);
        if (q > best) best = q, r.empirical = s;
    }
    r.within_one_step = std::abs(std::log(r.empirical / r.predicted)) <= std::log(r.grid_ratio) + 1e-9;
    return r;
}

struct RippleRow {
    double s = 1.0, s0 = 1.0, numeric_C = 0.0, closed_form_C = 0.0, rel_error = 0.0;
};

/// Numerical ripple minimizers against 4 (s + s0) / (11 s).
inline std::vector<RippleRow> ripple_suite(const std::vector<std::pair<double, double>>& cases) {
    std::vector<RippleRow> rows;
    for (const auto& [s, s0] : cases) {
        RippleRow r{s, s0, minimize_ripple(s, s0), optimal_C(s, s0), 0.0};
        r.rel_error = std::abs(r.numeric_C - r.closed_form_C) / r.closed_form_C;
        rows.push_back(r);
    }
    return rows;
}

inline json rows_to_json(const std::vector<RippleRow>& rows) {
    json a = json::array();
    for (const auto& r : rows)
        a.push_back({{"s", r.s}, {"s0", r.s0}, {"numeric_C", r.numeric_C}, {"closed_form_C", r.closed_form_C},
                     {"rel_error", r.rel_error}});
    return json{{"experiment", "ripple"}, {"rows", a}};
}

}  // namespace qqnet
