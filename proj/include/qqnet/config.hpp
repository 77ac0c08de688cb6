#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "error.hpp"
#include "quadrature.hpp"
#include "scale_space.hpp"

namespace qqnet {

using json = nlohmann::json;

/// Network hyperparameters. Scales are variances in pixels^2.
struct NetConfig {
    int M = 8;                 // orientations over [0, pi)
    int num_layers = 4;
    int K = 3;                 // first layer whose input is orientation-pooled
    double r = 2.0;            // inter-layer ratio in sigma units
    double Gamma = 0.0;
    double C = kRippleOptimalC;
    std::vector<double> s0_list{1.0, 4.0, 16.0, 64.0};
    bool post_smooth = false;
    double r_post = std::sqrt(2.0);
    double eps = kDefaultKernelEps;
    double border_factor = 3.0;  // interior band = ceil(border_factor * sigma_deepest)

    void validate() const {
        detail::require(M >= 2, "NetConfig: M must be >= 2");
        detail::require(num_layers >= 1, "NetConfig: num_layers must be >= 1");
        detail::require(K >= 1 && K <= num_layers, "NetConfig: K must satisfy 1 <= K <= num_layers");
        detail::require(r > 1.0 && std::isfinite(r), "NetConfig: r must be > 1");
        detail::require(C > 0.0, "NetConfig: C must be > 0");
        detail::require(std::isfinite(Gamma), "NetConfig: Gamma must be finite");
        detail::require(!s0_list.empty(), "NetConfig: s0_list must not be empty");
        for (double s0 : s0_list) detail::require(s0 > 0.0 && std::isfinite(s0), "NetConfig: all s0 must be > 0");
        detail::require(r_post >= 0.0, "NetConfig: r_post must be >= 0");
        detail::require(eps > 0.0 && eps < 1e-3, "NetConfig: eps must be in (0, 1e-3)");
        detail::require(border_factor >= 0.0, "NetConfig: border_factor must be >= 0");
    }

    QQParams qq_params() const { return {C, Gamma, post_smooth ? r_post : 0.0}; }

    /// Orientation angle m*pi/M.
    double angle(int m) const { return m * std::numbers::pi / M; }
};

/// s_k = s0 r^(2(k-1)).
inline double layer_scale(const NetConfig& cfg, double s0, int k) {
    detail::require(k >= 1 && k <= cfg.num_layers, "layer_scale: layer index out of range");
    return s0 * std::pow(cfg.r, 2.0 * (k - 1));
}

/// Interior band for one s0 pass: ceil(border_factor * sigma of the deepest layer).
inline int border_band(const NetConfig& cfg, double s0) {
    const double sigma = std::sqrt(layer_scale(cfg, s0, cfg.num_layers));
    return static_cast<int>(std::ceil(cfg.border_factor * sigma - 1e-9));
}

inline std::vector<double> sigmas_to_variances(const std::vector<double>& sigmas) {
    std::vector<double> out;
    out.reserve(sigmas.size());
    for (double s : sigmas) out.push_back(s * s);
    return out;
}

inline void to_json(json& j, const NetConfig& c) {
    j = json{{"M", c.M},
             {"num_layers", c.num_layers},
             {"K", c.K},
             {"r", c.r},
             {"Gamma", c.Gamma},
             {"C", c.C},
             {"s0_list", c.s0_list},
             {"post_smooth", c.post_smooth},
             {"r_post", c.r_post},
             {"eps", c.eps},
             {"border_factor", c.border_factor}};
}

/// Missing keys keep their defaults; "sigma0_list" is accepted as an
/// alternative to "s0_list".
inline void from_json(const json& j, NetConfig& c) {
    static const char* known[] = {"M", "num_layers", "K", "r", "Gamma", "C", "s0_list", "sigma0_list",
                                  "post_smooth", "r_post", "eps", "border_factor"};
    for (const auto& [key, _] : j.items()) {
        bool ok = false;
        for (const char* k : known) ok = ok || key == k;
        if (!ok) throw DomainError("NetConfig: unknown key '" + key + "'");
    }
    if (j.contains("M")) j.at("M").get_to(c.M);
    if (j.contains("num_layers")) j.at("num_layers").get_to(c.num_layers);
    if (j.contains("K")) j.at("K").get_to(c.K);
    if (j.contains("r")) j.at("r").get_to(c.r);
    if (j.contains("Gamma")) j.at("Gamma").get_to(c.Gamma);
    if (j.contains("C")) j.at("C").get_to(c.C);
    if (j.contains("s0_list")) j.at("s0_list").get_to(c.s0_list);
    if (j.contains("sigma0_list")) c.s0_list = sigmas_to_variances(j.at("sigma0_list").get<std::vector<double>>());
    if (j.contains("post_smooth")) j.at("post_smooth").get_to(c.post_smooth);
    if (j.contains("r_post")) j.at("r_post").get_to(c.r_post);
    if (j.contains("eps")) j.at("eps").get_to(c.eps);
    if (j.contains("border_factor")) j.at("border_factor").get_to(c.border_factor);
}

inline NetConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw FormatError("malformed config JSON in " + path + ": " + e.what());
    }
    NetConfig cfg = j.get<NetConfig>();
    cfg.validate();
    return cfg;
}

/// 64-bit FNV-1a of the canonical (sorted-key) JSON form, as 16 hex digits.
inline std::string config_hash(const NetConfig& cfg) {
    const std::string canon = json(cfg).dump();
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char ch : canon) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace qqnet
