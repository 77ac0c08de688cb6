#pragma once

// Quasi-quadrature measures: the 1-D and oriented pointwise operators, the
// post-smoothed variant, and closed-form / numerical analysis helpers for a
// Gaussian blob input.

#include <cmath>
#include <numbers>
#include <optional>
#include <vector>

#include "error.hpp"
#include "image.hpp"
#include "scale_space.hpp"

namespace qqnet {

inline constexpr double kRippleOptimalC = 8.0 / 11.0;

struct QQParams {
    double C = kRippleOptimalC;  // weight of the even (second-order) component
    double Gamma = 0.0;          // complementary normalization power
    double r_post = 0.0;         // relative post-smoothing scale, 0 = none

    void validate() const {
        detail::require(C > 0.0 && std::isfinite(C), "QQParams: C must be > 0");
        detail::require(r_post >= 0.0 && std::isfinite(r_post), "QQParams: r_post must be >= 0");
        detail::require(std::isfinite(Gamma), "QQParams: Gamma must be finite");
    }
};

/// sqrt((Lx_n^2 + C Lxx_n^2) / s^Gamma) for gamma=1 normalized inputs.
inline double qq_pointwise_1d(double lx_norm, double lxx_norm, double s, const QQParams& p) {
    detail::require(s > 0.0, "qq_pointwise_1d: s must be > 0");
    const double num = lx_norm * lx_norm + p.C * lxx_norm * lxx_norm;
    return p.Gamma == 0.0 ? std::sqrt(num) : std::sqrt(num / std::pow(s, p.Gamma));
}

/// Oriented quasi-quadrature field of a gamma=1 normalized jet (isotropic case).
inline Image qq_oriented(const Jet2& jet, double phi, const QQParams& p) {
    detail::require(jet.normalized && jet.gamma == 1.0, "qq_oriented: jet must be gamma=1 normalized");
    detail::require(jet.scale_s > 0.0, "qq_oriented: s must be > 0");
    const double c = std::cos(phi), sn = std::sin(phi);
    const double inv = p.Gamma == 0.0 ? 1.0 : 1.0 / std::pow(jet.scale_s, p.Gamma);
    Image q(jet.width(), jet.height(), 1);
    auto out = q.data();
    for (std::size_t i = 0; i < out.size(); ++i) {
        const auto d = directional_at(jet, i, c, sn);
        out[i] = std::sqrt((d.Lphi * d.Lphi + p.C * d.Lphiphi * d.Lphiphi) * inv);
    }
    return q;
}

/// sqrt(g(.; r^2 s) * q^2). Identity when r_post == 0.
inline Image qq_post_smooth(const Image& q, double s, const QQParams& p, double eps = kDefaultKernelEps) {
    if (p.r_post == 0.0) return q;
    Image sq = q;
    for (double& v : sq.data()) v *= v;
    Image out = smooth(sq, p.r_post * p.r_post * s, eps);
    for (double& v : out.data()) v = std::sqrt(std::max(v, 0.0));
    return out;
}

/// Weight C minimizing the squared-measure ripple for a Gaussian blob of
/// variance s0 observed at scale s: 4 (s + s0) / (11 s).
inline double optimal_C(double s, double s0) {
    detail::require(s > 0.0 && s0 > 0.0, "optimal_C: scales must be > 0");
    return 4.0 * (s + s0) / (11.0 * s);
}

/// Scale at which Q at the origin peaks for the input g_{x^n}(x; s0).
inline double predicted_selection_scale(int n, double s0, double Gamma) {
    detail::require(n >= 0 && n <= 2, "predicted_selection_scale: n must be 0, 1 or 2");
    detail::require(s0 > 0.0, "predicted_selection_scale: s0 must be > 0");
    double s = 0.0;
    switch (n) {
        case 0: s = s0 * (2.0 - Gamma) / (2.0 + Gamma); break;
        case 1: s = s0 * (1.0 - Gamma) / (3.0 + Gamma); break;
        default: s = s0 * (2.0 - Gamma) / (4.0 + Gamma); break;
    }
    detail::require(s > 0.0 && std::isfinite(s), "predicted_selection_scale: no positive maximum for this Gamma");
    return s;
}

/// Relative first-order spatial sensitivity sqrt(s) d_x(Q) / Q from gamma=1
/// normalized Lx, Lxx, Lxxx. Returns nullopt where Q vanishes.
inline std::optional<double> phase_sensitivity(double lx, double lxx, double lxxx, const QQParams& p) {
    const double den = lx * lx + p.C * lxx * lxx;
    if (!(den > 0.0)) return std::nullopt;
    return lxx * (lx + p.C * lxxx) / den;
}

/// Numerical ripple functional  int (d_x Q^2)^2 dx  for the 1-D Gaussian blob
/// g(x; s0) at scale s. Q^2 is sampled on a dense grid and differentiated by
/// central differences; trapezoidal integration.
inline double ripple_integral(double C, double s, double s0, int samples = 20001) {
    detail::require(s > 0.0 && s0 > 0.0, "ripple_integral: scales must be > 0");
    const double t = s + s0;
    const double half = 12.0 * std::sqrt(t);
    const double dx = 2.0 * half / (samples - 1);
    std::vector<double> q2(static_cast<std::size_t>(samples));
    for (int i = 0; i < samples; ++i) {
        const double x = -half + i * dx;
        const double g = std::exp(-x * x / (2.0 * t)) / std::sqrt(2.0 * std::numbers::pi * t);
        const double lx = -x / t * g;
        const double lxx = (x * x - t) / (t * t) * g;
        q2[static_cast<std::size_t>(i)] = s * lx * lx + C * s * s * lxx * lxx;
    }
    double acc = 0.0;
    for (int i = 1; i + 1 < samples; ++i) {
        const double d = (q2[static_cast<std::size_t>(i + 1)] - q2[static_cast<std::size_t>(i - 1)]) / (2.0 * dx);
        acc += d * d * dx;  // end samples carry ~0 weight at 12 sigma
    }
    return acc;
}

/// Brute-force scan over C in [0, c_max] followed by golden-section refinement.
inline double minimize_ripple(double s, double s0, double c_max = 4.0) {
    const int steps = 80;
    double best_c = 0.0, best_v = ripple_integral(0.0, s, s0);
    for (int i = 1; i <= steps; ++i) {
        const double c = c_max * i / steps;
        const double v = ripple_integral(c, s, s0);
        if (v < best_v) best_v = v, best_c = c;
    }
    double a = std::max(0.0, best_c - c_max / steps);
    double b = std::min(c_max, best_c + c_max / steps);
    const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double x1 = b - phi * (b - a), x2 = a + phi * (b - a);
    double f1 = ripple_integral(x1, s, s0), f2 = ripple_integral(x2, s, s0);
    while (b - a > 1e-7) {
        if (f1 < f2) {
            b = x2, x2 = x1, f2 = f1;
            x1 = b - phi * (b - a);
            f1 = ripple_integral(x1, s, s0);
        } else {
            a = x1, x1 = x2, f1 = f2;
            x2 = a + phi * (b - a);
            f2 = ripple_integral(x2, s, s0);
        }
    }
    return 0.5 * (a + b);
}

}  // namespace qqnet
