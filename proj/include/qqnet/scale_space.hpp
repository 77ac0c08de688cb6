#pragma once

// Discrete Gaussian scale space and gamma-normalized derivatives.
//
// Smoothing uses the discrete analogue of the Gaussian, T(n; s) = e^-s I_n(s),
// applied separably with whole-sample mirror boundaries. Derivatives are
// the small-support central differences (-1/2, 0, 1/2) and (1, -2, 1) applied
// to the smoothed image; the mixed derivative is the tensor product of two
// first-order stencils.

#include <array>
#include <cmath>
#include <numbers>
#include <utility>
#include <vector>

#include "error.hpp"
#include "image.hpp"

namespace qqnet {

inline constexpr double kDefaultKernelEps = 1e-8;

struct Kernel1D {
    int radius = 0;
    std::vector<double> coeffs{1.0};  // 2*radius+1 taps, centre at index radius
    double scale_s = 0.0;

    double at(int n) const noexcept {
        n = n < 0 ? -n : n;
        return n > radius ? 0.0 : coeffs[static_cast<std::size_t>(radius + n)];
    }
};

namespace detail {

// Values e^-s I_n(s) for n = 0..n_max by the power series
//   I_n(s) = sum_k (s/2)^(n+2k) / (k! (n+k)!),
// carried out with the e^-s factor folded into the leading term.
inline std::vector<double> scaled_bessel_series(double s, int n_max) {
    std::vector<double> out(static_cast<std::size_t>(n_max) + 1, 0.0);
    const double half = 0.5 * s;
    const double half2 = half * half;
    for (int n = 0; n <= n_max; ++n) {
        double term = std::exp(n * std::log(half) - std::lgamma(n + 1.0) - s);
        double sum = 0.0;
        for (int k = 0; k < 10000; ++k) {
            sum += term;
            term *= half2 / ((k + 1.0) * (n + k + 1.0));
            if (term < 1e-18 * sum) break;
        }
        out[static_cast<std::size_t>(n)] = sum;
    }
    return out;
}

// Miller backward recurrence I_{n-1} = I_{n+1} + (2n/s) I_n, normalized by
// the identity e^-s (I_0 + 2 sum_{n>=1} I_n) = 1.
inline std::vector<double> scaled_bessel_miller(double s, int n_max) {
    const int start = n_max + 40 + static_cast<int>(std::sqrt(s));
    std::vector<double> b(static_cast<std::size_t>(start) + 2, 0.0);
    b[static_cast<std::size_t>(start)] = 1e-300;
    for (int n = start; n >= 1; --n) {
        b[static_cast<std::size_t>(n - 1)] =
            b[static_cast<std::size_t>(n + 1)] + (2.0 * n / s) * b[static_cast<std::size_t>(n)];
        if (b[static_cast<std::size_t>(n - 1)] > 1e250) {
            for (int m = n - 1; m <= start; ++m) b[static_cast<std::size_t>(m)] *= 1e-250;
        }
    }
    double total = 0.0;
    for (int n = start; n >= 1; --n) total += 2.0 * b[static_cast<std::size_t>(n)];
    total += b[0];
    std::vector<double> out(static_cast<std::size_t>(n_max) + 1);
    for (int n = 0; n <= n_max; ++n) out[static_cast<std::size_t>(n)] = b[static_cast<std::size_t>(n)] / total;
    return out;
}

}  // namespace detail

/// e^-s I_n(s) for n = 0..n_max. Power series for s <= 30, normalized Miller
/// recurrence above.
inline std::vector<double> scaled_bessel_values(double s, int n_max) {
    detail::require(s >= 0.0, "scaled_bessel_values: s must be >= 0");
    if (s == 0.0) {
        std::vector<double> out(static_cast<std::size_t>(n_max) + 1, 0.0);
        out[0] = 1.0;
        return out;
    }
    return s <= 30.0 ? detail::scaled_bessel_series(s, n_max) : detail::scaled_bessel_miller(s, n_max);
}

/// Discrete analogue of the Gaussian kernel with variance `s`, truncated at
/// the smallest radius whose two-sided tail mass is below `eps` and then
/// renormalized to unit sum.
inline Kernel1D discrete_gaussian_kernel(double s, double eps = kDefaultKernelEps) {
    detail::require(s >= 0.0 && std::isfinite(s), "discrete_gaussian_kernel: s must be >= 0");
    detail::require(eps > 0.0 && eps < 1e-3, "discrete_gaussian_kernel: eps must be in (0, 1e-3)");
    Kernel1D k;
    k.scale_s = s;
    if (s == 0.0) return k;

    const int n_max = static_cast<int>(std::ceil(s + 12.0 * std::sqrt(s) + 20.0));
    const std::vector<double> t = scaled_bessel_values(s, n_max);

    // tail[R] = 2 * sum_{n > R} T(n), accumulated from the far end
    std::vector<double> tail(t.size(), 0.0);
    for (int n = n_max - 1; n >= 0; --n)
        tail[static_cast<std::size_t>(n)] = tail[static_cast<std::size_t>(n + 1)] + 2.0 * t[static_cast<std::size_t>(n + 1)];
    int radius = 0;
    while (radius < n_max && tail[static_cast<std::size_t>(radius)] >= eps) ++radius;

    k.radius = radius;
    k.coeffs.assign(static_cast<std::size_t>(2 * radius + 1), 0.0);
    double sum = 0.0;
    for (int n = -radius; n <= radius; ++n) {
        const double v = t[static_cast<std::size_t>(std::abs(n))];
        k.coeffs[static_cast<std::size_t>(n + radius)] = v;
        sum += v;
    }
    for (double& c : k.coeffs) c /= sum;
    return k;
}

/// Separable convolution of a single-channel image with a symmetric kernel,
/// rows first, then columns. Mirror boundaries.
inline Image convolve_separable(const Image& img, const Kernel1D& k) {
    detail::require(img.channels() == 1, "smooth: expects a single-channel image");
    const int w = img.width();
    const int h = img.height();
    const int r = k.radius;
    if (r == 0) return img;
    const double* c = k.coeffs.data() + r;

    Image tmp(w, h, 1);
    std::vector<double> padded(static_cast<std::size_t>(w + 2 * r));
    for (int y = 0; y < h; ++y) {
        const auto src = img.row(y);
        for (int i = 0; i < w + 2 * r; ++i) padded[static_cast<std::size_t>(i)] = src[static_cast<std::size_t>(mirror_index(i - r, w))];
        auto dst = tmp.row(y);
        const double* p = padded.data() + r;
        for (int x = 0; x < w; ++x) {
            double acc = c[0] * p[x];
            for (int j = 1; j <= r; ++j) acc += c[j] * (p[x - j] + p[x + j]);
            dst[static_cast<std::size_t>(x)] = acc;
        }
    }

    Image out(w, h, 1);
    for (int y = 0; y < h; ++y) {
        auto dst = out.row(y);
        const auto centre = tmp.row(y);
        for (int x = 0; x < w; ++x) dst[static_cast<std::size_t>(x)] = c[0] * centre[static_cast<std::size_t>(x)];
        for (int j = 1; j <= r; ++j) {
            const double* a = tmp.row(mirror_index(y - j, h)).data();
            const double* b = tmp.row(mirror_index(y + j, h)).data();
            const double cj = c[j];
            double* d = dst.data();
            for (int x = 0; x < w; ++x) d[x] += cj * (a[x] + b[x]);
        }
    }
    return out;
}

/// Scale-space smoothing L(.; s) of a single-channel image.
inline Image smooth(const Image& img, double s, double eps = kDefaultKernelEps) {
    return convolve_separable(img, discrete_gaussian_kernel(s, eps));
}

/// Second-order jet of a single-channel image at one scale.
struct Jet2 {
    Image L, Lx, Ly, Lxx, Lxy, Lyy;
    double scale_s = 0.0;
    double gamma = 1.0;
    bool normalized = false;

    int width() const noexcept { return L.width(); }
    int height() const noexcept { return L.height(); }
};

/// Central-difference derivatives of an already smoothed image.
/// Order-n fields are multiplied by s^(n*gamma/2).
inline Jet2 jet_from_smoothed(Image smoothed, double s, double gamma) {
    const int w = smoothed.width();
    const int h = smoothed.height();
    Jet2 j;
    j.Lx = Image(w, h, 1);
    j.Ly = Image(w, h, 1);
    j.Lxx = Image(w, h, 1);
    j.Lxy = Image(w, h, 1);
    j.Lyy = Image(w, h, 1);
    const double n1 = std::pow(s, 0.5 * gamma);
    const double n2 = std::pow(s, gamma);
    const Image& L = smoothed;
    for (int y = 0; y < h; ++y) {
        const double* up = L.row(mirror_index(y - 1, h)).data();
        const double* mid = L.row(y).data();
        const double* dn = L.row(mirror_index(y + 1, h)).data();
        for (int x = 0; x < w; ++x) {
            const int xl = x > 0 ? x - 1 : mirror_index(x - 1, w);
            const int xr = x + 1 < w ? x + 1 : mirror_index(x + 1, w);
            const double c = mid[x];
            j.Lx(x, y) = n1 * 0.5 * (mid[xr] - mid[xl]);
            j.Ly(x, y) = n1 * 0.5 * (dn[x] - up[x]);
            j.Lxx(x, y) = n2 * (mid[xr] - 2.0 * c + mid[xl]);
            j.Lyy(x, y) = n2 * (dn[x] - 2.0 * c + up[x]);
            j.Lxy(x, y) = n2 * 0.25 * ((dn[xr] - dn[xl]) - (up[xr] - up[xl]));
        }
    }
    j.L = std::move(smoothed);
    j.scale_s = s;
    j.gamma = gamma;
    j.normalized = true;
    return j;
}

/// Gamma-normalized 2-jet at scale `s`. Derivatives need smoothing support,
/// so s must be strictly positive.
inline Jet2 jet2(const Image& img, double s, double gamma = 1.0, double eps = kDefaultKernelEps) {
    detail::require(s > 0.0, "jet2: scale must be > 0");
    return jet_from_smoothed(smooth(img, s, eps), s, gamma);
}

/// Pointwise directional derivatives along angle phi (from the x axis toward y).
struct DirectionalPair {
    double Lphi;
    double Lphiphi;
};

inline DirectionalPair directional_at(const Jet2& j, std::size_t i, double c, double sn) noexcept {
    const double lx = j.Lx.data()[i], ly = j.Ly.data()[i];
    const double lxx = j.Lxx.data()[i], lxy = j.Lxy.data()[i], lyy = j.Lyy.data()[i];
    return {c * lx + sn * ly, c * c * lxx + 2.0 * c * sn * lxy + sn * sn * lyy};
}

/// L_phi and L_phiphi fields. Normalization is inherited from the jet.
inline std::pair<Image, Image> directional_derivatives(const Jet2& j, double phi) {
    detail::require(!j.Lx.empty(), "directional_derivatives: incomplete jet");
    const double c = std::cos(phi);
    const double sn = std::sin(phi);
    Image d1(j.width(), j.height(), 1), d2(j.width(), j.height(), 1);
    for (std::size_t i = 0; i < j.Lx.pixel_count(); ++i) {
        const auto d = directional_at(j, i, c, sn);
        d1.data()[i] = d.Lphi;
        d2.data()[i] = d.Lphiphi;
    }
    return {std::move(d1), std::move(d2)};
}

/// Symmetric 2x2 matrix.
struct SymMat2 {
    double xx = 1.0, xy = 0.0, yy = 1.0;

    double det() const noexcept { return xx * yy - xy * xy; }
    std::array<double, 2> eigenvalues() const noexcept {
        const double m = 0.5 * (xx + yy);
        const double d = std::sqrt(0.25 * (xx - yy) * (xx - yy) + xy * xy);
        return {m + d, m - d};
    }
};

/// Spatial covariance matrix with eigenvalues lambda1 (along alpha) and
/// lambda2, scaled so the main eigenvalue is 1.
inline SymMat2 affine_covariance_matrix(double lambda1, double lambda2, double alpha) {
    detail::require(lambda1 > 0.0 && lambda2 > 0.0, "affine_covariance_matrix: eigenvalues must be > 0");
    const double c = std::cos(alpha), s = std::sin(alpha);
    const double norm = 1.0 / std::max(lambda1, lambda2);
    return {norm * (lambda1 * c * c + lambda2 * s * s), norm * (lambda1 - lambda2) * c * s,
            norm * (lambda1 * s * s + lambda2 * c * c)};
}

/// Samples g(x; s, Sigma) on [-radius, radius]^2 and renormalizes to unit sum.
/// Returned as a (2r+1)x(2r+1) image with the origin at its centre.
inline Image sample_affine_gaussian(double s, const SymMat2& sigma, int radius) {
    detail::require(s > 0.0, "sample_affine_gaussian: s must be > 0");
    detail::require(radius >= 0, "sample_affine_gaussian: radius must be >= 0");
    const double det = sigma.det();
    detail::require(sigma.xx > 0.0 && det > 1e-14 * std::max(1.0, sigma.xx * sigma.yy),
                    "sample_affine_gaussian: covariance matrix must be positive definite");
    const double ixx = sigma.yy / det, ixy = -sigma.xy / det, iyy = sigma.xx / det;
    const int n = 2 * radius + 1;
    Image k(n, n, 1);
    double sum = 0.0;
    for (int y = -radius; y <= radius; ++y)
        for (int x = -radius; x <= radius; ++x) {
            const double q = ixx * x * x + 2.0 * ixy * x * y + iyy * y * y;
            const double v = std::exp(-q / (2.0 * s)) / (2.0 * std::numbers::pi * s * std::sqrt(det));
            k(x + radius, y + radius) = v;
            sum += v;
        }
    for (double& v : k.data()) v /= sum;
    return k;
}

}  // namespace qqnet
