#pragma once

// Procedural test images: Gaussian-derivative blobs and five stationary
// texture families. Every generator is deterministic given its seed and
// defined in continuous pixel coordinates, so scaling `wavelength` by S yields
// a texture drawn from the same family magnified by S.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "error.hpp"
#include "image.hpp"

namespace qqnet {

/// Sampled g_{x^n}(x, y; s0) centred in a size x size grid. Order 0 peaks
/// at 1; order n is scaled by s0^(n/2) so all orders are O(1).
inline Image make_blob(int n, double s0, int size) {
    detail::require(n >= 0 && n <= 2, "make_blob: order must be 0, 1 or 2");
    detail::require(s0 > 0.0, "make_blob: s0 must be > 0");
    detail::require(size >= 8.0 * std::sqrt(s0), "make_blob: grid smaller than 8*sqrt(s0)");
    Image img(size, size, 1);
    const double c = 0.5 * (size - 1);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            const double dx = x - c, dy = y - c;
            const double g = std::exp(-(dx * dx + dy * dy) / (2.0 * s0));
            double v = g;
            if (n == 1) v = -dx / std::sqrt(s0) * g;
            if (n == 2) v = (dx * dx - s0) / s0 * g;
            img(x, y) = v;
        }
    return img;
}

enum class TextureKind { grating, checker, blob_noise, stripes_irregular, spots };

inline constexpr std::array<TextureKind, 5> kAllTextureKinds{TextureKind::grating, TextureKind::checker,
                                                             TextureKind::blob_noise, TextureKind::stripes_irregular,
                                                             TextureKind::spots};

inline std::string to_string(TextureKind k) {
    switch (k) {
        case TextureKind::grating: return "grating";
        case TextureKind::checker: return "checker";
        case TextureKind::blob_noise: return "blob_noise";
        case TextureKind::stripes_irregular: return "stripes_irregular";
        case TextureKind::spots: return "spots";
    }
    return "?";
}

inline TextureKind parse_texture_kind(const std::string& s) {
    for (TextureKind k : kAllTextureKinds)
        if (to_string(k) == s) return k;
    throw DomainError("unknown texture kind '" + s + "'");
}

struct TextureParams {
    double wavelength = 8.0;   // intrinsic period / element spacing in pixels
    double orientation = 0.0;  // radians, for oriented families
    double phase = 0.0;        // radians, grating phase
};

namespace detail {

// Platform-independent uniform doubles from a 64-bit Mersenne twister.
class Uniform {
public:
    explicit Uniform(std::uint64_t seed) : rng_(seed) {}
    double operator()() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }
    double operator()(double lo, double hi) { return lo + (hi - lo) * (*this)(); }

private:
    std::mt19937_64 rng_;
};

// Averages `f` over an ss x ss sub-pixel lattice.
template <class F>
Image render_supersampled(int size, int ss, F&& f) {
    Image img(size, size, 1);
    const double inv = 1.0 / (ss * ss);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            double acc = 0.0;
            for (int j = 0; j < ss; ++j)
                for (int i = 0; i < ss; ++i) acc += f(x + (i + 0.5) / ss - 0.5, y + (j + 0.5) / ss - 0.5);
            img(x, y) = acc * inv;
        }
    return img;
}

}  // namespace detail

/// Stationary texture in [0, 1].
inline Image make_texture(TextureKind kind, const TextureParams& p, std::uint64_t seed, int size) {
    detail::require(size >= 64, "make_texture: size must be >= 64");
    detail::require(p.wavelength > 0.0, "make_texture: wavelength must be > 0");
    detail::Uniform rnd(seed);
    const double lam = p.wavelength;
    const double co = std::cos(p.orientation), si = std::sin(p.orientation);
    constexpr double two_pi = 2.0 * std::numbers::pi;

    switch (kind) {
        case TextureKind::grating: {
            Image img(size, size, 1);
            for (int y = 0; y < size; ++y)
                for (int x = 0; x < size; ++x)
                    img(x, y) = 0.5 + 0.5 * std::sin(two_pi * (x * co + y * si) / lam + p.phase);
            return img;
        }
        case TextureKind::checker: {
            const double ou = rnd(0.0, lam), ov = rnd(0.0, lam);
            const double cell = 0.5 * lam;
            return detail::render_supersampled(size, 4, [&](double x, double y) {
                const double u = x * co + y * si + ou, v = -x * si + y * co + ov;
                const long a = static_cast<long>(std::floor(u / cell)) + static_cast<long>(std::floor(v / cell));
                return (a & 1) ? 0.85 : 0.15;
            });
        }
        case TextureKind::blob_noise: {
            const double sb = 0.25 * lam;
            const double margin = 4.0 * sb;
            const double area = (size + 2 * margin) * (size + 2 * margin);
            const int count = static_cast<int>(std::lround(4.0 * area / (lam * lam)));
            Image acc(size, size, 1);
            const int rad = static_cast<int>(std::ceil(margin));
            for (int b = 0; b < count; ++b) {
                const double bx = rnd(-margin, size + margin), by = rnd(-margin, size + margin);
                const double amp = rnd() < 0.5 ? -1.0 : 1.0;
                const int x0 = std::max(0, static_cast<int>(bx) - rad), x1 = std::min(size - 1, static_cast<int>(bx) + rad);
                const int y0 = std::max(0, static_cast<int>(by) - rad), y1 = std::min(size - 1, static_cast<int>(by) + rad);
                for (int y = y0; y <= y1; ++y)
                    for (int x = x0; x <= x1; ++x) {
                        const double dx = x - bx, dy = y - by;
                        acc(x, y) += amp * std::exp(-(dx * dx + dy * dy) / (2.0 * sb * sb));
                    }
            }
            for (double& v : acc.data()) v = std::clamp(0.5 + 0.15 * v, 0.0, 1.0);
            return acc;
        }
        case TextureKind::stripes_irregular: {
            // random stripe boundaries along u, widths in [0.25, 0.75] * lambda
            const double reach = std::sqrt(2.0) * size + 2.0 * lam;
            std::vector<double> edges;
            for (double u = -reach - rnd(0.0, lam); u < reach; u += rnd(0.25 * lam, 0.75 * lam)) edges.push_back(u);
            const double wave_phase = rnd(0.0, two_pi);
            return detail::render_supersampled(size, 4, [&](double x, double y) {
                const double v = -x * si + y * co;
                const double u = x * co + y * si + 0.15 * lam * std::sin(two_pi * v / (3.0 * lam) + wave_phase);
                const auto it = std::upper_bound(edges.begin(), edges.end(), u);
                return ((it - edges.begin()) & 1) ? 0.8 : 0.2;
            });
        }
        case TextureKind::spots: {
            const double margin = 0.5 * lam;
            const double area = (size + 2 * margin) * (size + 2 * margin);
            const int count = static_cast<int>(std::lround(area / (lam * lam)));
            struct Disk { double x, y, r; };
            std::vector<Disk> disks;
            for (int i = 0; i < count; ++i) {
                const double dx = rnd(-margin, size + margin), dy = rnd(-margin, size + margin);
                disks.push_back({dx, dy, rnd(0.2, 0.3) * lam});
            }
            // bucket disks on a coarse grid for lookup
            const double cellsz = lam;
            const int g = static_cast<int>(std::ceil((size + 2 * margin) / cellsz)) + 1;
            std::vector<std::vector<int>> grid(static_cast<std::size_t>(g * g));
            for (int i = 0; i < count; ++i) {
                const auto& d = disks[static_cast<std::size_t>(i)];
                const int cx0 = std::clamp(static_cast<int>((d.x - d.r + margin) / cellsz), 0, g - 1);
                const int cx1 = std::clamp(static_cast<int>((d.x + d.r + margin) / cellsz), 0, g - 1);
                const int cy0 = std::clamp(static_cast<int>((d.y - d.r + margin) / cellsz), 0, g - 1);
                const int cy1 = std::clamp(static_cast<int>((d.y + d.r + margin) / cellsz), 0, g - 1);
                for (int cy = cy0; cy <= cy1; ++cy)
                    for (int cx = cx0; cx <= cx1; ++cx) grid[static_cast<std::size_t>(cy * g + cx)].push_back(i);
            }
            return detail::render_supersampled(size, 4, [&](double x, double y) {
                const int cx = std::clamp(static_cast<int>((x + margin) / cellsz), 0, g - 1);
                const int cy = std::clamp(static_cast<int>((y + margin) / cellsz), 0, g - 1);
                for (int i : grid[static_cast<std::size_t>(cy * g + cx)]) {
                    const auto& d = disks[static_cast<std::size_t>(i)];
                    if ((x - d.x) * (x - d.x) + (y - d.y) * (y - d.y) <= d.r * d.r) return 0.9;
                }
                return 0.1;
            });
        }
    }
    throw DomainError("make_texture: unknown kind");
}

/// Seeded uniform noise in [0, 1].
inline Image make_noise(int width, int height, std::uint64_t seed) {
    detail::Uniform rnd(seed);
    Image img(width, height, 1);
    for (double& v : img.data()) v = rnd();
    return img;
}

/// Smooth stationary test image: a sum of a few random low-frequency plane
/// waves with wavelengths in [min_wavelength, 2 * min_wavelength].
inline Image make_smooth_texture(int size, double min_wavelength, std::uint64_t seed, int waves = 6) {
    detail::require(size >= 8, "make_smooth_texture: size must be >= 8");
    detail::Uniform rnd(seed);
    Image img(size, size, 1, 0.5);
    for (int k = 0; k < waves; ++k) {
        const double lam = rnd(min_wavelength, 2.0 * min_wavelength);
        const double th = rnd(0.0, std::numbers::pi);
        const double ph = rnd(0.0, 2.0 * std::numbers::pi);
        const double amp = 0.4 / waves;
        const double kx = 2.0 * std::numbers::pi * std::cos(th) / lam, ky = 2.0 * std::numbers::pi * std::sin(th) / lam;
        for (int y = 0; y < size; ++y)
            for (int x = 0; x < size; ++x) img(x, y) += amp * std::sin(kx * x + ky * y + ph);
    }
    return img;
}

}  // namespace qqnet
