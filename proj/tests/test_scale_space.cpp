#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "qqnet/scale_space.hpp"
#include "qqnet/synthetic.hpp"
#include "test_util.hpp"

using namespace qqnet;

TEST(KernelTest, ZeroScaleIsIdentity) {
    const Kernel1D k = discrete_gaussian_kernel(0.0);
    EXPECT_EQ(k.radius, 0);
    ASSERT_EQ(k.coeffs.size(), 1u);
    EXPECT_EQ(k.coeffs[0], 1.0);
    EXPECT_THROW(discrete_gaussian_kernel(-0.1), DomainError);
}

TEST(KernelTest, UnitSumSymmetricNonNegative) {
    for (double s : {0.5, 1.0, 4.0, 16.0, 64.0, 300.0}) {
        const Kernel1D k = discrete_gaussian_kernel(s);
        double sum = 0.0;
        for (double c : k.coeffs) {
            EXPECT_GE(c, 0.0);
            sum += c;
        }
        EXPECT_NEAR(sum, 1.0, 1e-8) << "s=" << s;
        for (int n = 0; n <= k.radius; ++n) EXPECT_EQ(k.at(n), k.at(-n));
    }
}

TEST(KernelTest, CentreCoefficientMatchesBesselOracle) {
    // e^-1 I_0(1). Renormalizing after truncation scales every tap by
    // 1 / (1 - tail), so the match is tight only for a tight eps.
    const double oracle = bessel_oracle(0, 1.0);
    EXPECT_NEAR(oracle, 0.4657596075936404, 1e-15);
    EXPECT_NEAR(discrete_gaussian_kernel(1.0, 1e-12).at(0), oracle, 1e-10);
    EXPECT_NEAR(discrete_gaussian_kernel(1.0).at(0), oracle, 1e-8 * oracle);
}

TEST(KernelTest, AllCoefficientsMatchOracleBothRegimes) {
    // series below s = 30, normalized backward recurrence above
    for (double s : {0.5, 2.0, 12.5, 29.0, 31.0, 80.0, 200.0}) {
        const auto vals = scaled_bessel_values(s, 40);
        for (int n = 0; n <= 40; ++n) {
            const double ref = bessel_oracle(n, s);
            EXPECT_NEAR(vals[n], ref, 1e-13 + 1e-10 * ref) << "s=" << s << " n=" << n;
        }
    }
}

TEST(KernelTest, VarianceEqualsScale) {
    for (double s : {0.5, 3.0, 50.0}) {
        const Kernel1D k = discrete_gaussian_kernel(s, 1e-12);
        double var = 0.0;
        for (int n = -k.radius; n <= k.radius; ++n) var += n * n * k.at(n);
        EXPECT_NEAR(var, s, 1e-6 * s);
    }
}

TEST(KernelTest, TruncationTailBelowEps) {
    const double eps = 1e-6;
    const Kernel1D k = discrete_gaussian_kernel(9.0, eps);
    double tail = 0.0;
    for (int n = k.radius + 1; n < k.radius + 200; ++n) tail += 2.0 * bessel_oracle(n, 9.0);
    EXPECT_LT(tail, eps);
    // one tap less would exceed the tolerance
    EXPECT_GE(tail + 2.0 * bessel_oracle(k.radius, 9.0), eps);
}

TEST(SmoothTest, ConstantPreserved) {
    const Image c(20, 15, 1, 0.75);
    const Image out = smooth(c, 3.0);
    for (double v : out.data()) EXPECT_NEAR(v, 0.75, 1e-14);
}

TEST(SmoothTest, ImpulseGivesOuterProduct) {
    Image imp(65, 65, 1);
    imp(32, 32) = 1.0;
    const Image out = smooth(imp, 2.0);
    const Kernel1D k = discrete_gaussian_kernel(2.0);
    for (int y = 0; y < 65; ++y)
        for (int x = 0; x < 65; ++x) EXPECT_NEAR(out(x, y), k.at(x - 32) * k.at(y - 32), 1e-16);
}

TEST(SmoothTest, SemigroupOnNoise) {
    const Image f = make_noise(128, 128, 5);
    const Image twice = smooth(smooth(f, 1.5), 2.5);
    const Image once = smooth(f, 4.0);
    EXPECT_LT(interior_max_abs_diff(twice, once, 12), 1e-6);
}

TEST(SmoothTest, RejectsMultiChannel) { EXPECT_THROW(smooth(Image(8, 8, 3), 1.0), DomainError); }

namespace {

Image polynomial(int n, double (*f)(double, double)) {
    Image img(n, n, 1);
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) img(x, y) = f(x, y);
    return img;
}

}  // namespace

TEST(JetTest, RampDerivatives) {
    const Image ramp = polynomial(48, [](double x, double) { return x; });
    const double s = 2.0;
    for (double gamma : {0.0, 0.5, 1.0}) {
        const Jet2 j = jet2(ramp, s, gamma);
        for (int y = 16; y < 32; ++y)
            for (int x = 16; x < 32; ++x) {
                EXPECT_NEAR(j.Lx(x, y), std::pow(s, gamma / 2), 1e-9);
                EXPECT_NEAR(j.Ly(x, y), 0.0, 1e-9);
                EXPECT_NEAR(j.Lxx(x, y), 0.0, 1e-9);
                EXPECT_NEAR(j.Lxy(x, y), 0.0, 1e-9);
            }
    }
}

TEST(JetTest, QuadraticSecondDerivative) {
    // smoothing x^2/2 with a variance-s kernel gives (x^2 + s)/2; the stencil
    // returns 1. A tight eps keeps the truncated kernel's variance at s.
    const Image quad = polynomial(48, [](double x, double) { return 0.5 * x * x; });
    const double s = 3.0;
    const Jet2 j = jet2(quad, s, 1.0, 1e-14);
    for (int y = 20; y < 28; ++y)
        for (int x = 20; x < 28; ++x) {
            EXPECT_NEAR(j.L(x, y), 0.5 * (x * x + s), 1e-7);
            EXPECT_NEAR(j.Lxx(x, y), s, 1e-7);
            EXPECT_NEAR(j.Lxy(x, y), 0.0, 1e-7);
            EXPECT_NEAR(j.Lyy(x, y), 0.0, 1e-7);
        }
}

TEST(JetTest, GammaNormalizationFactor) {
    const Image f = make_noise(32, 32, 9);
    const double s = 5.0;
    const Jet2 a = jet2(f, s, 0.0), b = jet2(f, s, 1.0);
    for (std::size_t i = 0; i < f.pixel_count(); ++i) {
        EXPECT_NEAR(b.Lx.data()[i], std::sqrt(s) * a.Lx.data()[i], 1e-14);
        EXPECT_NEAR(b.Lyy.data()[i], s * a.Lyy.data()[i], 1e-14);
        EXPECT_EQ(a.L.data()[i], b.L.data()[i]);
    }
    EXPECT_THROW(jet2(f, 0.0), DomainError);
}

TEST(JetTest, MixedDerivativeOfBilinear) {
    const Image xy = polynomial(40, [](double x, double y) { return 0.1 * x * y; });
    const Jet2 j = jet2(xy, 1.0, 0.0);
    for (int y = 12; y < 28; ++y)
        for (int x = 12; x < 28; ++x) EXPECT_NEAR(j.Lxy(x, y), 0.1, 1e-10);
}

TEST(DirectionalTest, AxesAndDiagonal) {
    const Image f = make_noise(24, 24, 4);
    const Jet2 j = jet2(f, 1.5, 1.0);
    const auto [d0, dd0] = directional_derivatives(j, 0.0);
    EXPECT_EQ(d0, j.Lx);
    EXPECT_EQ(dd0, j.Lxx);
    const auto [d90, dd90] = directional_derivatives(j, std::numbers::pi / 2);
    for (std::size_t i = 0; i < f.pixel_count(); ++i) {
        EXPECT_NEAR(d90.data()[i], j.Ly.data()[i], 1e-15);
        EXPECT_NEAR(dd90.data()[i], j.Lyy.data()[i], 1e-15);
    }
    const Image ramp = polynomial(32, [](double x, double) { return x; });
    const auto [l45, _] = directional_derivatives(jet2(ramp, 1.0, 0.0), std::numbers::pi / 4);
    EXPECT_NEAR(l45(16, 16), 0.70710678118654752, 1e-12);
}

TEST(AffineTest, CovarianceMatrix) {
    const SymMat2 iso = affine_covariance_matrix(3.0, 3.0, 0.7);
    EXPECT_NEAR(iso.xx, 1.0, 1e-15);
    EXPECT_NEAR(iso.xy, 0.0, 1e-15);
    EXPECT_NEAR(iso.yy, 1.0, 1e-15);
    const SymMat2 d = affine_covariance_matrix(4.0, 1.0, 0.0);
    EXPECT_DOUBLE_EQ(d.xx, 1.0);
    EXPECT_DOUBLE_EQ(d.yy, 0.25);
    EXPECT_DOUBLE_EQ(d.xy, 0.0);
    for (double a : {0.0, 0.3, 1.2, 2.5}) {
        const auto ev = affine_covariance_matrix(2.0, 5.0, a).eigenvalues();
        EXPECT_NEAR(ev[0], 1.0, 1e-12);
        EXPECT_NEAR(ev[1], 0.4, 1e-12);
    }
    EXPECT_THROW(affine_covariance_matrix(0.0, 1.0, 0.0), DomainError);
}

namespace {

struct Moments {
    double xx = 0, xy = 0, yy = 0, sum = 0;
};

Moments moments(const Image& k) {
    const int r = k.width() / 2;
    Moments m;
    for (int y = -r; y <= r; ++y)
        for (int x = -r; x <= r; ++x) {
            const double v = k(x + r, y + r);
            m.sum += v;
            m.xx += v * x * x;
            m.xy += v * x * y;
            m.yy += v * y * y;
        }
    return m;
}

}  // namespace

TEST(AffineTest, SampledKernelMoments) {
    const double s = 4.0;
    const Moments iso = moments(sample_affine_gaussian(s, SymMat2{}, 12));
    EXPECT_NEAR(iso.sum, 1.0, 1e-12);
    EXPECT_NEAR(iso.xx, s, 0.01 * s);
    EXPECT_NEAR(iso.yy, s, 0.01 * s);

    const Moments an = moments(sample_affine_gaussian(s, affine_covariance_matrix(4.0, 1.0, 0.0), 12));
    EXPECT_NEAR(an.xx, s, 0.01 * s);
    EXPECT_NEAR(an.yy, s / 4, 0.05 * s / 4);

    // principal axis follows alpha within one degree
    for (double alpha_deg : {20.0, 45.0, 110.0}) {
        const double alpha = alpha_deg * std::numbers::pi / 180.0;
        const Moments m = moments(sample_affine_gaussian(s, affine_covariance_matrix(4.0, 1.0, alpha), 16));
        double axis = 0.5 * std::atan2(2.0 * m.xy, m.xx - m.yy) * 180.0 / std::numbers::pi;
        if (axis < 0) axis += 180.0;
        EXPECT_NEAR(axis, alpha_deg, 1.0);
    }
    EXPECT_THROW(sample_affine_gaussian(s, SymMat2{1.0, 1.0, 1.0}, 5), DomainError);
}
