#include <gtest/gtest.h>

#include <cmath>

#include "qqnet/covariance.hpp"
#include "qqnet/synthetic.hpp"
#include "test_util.hpp"

using namespace qqnet;

namespace {

NetConfig compact(double Gamma = 0.0) {
    NetConfig c;
    c.M = 4;
    c.num_layers = 3;
    c.K = 2;
    c.Gamma = Gamma;
    return c;
}

const Image& texture() {
    static const Image f = make_smooth_texture(128, 8.0, 21);
    return f;
}

}  // namespace

TEST(ScaleCovarianceTest, IdentityScaleIsExact) {
    const auto rep = check_scale_covariance(texture(), compact(), 1.0, 1.0);
    ASSERT_EQ(rep.layers.size(), 3u);
    for (const auto& l : rep.layers) EXPECT_LT(l.rel_rms, 1e-12);
    EXPECT_TRUE(rep.passed);
    EXPECT_TRUE(rep.warnings.empty());
}

TEST(ScaleCovarianceTest, FactorTwoWithinTolerance) {
    const auto rep = check_scale_covariance(texture(), compact(), 2.0, 1.0);
    EXPECT_DOUBLE_EQ(rep.s0_transformed, 4.0);
    for (const auto& l : rep.layers) {
        EXPECT_LT(l.rel_rms, 0.07) << "layer " << l.layer;
        EXPECT_NEAR(l.ratio, 1.0, 0.07);
    }
    EXPECT_TRUE(rep.passed);
    const json j = report_to_json(rep);
    EXPECT_EQ(j.at("config_hash"), config_hash(compact()));
    EXPECT_EQ(j.at("layers").size(), 3u);
}

TEST(ScaleCovarianceTest, NonzeroGammaRescalesLayersByPowerOfS) {
    const double S = 2.0;
    const auto rep = check_scale_covariance(texture(), compact(0.5), S, 1.0);
    for (const auto& l : rep.layers) {
        EXPECT_NEAR(l.expected_ratio, std::pow(S, 0.5 * l.layer), 1e-12);
        EXPECT_NEAR(l.ratio / l.expected_ratio, 1.0, 0.1) << "layer " << l.layer;
        EXPECT_LT(l.rel_rms, 0.07);
    }
}

TEST(ScaleCovarianceTest, OffGridFactorIsApproximate) {
    const auto exact = check_scale_covariance(texture(), compact(), 2.0, 1.0);
    const auto off = check_scale_covariance(texture(), compact(), std::sqrt(2.0), 1.0);
    ASSERT_FALSE(off.warnings.empty());
    EXPECT_GT(off.layers[0].rel_rms, exact.layers[0].rel_rms);
    // with r = sqrt(2) the same factor is on the grid again
    NetConfig fine = compact();
    fine.r = std::sqrt(2.0);
    const auto on = check_scale_covariance(texture(), fine, std::sqrt(2.0), 1.0);
    EXPECT_TRUE(on.warnings.empty());
    EXPECT_LT(on.layers[0].rel_rms, off.layers[0].rel_rms);
}

TEST(ScaleCovarianceTest, Errors) {
    EXPECT_THROW(check_scale_covariance(texture(), compact(), 0.0, 1.0), DomainError);
    EXPECT_THROW(check_scale_covariance(Image(16, 16, 1), compact(), 2.0, 1.0), DomainError);
}

TEST(RotationCovarianceTest, QuarterTurnsExact) {
    const Image f = make_noise(72, 72, 6);
    NetConfig c = compact();
    c.M = 8;
    for (int q : {0, 1, 2, 3, -1}) {
        const auto rep = check_rotation_covariance(f, c, q, 1.0);
        EXPECT_TRUE(rep.passed) << "q=" << q;
        for (const auto& l : rep.layers) EXPECT_LT(l.max_abs, 1e-9);
    }
    NetConfig odd = compact();
    odd.M = 3;
    EXPECT_THROW(check_rotation_covariance(f, odd, 1, 1.0), DomainError);
    EXPECT_TRUE(check_rotation_covariance(f, odd, 2, 1.0).passed);
}

TEST(DerivativeEqualityTest, UnitGammaMatchesAcrossScales) {
    for (int n : {1, 2}) {
        const auto r = check_gamma1_derivative_equality(texture(), 2.0, 2.0, n);
        EXPECT_LT(r.rel_rms, 0.05) << "n=" << n;
        EXPECT_NEAR(r.ratio, 1.0, 0.05);
        EXPECT_TRUE(r.passed);
    }
    // gamma = 1/2 leaves a factor S^(n (gamma - 1)) between the two sides
    const auto half = check_gamma1_derivative_equality(texture(), 2.0, 2.0, 1, 0.05, 0.5);
    EXPECT_NEAR(half.expected_ratio, std::pow(2.0, -0.5), 1e-12);
    EXPECT_NEAR(half.ratio * half.expected_ratio, 1.0, 0.05);
    EXPECT_FALSE(half.passed);
    EXPECT_THROW(check_gamma1_derivative_equality(texture(), 2.0, 2.0, 3), DomainError);
}

TEST(ScaleSelectionTest, EmpiricalMaximumNearClosedForm) {
    const double s0 = 32.0;
    const auto grid = selection_scale_grid(s0);
    EXPECT_NEAR(grid.front(), 4.0, 1e-12);
    EXPECT_NEAR(grid.back(), 256.0, 1e-9);
    for (int n : {0, 1, 2}) {
        const auto r = sweep_scale_selection(s0, 0.0, n, grid);
        EXPECT_TRUE(r.within_one_step) << "n=" << n << " empirical " << r.empirical << " predicted " << r.predicted;
        EXPECT_EQ(r.responses.size(), grid.size());
    }
    EXPECT_THROW(sweep_scale_selection(0.5, 0.0, 0, grid), DomainError);
}

TEST(RippleTest, SuiteRowsAgree) {
    const auto rows = ripple_suite({{1.0, 1.0}, {2.0, 4.0}, {4.0, 1.0}});
    ASSERT_EQ(rows.size(), 3u);
    for (const auto& r : rows) EXPECT_LT(r.rel_error, 1e-4);
    EXPECT_NEAR(rows[0].closed_form_C, 8.0 / 11.0, 1e-12);
    EXPECT_EQ(rows_to_json(rows).at("rows").size(), 3u);
}
