#include <gtest/gtest.h>

#include <cmath>

#include "boltzgap/kernels.hpp"

using namespace boltzgap;

TEST(Kernel, PhiValues) {
    auto hs = make_kernel(3, 1.0, 1.0, AngularProfile::constant());
    EXPECT_EQ(hs.phi(0.0), 0.0);
    EXPECT_DOUBLE_EQ(hs.phi(2.0), 2.0);
    auto k = make_kernel(3, 0.5, 2.0, AngularProfile::constant());
    EXPECT_NEAR(k.phi(4.0), 4.0, 1e-14);
    EXPECT_THROW(k.phi(-1.0), DomainError);
}

TEST(Kernel, RejectsOutsideHardPotentials) {
    EXPECT_THROW(make_kernel(3, 0.0, 1.0, AngularProfile::constant()), DomainError);
    EXPECT_THROW(make_kernel(3, 1.5, 1.0, AngularProfile::constant()), DomainError);
    EXPECT_THROW(make_kernel(3, 1.0, -1.0, AngularProfile::constant()), DomainError);
    EXPECT_THROW(make_kernel(4, 1.0, 1.0, AngularProfile::constant()), DomainError);
}

TEST(Kernel, AngularIntegralOfConstant) {
    // |S^2| c
    for (double c : {0.3, 1.0, 2.5}) EXPECT_NEAR(angular_integral([c](double) { return c; }, 3), 4 * pi * c, 1e-12);
    EXPECT_NEAR(angular_integral([](double) { return 1.0 / (4 * pi); }, 3), 1.0, 1e-13);
    // N = 2: circle length
    EXPECT_NEAR(angular_integral([](double) { return 1.0; }, 2), 2 * pi, 1e-12);
}

TEST(Kernel, NormalizedHardSphere) {
    auto k = hard_sphere_kernel(3);
    EXPECT_NEAR(k.ell_b(), 1.0, 1e-13);
    EXPECT_NEAR(k.b(0.3), 1.0 / (4 * pi), 1e-14);
    EXPECT_NEAR(k.c_b, 1.0 / (4 * pi), 1e-14);
}

TEST(Kernel, ZeroProfileIsRejected) {
    EXPECT_THROW(make_kernel(3, 1.0, 1.0, AngularProfile::constant(0.0)), DomainError);
    EXPECT_THROW(make_kernel(3, 1.0, 1.0, AngularProfile::tabulated({0.0, 0.0, 0.0})), DomainError);
    EXPECT_THROW(AngularProfile::tabulated({1.0, -0.5}), DomainError);
}

TEST(Kernel, TabulatedProfileInterpolates) {
    auto p = AngularProfile::tabulated({0.0, 1.0, 4.0});
    EXPECT_DOUBLE_EQ(p(-1.0), 0.0);
    EXPECT_DOUBLE_EQ(p(0.0), 1.0);
    EXPECT_DOUBLE_EQ(p(0.5), 2.5);
    EXPECT_DOUBLE_EQ(p(1.0), 4.0);
}

TEST(Kernel, ExplicitGapBound) {
    // gamma = 1: pi / (48 sqrt(2e))
    double v = explicit_gap_lower_bound(1.0, 1.0, 1.0);
    EXPECT_NEAR(v, pi / (48 * std::sqrt(2 * std::exp(1.0))), 1e-15);
    EXPECT_NEAR(v, 0.0281, 5e-5);
    EXPECT_NEAR(explicit_gap_lower_bound(2.0, 3.0, 1.0), 6 * v, 1e-15);
    // gamma = 1/2 by independent arithmetic: (1/16)^{1/4} e^{-1/4} pi/24
    EXPECT_NEAR(explicit_gap_lower_bound(1.0, 1.0, 0.5), 0.5 * std::exp(-0.25) * 0.1308996938995747, 1e-15);
}

TEST(Mollifier, BumpIntegratesToOne) {
    Mollifier m(3);
    EXPECT_NEAR(m.cdf(1.0), 1.0, 1e-14);
    EXPECT_NEAR(m.cdf(0.0), 0.5, 1e-12);
    EXPECT_EQ(m.cdf(-1.0), 0.0);
}

TEST(Mollifier, AngularWindowSupport) {
    auto k = hard_sphere_kernel(3);
    auto bd = mollified_angular(k, 0.1);
    EXPECT_EQ(bd(1.0), 0.0);
    EXPECT_EQ(bd(-1.0), 0.0);
    EXPECT_NEAR(bd(0.0), k.b(0.0), 1e-14);
    // supp b_delta within [-1 + delta^2, 1 - delta^2]
    EXPECT_EQ(bd(1 - 0.0099), 0.0);
    EXPECT_GT(bd(1 - 0.03), 0.0);
    EXPECT_THROW(mollified_angular(k, 1.0), DomainError);
    EXPECT_THROW(mollified_angular(k, 0.0), DomainError);
}

TEST(Mollifier, VelocityWindow) {
    Mollifier m(3);
    double d = 0.5;
    EXPECT_EQ(m.velocity_window(0.0, d), 1.0);
    EXPECT_EQ(m.velocity_window(1 / d + 2 * d, d), 0.0);
    double v = m.velocity_window(1 / d, d);
    EXPECT_GT(v, 0.0);
    EXPECT_LT(v, 1.0);
    // brute-force convolution over the ball of radius delta in spherical
    // coordinates: int Theta~_delta(y) 1{|v - y| <= 1/delta} dy, |v| = 1/delta
    const int nr = 400, nc = 4000;
    double R = 1 / d, acc = 0, norm = 0;
    for (int i = 0; i < nr; ++i) {
        double r = d * (i + 0.5) / nr;
        double wr = Mollifier::raw(r / d) * r * r * d / nr;
        norm += wr * 4 * pi;
        for (int j = 0; j < nc; ++j) {
            double c = -1 + 2 * (j + 0.5) / nc;
            // |v - y|^2 with v on the pole
            double dist2 = R * R + r * r - 2 * R * r * c;
            if (dist2 <= R * R) acc += wr * 2 * pi * 2.0 / nc;
        }
    }
    EXPECT_NEAR(v, acc / norm, 2e-3);
}
